"""Odd-one-out test scenes: one element differs from the distractors in a
single feature dimension. Shared by unit tests and the acceptance suite."""

import numpy as np

from attbus.messages import BoundingBox, Header, ImageMsg

SIZE = 256
EXTENT = 24  # bounding square of every element
MARGIN = 24
MIN_SEP = 48


def place_elements(rng, count, size=SIZE, extent=EXTENT, margin=MARGIN,
                   min_sep=MIN_SEP):
    """Non-overlapping top-left corners, away from the border."""
    placed = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > 20000:
            raise RuntimeError("could not place elements; relax the layout")
        x = int(rng.integers(margin, size - margin - extent))
        y = int(rng.integers(margin, size - margin - extent))
        cx, cy = x + extent / 2, y + extent / 2
        if all((cx - px) ** 2 + (cy - py) ** 2 >= min_sep ** 2 for px, py in placed):
            placed.append((cx, cy))
    return [(int(cx - extent / 2), int(cy - extent / 2)) for cx, cy in placed]


def _disk_mask(extent):
    r = extent / 2.0
    ys, xs = np.mgrid[:extent, :extent] + 0.5
    return (xs - r) ** 2 + (ys - r) ** 2 <= (r - 0.5) ** 2


def intensity_popout(rng, n_distractors=8, stamp_ns=0):
    """Bright disk among dimmer disks on a dark background."""
    a = np.full((SIZE, SIZE), 32, dtype=np.uint8)
    spots = place_elements(rng, n_distractors + 1)
    disk = _disk_mask(EXTENT)
    for x, y in spots[:-1]:
        a[y:y + EXTENT, x:x + EXTENT][disk] = 96
    tx, ty = spots[-1]
    a[ty:ty + EXTENT, tx:tx + EXTENT][disk] = 224
    img = ImageMsg.from_array(a, Header(stamp_ns=stamp_ns))
    return img, BoundingBox(tx, ty, EXTENT, EXTENT)


def color_popout(rng, n_distractors=8, stamp_ns=0):
    """Red disk among green disks, all equiluminant, on mid gray."""
    a = np.full((SIZE, SIZE, 3), 128, dtype=np.uint8)
    spots = place_elements(rng, n_distractors + 1)
    disk = _disk_mask(EXTENT)
    for x, y in spots[:-1]:
        patch = a[y:y + EXTENT, x:x + EXTENT]
        patch[disk] = (0, 255, 0)
    tx, ty = spots[-1]
    patch = a[ty:ty + EXTENT, tx:tx + EXTENT]
    patch[disk] = (255, 0, 0)
    img = ImageMsg.from_array(a, Header(stamp_ns=stamp_ns))
    return img, BoundingBox(tx, ty, EXTENT, EXTENT)


def orientation_popout(rng, n_distractors=8, stamp_ns=0):
    """One vertical bar among horizontal bars of the same luminance."""
    a = np.full((SIZE, SIZE), 32, dtype=np.uint8)
    spots = place_elements(rng, n_distractors + 1)
    bar_l, bar_t = 20, 6  # length, thickness
    for x, y in spots[:-1]:
        cy = y + EXTENT // 2
        cx = x + EXTENT // 2
        a[cy - bar_t // 2:cy + bar_t // 2, cx - bar_l // 2:cx + bar_l // 2] = 224
    tx, ty = spots[-1]
    cy = ty + EXTENT // 2
    cx = tx + EXTENT // 2
    a[cy - bar_l // 2:cy + bar_l // 2, cx - bar_t // 2:cx + bar_t // 2] = 224
    img = ImageMsg.from_array(a, Header(stamp_ns=stamp_ns))
    return img, BoundingBox(tx, ty, EXTENT, EXTENT)


POPOUT_SCENES = {
    "intensity": intensity_popout,
    "color": color_popout,
    "orientation": orientation_popout,
}
