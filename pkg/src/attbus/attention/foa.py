"""Focus-of-attention selection, inhibition state, and region extraction.

The AttentionState holds everything an attention node mutates between
frames: the previous intensity pyramid (motion channel), top-down channel
gains, a winner-take-all inhibition-of-return layer that decays
geometrically, and externally requested inhibition regions that ramp
down linearly over their decay window. The combined inhibition map is
the pointwise max of both layers, kept at source resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import InvariantViolation
from ..imaging import resize_bilinear_array
from ..messages import (
    BoundingBox,
    Header,
    InhibitRegion,
    ObjectFoa,
    PointFoa,
    RegionFoa,
    SaliencyMap,
    TopDownGain,
    bbox_scale,
)

CHANNEL_ORDER = ("intensity", "color", "orientation", "motion")


@dataclass
class AttentionState:
    gains: dict = field(
        default_factory=lambda: {name: 1.0 for name in CHANNEL_ORDER}
    )
    prev_pyramid: list | None = None
    ior: np.ndarray | None = None  # source resolution, values in [0, 1]
    regions: list = field(default_factory=list)  # [bbox, decay_frames, age]
    source_size: tuple | None = None

    def _ensure_size(self, width: int, height: int):
        if self.source_size != (width, height):
            self.source_size = (width, height)
            self.ior = np.zeros((height, width), dtype=np.float64)
            self.prev_pyramid = None

    def inhibition_map(self, width: int, height: int) -> np.ndarray:
        """Combined inhibition at source resolution."""
        self._ensure_size(width, height)
        out = self.ior.copy()
        for bbox, decay_frames, age in self.regions:
            v = max(0.0, 1.0 - age / decay_frames)
            out[bbox.y : bbox.y + bbox.h, bbox.x : bbox.x + bbox.w] = np.maximum(
                out[bbox.y : bbox.y + bbox.h, bbox.x : bbox.x + bbox.w], v
            )
        return np.clip(out, 0.0, 1.0)

    def paint_ior(self, x: int, y: int, radius: float):
        if radius <= 0 or self.ior is None:
            return
        sigma = radius / 2.0
        h, w = self.ior.shape
        ys, xs = np.ogrid[:h, :w]
        disk = np.exp(-((xs - x) ** 2 + (ys - y) ** 2) / (2.0 * sigma**2))
        self.ior = np.clip(self.ior + disk, 0.0, 1.0)

    def decay_ior(self, gamma: float):
        if self.ior is not None:
            self.ior *= gamma

    def tick_regions(self):
        kept = []
        for bbox, decay_frames, age in self.regions:
            if age + 1 < decay_frames:
                kept.append([bbox, decay_frames, age + 1])
        self.regions = kept


def apply_feedback(state: AttentionState, msg) -> AttentionState:
    """Fold a TopDownGain or InhibitRegion message into the state."""
    if isinstance(msg, TopDownGain):
        msg.validate()
        state.gains = dict(zip(CHANNEL_ORDER, msg.gains))
    elif isinstance(msg, InhibitRegion):
        msg.validate()
        if state.source_size is not None:
            w, h = state.source_size
            bbox = _clip_bbox(msg.bbox, w, h)
            if bbox is not None:
                state.regions.append([bbox, msg.decay_frames, 0])
        else:
            state.regions.append([msg.bbox, msg.decay_frames, 0])
    else:
        raise InvariantViolation(f"not a feedback message: {type(msg).__name__}")
    return state


def _clip_bbox(bbox: BoundingBox, width: int, height: int):
    x0 = min(max(bbox.x, 0), width)
    y0 = min(max(bbox.y, 0), height)
    x1 = min(bbox.x + bbox.w, width)
    y1 = min(bbox.y + bbox.h, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def map_to_source(mx: int, my: int, map_size, source_size):
    """Center of a map pixel expressed in source coordinates."""
    mw, mh = map_size
    sw, sh = source_size
    sx = min(int((mx + 0.5) * sw / mw), sw - 1)
    sy = min(int((my + 0.5) * sh / mh), sh - 1)
    return sx, sy


def source_to_map(sx: int, sy: int, map_size, source_size):
    mw, mh = map_size
    sw, sh = source_size
    mx = min(int(sx * mw / sw), mw - 1)
    my = min(int(sy * mh / sh), mh - 1)
    return mx, my


def select_foa(s: SaliencyMap, state: AttentionState, source_size,
               ior_radius: float = 16.0, ior_decay: float = 0.9) -> PointFoa:
    """Winner-take-all with inhibition of return.

    The argmax is taken over the saliency map attenuated by the current
    inhibition (ties go to the smallest row-major index); the reported
    score is the raw saliency value at the winner. Afterwards a unit
    Gaussian disk (sigma = ior_radius/2) is stamped at the winner and the
    whole IoR layer decays by ior_decay, so the next frame sees the fresh
    disk at ior_decay and older ones at higher powers; ior_decay 0 (or
    ior_radius 0) disables inhibition of return entirely.
    """
    sw, sh = source_size
    state._ensure_size(sw, sh)
    inhibition = state.inhibition_map(sw, sh)
    if inhibition.any():
        inhib_small = resize_bilinear_array(inhibition, s.width, s.height)
        effective = s.values * (1.0 - np.clip(inhib_small, 0.0, 1.0))
    else:
        effective = np.asarray(s.values, dtype=np.float64)
    flat_index = int(np.argmax(effective))
    my, mx = divmod(flat_index, s.width)
    score = float(s.values[my, mx])
    sx, sy = map_to_source(mx, my, (s.width, s.height), source_size)
    state.paint_ior(sx, sy, ior_radius)
    state.decay_ior(ior_decay)
    state.tick_regions()
    return PointFoa(Header(stamp_ns=s.header.stamp_ns, frame_id=s.header.frame_id),
                    sx, sy, min(max(score, 0.0), 1.0))


FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def extract_region(s: SaliencyMap, foa: PointFoa, source_size,
                   threshold: float = 0.7):
    """Threshold at threshold * saliency(FOA) and flood the 4-connected
    component containing the FOA pixel. Returns (RegionFoa in map
    coordinates, ObjectFoa scaled to source coordinates); both scores are
    the mean saliency over the region."""
    mx, my = source_to_map(foa.x, foa.y, (s.width, s.height), source_size)
    values = np.asarray(s.values, dtype=np.float64)
    mask = values >= threshold * values[my, mx]
    assert mask[my, mx], "FOA pixel always passes its own threshold"
    labels, _ = ndimage.label(mask, structure=FOUR_CONNECTED)
    region = labels == labels[my, mx]
    ys, xs = np.nonzero(region)
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    bbox = BoundingBox(x0, y0, x1 - x0, y1 - y0)
    score = float(values[region].mean())
    score = min(max(score, 0.0), 1.0)
    header = Header(stamp_ns=s.header.stamp_ns, frame_id=s.header.frame_id)
    region_foa = RegionFoa(header, bbox,
                           RegionFoa.pack_mask(region[y0:y1, x0:x1]), score)
    object_foa = ObjectFoa(header,
                           bbox_scale(bbox, (s.width, s.height), source_size), score)
    return region_foa, object_foa
