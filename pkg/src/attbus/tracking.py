"""Template tracking by normalized cross-correlation, plus the hand-off
policy that turns attention output into tracker lifecycles.

The tracker keeps the initialization contract of single-frame,
no-training trackers: one bounding box in one frame is all it gets. The
bridge decides when a FOA is worth tracking (score and area gates), when
a track is lost (K consecutive low-confidence frames), and emits an
inhibition request over the lost region so attention moves on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadBox, WindowTooSmall
from .imaging import to_grayscale_array
from .messages import BoundingBox, ImageMsg, TrackPhase


def ncc_match(frame: np.ndarray, template: np.ndarray, window: BoundingBox):
    """Best placement of the zero-mean template inside the window.

    Returns ((x, y), score) with score in [-1, 1]; ties resolve to the
    smallest row-major placement. A zero-variance template or patch
    scores 0 (there is nothing to correlate against).
    """
    fh, fw = frame.shape
    if not window.inside(fw, fh):
        raise WindowTooSmall(f"window {window} outside {fw}x{fh} frame")
    th, tw = template.shape
    if th > window.h or tw > window.w:
        raise WindowTooSmall(f"{tw}x{th} template exceeds {window.w}x{window.h} window")
    t0 = template.astype(np.float64) - template.mean()
    tnorm = float(np.sqrt((t0 * t0).sum()))
    if tnorm == 0.0:
        return (window.x, window.y), 0.0
    region = frame[window.y : window.y + window.h,
                   window.x : window.x + window.w].astype(np.float64)
    patches = np.lib.stride_tricks.sliding_window_view(region, (th, tw))
    cross = np.einsum("ijkl,kl->ij", patches, t0)
    psum = np.einsum("ijkl->ij", patches)
    psq = np.einsum("ijkl,ijkl->ij", patches, patches)
    pvar = np.maximum(psq - psum * psum / (th * tw), 0.0)
    denom = np.sqrt(pvar) * tnorm
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, cross / denom, 0.0)
    scores = np.clip(scores, -1.0, 1.0)
    flat = int(np.argmax(scores))
    dy, dx = divmod(flat, scores.shape[1])
    return (window.x + dx, window.y + dy), float(scores[dy, dx])


@dataclass
class TrackerCore:
    template: np.ndarray
    bbox: BoundingBox
    confidence: float = 1.0
    margin: float = 0.5  # search margin as a fraction of max(bbox w, h)
    update_rate: float = 0.0

    @property
    def margin_px(self) -> int:
        return max(1, int(round(self.margin * max(self.bbox.w, self.bbox.h))))


def tracker_init(frame: ImageMsg, bbox: BoundingBox, margin: float = 0.5,
                 update_rate: float = 0.0) -> TrackerCore:
    bbox.validate()
    if not bbox.inside(frame.width, frame.height):
        raise BadBox(f"{bbox} outside {frame.width}x{frame.height} frame")
    gray = to_grayscale_array(frame)
    template = gray[bbox.y : bbox.y + bbox.h, bbox.x : bbox.x + bbox.w].copy()
    return TrackerCore(template, bbox, 1.0, margin, update_rate)


def tracker_step(core: TrackerCore, frame: ImageMsg):
    """Advance one frame; returns (phase, bbox, confidence)."""
    gray = to_grayscale_array(frame)
    fh, fw = gray.shape
    m = core.margin_px
    x0 = max(0, core.bbox.x - m)
    y0 = max(0, core.bbox.y - m)
    x1 = min(fw, core.bbox.x + core.bbox.w + m)
    y1 = min(fh, core.bbox.y + core.bbox.h + m)
    window = BoundingBox(x0, y0, x1 - x0, y1 - y0)
    (px, py), score = ncc_match(gray, core.template, window)
    core.bbox = BoundingBox(px, py, core.bbox.w, core.bbox.h)
    core.confidence = max(score, 0.0)
    if core.update_rate > 0:
        patch = gray[py : py + core.bbox.h, px : px + core.bbox.w]
        core.template = (1 - core.update_rate) * core.template + \
            core.update_rate * patch
    return TrackPhase.TRACKING, core.bbox, core.confidence


@dataclass
class BridgePolicy:
    theta_start: float = 0.6
    a_min: float = 0.001   # fraction of image area
    a_max: float = 0.25
    theta_conf: float = 0.5
    k: int = 5
    inhibit_frames: int = 30

    def __post_init__(self):
        if not (0 <= self.theta_start <= 1 and 0 <= self.theta_conf <= 1):
            raise ValueError("thresholds must lie in [0, 1]")
        if not self.a_min < self.a_max:
            raise ValueError("a_min must be < a_max")
        if self.k < 1 or self.inhibit_frames < 1:
            raise ValueError("k and inhibit_frames must be >= 1")


@dataclass
class BridgeFsm:
    """Idle: gate FOAs into tracker initializations. Tracking: watch
    confidence and declare Lost after k consecutive low frames."""

    policy: BridgePolicy = field(default_factory=BridgePolicy)
    tracking: bool = False
    low_count: int = 0
    last_bbox: BoundingBox | None = None
    last_good_bbox: BoundingBox | None = None  # low-confidence boxes drift

    def on_object_foa(self, image_size, foa) -> BoundingBox | None:
        """Returns the bbox to initialize the tracker with, or None."""
        if self.tracking:
            return None
        w, h = image_size
        area = foa.bbox.area
        if foa.score < self.policy.theta_start:
            return None
        if not self.policy.a_min * w * h <= area <= self.policy.a_max * w * h:
            return None
        if not foa.bbox.inside(w, h):
            return None
        self.tracking = True
        self.low_count = 0
        self.last_bbox = foa.bbox
        self.last_good_bbox = foa.bbox
        return foa.bbox

    def on_track_state(self, state: TrackPhase, bbox: BoundingBox,
                       confidence: float) -> BoundingBox | None:
        """Returns the bbox to inhibit when the track is declared lost.

        The inhibited region is the box from the last confident frame —
        once the match degrades, the reported box wanders and no longer
        marks where the object disappeared."""
        if not self.tracking or state != TrackPhase.TRACKING:
            return None
        self.last_bbox = bbox
        if confidence < self.policy.theta_conf:
            self.low_count += 1
            if self.low_count >= self.policy.k:
                self.tracking = False
                self.low_count = 0
                return self.last_good_bbox or self.last_bbox
        else:
            self.low_count = 0
            self.last_good_bbox = bbox
        return None
