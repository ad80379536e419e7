"""Multi-scale center-surround saliency with intensity, color opponency,
orientation energy and frame-difference motion channels.

Per channel, every center-surround map is normalized with the
peak-competition operator and summed at the output level; the four
conspicuity maps are normalized again, combined under the current
top-down gains, rescaled to [0, 1], and finally attenuated by the
inhibition map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TooSmall
from ..imaging import resize_bilinear_array
from ..messages import Header, ImageMsg, SaliencyMap
from .channels import ORIENTATIONS, compute_channels
from .foa import CHANNEL_ORDER, AttentionState
from .pyramid import build_pyramid, center_surround, depth_limit, scale_pairs

MIN_SHORT_SIDE = 16


@dataclass
class IttiConfig:
    centers: tuple = (2, 3, 4)
    deltas: tuple = (3, 4)
    depth: int = 8
    out_level: int = 2
    channels: tuple = CHANNEL_ORDER


def rescale01(m: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; (numerically) constant maps become all-zero
    rather than amplifying float residue to full scale."""
    mn = float(m.min())
    mx = float(m.max())
    if mx - mn <= 1e-12 * max(1.0, abs(mx), abs(mn)):
        return np.zeros_like(m, dtype=np.float64)
    return (m - mn) / (mx - mn)


def local_maxima(m: np.ndarray) -> np.ndarray:
    """Interior pixels strictly greater than all 8 neighbours (bool map)."""
    out = np.zeros(m.shape, dtype=bool)
    if m.shape[0] < 3 or m.shape[1] < 3:
        return out
    c = m[1:-1, 1:-1]
    mask = np.ones(c.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            mask &= c > m[1 + dy : m.shape[0] - 1 + dy, 1 + dx : m.shape[1] - 1 + dx]
    out[1:-1, 1:-1] = mask
    return out


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Peak-competition normalization: rescale to [0, 1], then weight the
    whole map by (1 - mean-of-other-local-maxima)^2, so maps with a single
    strong peak survive and maps with many similar peaks are suppressed."""
    m = rescale01(m)
    if not m.any():
        return m
    peaks = m[local_maxima(m)]
    vals = sorted(peaks.tolist(), reverse=True)
    if vals and vals[0] == 1.0:
        vals = vals[1:]  # one instance of the global max competes as M
    mbar = float(np.mean(vals)) if vals else 0.0
    return m * (1.0 - mbar) ** 2


def itti_saliency(img: ImageMsg, state: AttentionState,
                  cfg: IttiConfig = IttiConfig()) -> SaliencyMap:
    if min(img.width, img.height) < MIN_SHORT_SIDE:
        raise TooSmall(f"{img.width}x{img.height} is below {MIN_SHORT_SIDE} px")
    state._ensure_size(img.width, img.height)
    limit = min(cfg.depth, depth_limit(img.width, img.height))
    pairs = scale_pairs(cfg.centers, cfg.deltas, limit)
    out_level = min(cfg.out_level, limit)

    feats = compute_channels(img, with_orientation="orientation" in cfg.channels)
    intensity_pyr = build_pyramid(feats.intensity, limit)
    out_h, out_w = intensity_pyr[out_level].shape

    def across_scale_sum(pyr) -> np.ndarray:
        total = np.zeros((out_h, out_w), dtype=np.float64)
        for c, s in pairs:
            normalized = normalize_map(center_surround(pyr, c, s))
            total += resize_bilinear_array(normalized, out_w, out_h)
        return total

    conspicuity = {}
    if "intensity" in cfg.channels:
        conspicuity["intensity"] = across_scale_sum(intensity_pyr)
    if "color" in cfg.channels:
        conspicuity["color"] = across_scale_sum(build_pyramid(feats.rg, limit)) + \
            across_scale_sum(build_pyramid(feats.by, limit))
    if "orientation" in cfg.channels:
        total = np.zeros((out_h, out_w), dtype=np.float64)
        for theta in ORIENTATIONS:
            total += across_scale_sum(build_pyramid(feats.orientation[theta], limit))
        conspicuity["orientation"] = total
    if "motion" in cfg.channels:
        motion = np.zeros((out_h, out_w), dtype=np.float64)
        if state.prev_pyramid is not None and \
                state.prev_pyramid[0].shape == intensity_pyr[0].shape:
            diff_pyr = [np.abs(cur - prev)
                        for cur, prev in zip(intensity_pyr, state.prev_pyramid)]
            motion = across_scale_sum(diff_pyr)
        conspicuity["motion"] = motion

    gain_total = sum(state.gains.get(name, 1.0) for name in conspicuity)
    combined = np.zeros((out_h, out_w), dtype=np.float64)
    if gain_total > 0:
        for name, cons in conspicuity.items():
            combined += state.gains.get(name, 1.0) * normalize_map(cons)
        combined /= gain_total
    combined = rescale01(combined)

    inhibition = state.inhibition_map(img.width, img.height)
    if inhibition.any():
        small = np.clip(resize_bilinear_array(inhibition, out_w, out_h), 0.0, 1.0)
        combined = combined * (1.0 - small)

    state.prev_pyramid = intensity_pyr
    state.tick_regions()
    header = Header(stamp_ns=img.header.stamp_ns, frame_id=img.header.frame_id)
    return SaliencyMap(header, out_w, out_h, np.clip(combined, 0.0, 1.0))
