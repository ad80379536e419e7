"""Gaussian pyramids and across-scale (center-surround) differences."""

from __future__ import annotations

import math

import numpy as np

from ..errors import BadScales
from ..imaging import gaussian_blur_array, resize_bilinear_array


def depth_limit(width: int, height: int) -> int:
    """Deepest usable level: floor(log2(min dim)) - 2, never negative."""
    return max(0, math.floor(math.log2(min(width, height))) - 2)


def build_pyramid(base: np.ndarray, depth: int) -> list:
    """Levels 0..L where each level is the previous one blurred (sigma 1)
    and decimated 2x; L = min(depth, depth_limit)."""
    h, w = base.shape
    levels = [base.astype(np.float64)]
    for _ in range(min(depth, depth_limit(w, h))):
        levels.append(gaussian_blur_array(levels[-1], 1.0)[::2, ::2])
    return levels


def center_surround(pyramid: list, c: int, s: int) -> np.ndarray:
    """|level c - upsampled level s|, evaluated at level-c resolution."""
    if not 0 <= c < s <= len(pyramid) - 1:
        raise BadScales(f"need 0 <= c < s <= {len(pyramid) - 1}, got c={c} s={s}")
    fine = pyramid[c]
    coarse = resize_bilinear_array(pyramid[s], fine.shape[1], fine.shape[0])
    return np.abs(fine - coarse)


def scale_pairs(centers, deltas, limit: int) -> list:
    """(center, surround) pairs clamped into the pyramid, deduplicated."""
    pairs = []
    for c in centers:
        for d in deltas:
            cc = min(c, limit - 1)
            ss = min(c + d, limit)
            if 0 <= cc < ss and (cc, ss) not in pairs:
                pairs.append((cc, ss))
    return pairs
