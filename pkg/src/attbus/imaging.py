"""Gaussian smoothing and bilinear resizing.

Both operate on float64 maps internally; the ImageMsg wrappers round to
the nearest integer and stay in [0, 255]. Borders are always handled by
edge replication, and resampling uses half-pixel centers (source
coordinate = (i + 0.5) * scale - 0.5, clamped).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BadSigma
from .messages import ImageMsg


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1D kernel with radius ceil(3*sigma), normalized to sum 1."""
    r = math.ceil(3.0 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def convolve1d_replicate(a: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    r = len(weights) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    p = np.pad(a, pad, mode="edge")
    out = np.zeros(a.shape, dtype=np.float64)
    sl = [slice(None)] * a.ndim
    for j, w in enumerate(weights):
        sl[axis] = slice(j, j + a.shape[axis])
        out += w * p[tuple(sl)]
    return out


def gaussian_blur_array(a: np.ndarray, sigma: float) -> np.ndarray:
    """Separable edge-replicated Gaussian on a 2D float map."""
    k = gaussian_kernel(sigma)
    return convolve1d_replicate(convolve1d_replicate(a.astype(np.float64), k, 0), k, 1)


def _round_u8(a: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)


def gaussian_blur(img: ImageMsg, sigma: float) -> ImageMsg:
    if not (sigma > 0) or sigma > min(img.width, img.height) / 4:
        raise BadSigma(f"sigma {sigma} not in (0, min(w,h)/4] for {img.width}x{img.height}")
    a = img.to_array()
    if img.channels == 1:
        out = _round_u8(gaussian_blur_array(a, sigma))
    else:
        out = np.stack(
            [_round_u8(gaussian_blur_array(a[:, :, c], sigma)) for c in range(3)], axis=2
        )
    return ImageMsg.from_array(out, img.header)


def resize_bilinear_array(a: np.ndarray, to_w: int, to_h: int) -> np.ndarray:
    """Bilinear resample of a 2D float map with half-pixel centers."""
    h, w = a.shape
    a = a.astype(np.float64)
    if (to_w, to_h) == (w, h):
        return a.copy()
    xs = np.clip((np.arange(to_w) + 0.5) * (w / to_w) - 0.5, 0, w - 1)
    ys = np.clip((np.arange(to_h) + 0.5) * (h / to_h) - 0.5, 0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]
    top = a[np.ix_(y0, x0)] * (1 - fx) + a[np.ix_(y0, x1)] * fx
    bot = a[np.ix_(y1, x0)] * (1 - fx) + a[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: ImageMsg, to_w: int, to_h: int) -> ImageMsg:
    if to_w < 1 or to_h < 1:
        raise ValueError("target size must be >= 1x1")
    a = img.to_array()
    if img.channels == 1:
        out = _round_u8(resize_bilinear_array(a, to_w, to_h))
    else:
        out = np.stack(
            [_round_u8(resize_bilinear_array(a[:, :, c], to_w, to_h)) for c in range(3)],
            axis=2,
        )
    return ImageMsg.from_array(out, img.header)


def to_grayscale_array(img: ImageMsg) -> np.ndarray:
    """Float64 intensity map: (r+g+b)/3 for RGB, identity for grayscale."""
    a = img.to_array().astype(np.float64)
    if img.channels == 1:
        return a
    return a.mean(axis=2)
