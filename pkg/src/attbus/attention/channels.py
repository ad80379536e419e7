"""Per-pixel feature channels feeding the multi-scale saliency model.

Intensity is (r+g+b)/3. Color opponency uses broadly-tuned components
R = r-(g+b)/2, G = g-(r+b)/2, B = b-(r+g)/2, Y = (r+g)/2-|r-g|/2-b, each
rectified at 0, combined into rectified opponent maps RG = max(R-G, 0)
and BY = max(B-Y, 0). Orientation is Gabor energy (even/odd quadrature
pair) at 0/45/90/135 degrees. All channel values are finite and >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..messages import ImageMsg

ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)

GABOR_SIZE = 9
GABOR_WAVELENGTH = 7.0
GABOR_SIGMA = 0.56 * GABOR_WAVELENGTH


def gabor_kernel(theta_deg: float, phase_deg: float) -> np.ndarray:
    half = GABOR_SIZE // 2
    ys, xs = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    t = math.radians(theta_deg)
    xp = xs * math.cos(t) + ys * math.sin(t)
    yp = -xs * math.sin(t) + ys * math.cos(t)
    envelope = np.exp(-(xp**2 + yp**2) / (2.0 * GABOR_SIGMA**2))
    carrier = np.cos(2.0 * math.pi * xp / GABOR_WAVELENGTH + math.radians(phase_deg))
    k = envelope * carrier
    if phase_deg == 0.0:
        k -= k.mean()  # zero DC response so flat regions stay silent
    return k


_GABOR_BANK = {
    theta: (gabor_kernel(theta, 0.0), gabor_kernel(theta, 90.0))
    for theta in ORIENTATIONS
}


def gabor_energy(intensity: np.ndarray, theta_deg: float) -> np.ndarray:
    even_k, odd_k = _GABOR_BANK[theta_deg]
    even = ndimage.convolve(intensity, even_k, mode="nearest")
    odd = ndimage.convolve(intensity, odd_k, mode="nearest")
    return np.sqrt(even**2 + odd**2)


@dataclass
class FeatureChannels:
    intensity: np.ndarray
    rg: np.ndarray
    by: np.ndarray
    orientation: dict  # theta_deg -> energy map


def compute_channels(img: ImageMsg, with_orientation: bool = True) -> FeatureChannels:
    a = img.to_array().astype(np.float64) / 255.0
    if img.channels == 1:
        r = g = b = a
    else:
        r, g, b = a[:, :, 0], a[:, :, 1], a[:, :, 2]
    intensity = (r + g + b) / 3.0
    comp_r = np.maximum(r - (g + b) / 2.0, 0.0)
    comp_g = np.maximum(g - (r + b) / 2.0, 0.0)
    comp_b = np.maximum(b - (r + g) / 2.0, 0.0)
    comp_y = np.maximum((r + g) / 2.0 - np.abs(r - g) / 2.0 - b, 0.0)
    rg = np.maximum(comp_r - comp_g, 0.0)
    by = np.maximum(comp_b - comp_y, 0.0)
    orientation = {}
    if with_orientation:
        orientation = {t: gabor_energy(intensity, t) for t in ORIENTATIONS}
    return FeatureChannels(intensity, rg, by, orientation)
