"""Spectral-residual saliency over a fixed 64x64 internal resolution.

The residual is the log amplitude spectrum minus its 3x3 box-filtered
version; recombining it with the original phase and inverse-transforming
gives the saliency energy, which is smoothed and rescaled to [0, 1].
Consumers upscale the 64x64 map via bbox_scale / resize as needed.

The log uses log(1 + A): synthetic images put exact zeros into the
amplitude spectrum, and a bare log(A + eps) turns those into deep
outliers that the box filter smears into grid-shaped ghosts. A constant
input has no spectral structure at all and maps to the all-zero map.
"""

from __future__ import annotations

import numpy as np

from ..errors import TooSmall
from ..imaging import convolve1d_replicate, gaussian_blur_array, resize_bilinear_array, to_grayscale_array
from ..messages import Header, ImageMsg, SaliencyMap
from .fourier import fft2d
from .itti import rescale01

INTERNAL_SIZE = 64
BLUR_SIGMA = 3.0

_BOX3 = np.array([1.0, 1.0, 1.0]) / 3.0


def box3x3_replicate(a: np.ndarray) -> np.ndarray:
    return convolve1d_replicate(convolve1d_replicate(a, _BOX3, 0), _BOX3, 1)


def spectral_residual(img: ImageMsg, transform=fft2d) -> SaliencyMap:
    """64x64 saliency map; `transform` is injectable for oracle testing."""
    if min(img.width, img.height) < 8:
        raise TooSmall(f"{img.width}x{img.height} is below 8 px")
    header = Header(stamp_ns=img.header.stamp_ns, frame_id=img.header.frame_id)
    gray = resize_bilinear_array(to_grayscale_array(img), INTERNAL_SIZE, INTERNAL_SIZE)
    if gray.max() - gray.min() <= 1e-9:
        return SaliencyMap(header, INTERNAL_SIZE, INTERNAL_SIZE,
                           np.zeros((INTERNAL_SIZE, INTERNAL_SIZE)))
    spectrum = transform(gray.astype(np.complex128), False)
    amplitude = np.abs(spectrum)
    phase = np.exp(1j * np.angle(spectrum))
    log_amp = np.log1p(amplitude)
    residual = log_amp - box3x3_replicate(log_amp)
    recomposed = transform(np.exp(residual) * phase, True)
    energy = np.abs(recomposed) ** 2
    smooth = gaussian_blur_array(energy, BLUR_SIGMA)
    return SaliencyMap(header, INTERNAL_SIZE, INTERNAL_SIZE, rescale01(smooth))
