"""Radix-2 FFT over 2D maps (row-column decomposition).

Forward transform: X[k] = sum_j x[j] * exp(-2*pi*i*j*k/n) per axis; the
inverse divides by w*h once at the end so forward∘inverse is identity.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonPowerOfTwo


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_last_axis(a: np.ndarray, inverse: bool) -> np.ndarray:
    n = a.shape[-1]
    if n == 1:
        return a.copy()
    out = a[..., _bit_reverse_indices(n)]
    sign = 1.0 if inverse else -1.0
    m = 1
    while m < n:
        tw = np.exp(sign * 1j * np.pi * np.arange(m) / m)
        blocks = out.reshape(out.shape[:-1] + (n // (2 * m), 2 * m))
        even = blocks[..., :m]
        odd = blocks[..., m:] * tw
        out = np.concatenate([even + odd, even - odd], axis=-1)
        out = out.reshape(a.shape)
        m *= 2
    return out


def fft2d(data: np.ndarray, inverse: bool = False) -> np.ndarray:
    """2D DFT of a complex map whose dimensions are powers of two."""
    a = np.asarray(data, dtype=np.complex128)
    if a.ndim != 2:
        raise NonPowerOfTwo(f"expected a 2D map, got shape {a.shape}")
    h, w = a.shape
    if not (_is_pow2(h) and _is_pow2(w)):
        raise NonPowerOfTwo(f"dims {w}x{h} are not powers of two")
    a = _fft_last_axis(a, inverse)
    a = _fft_last_axis(a.T, inverse).T
    if inverse:
        a = a / (w * h)
    return a
