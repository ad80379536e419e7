import numpy as np
import pytest

from attbus.attention import fft2d
from attbus.errors import NonPowerOfTwo

from _oracles import naive_dft2


def test_all_ones_concentrates_in_dc():
    out = fft2d(np.ones((4, 4)))
    assert out[0, 0] == pytest.approx(16.0, abs=1e-9)
    rest = out.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-9


def test_impulse_is_flat():
    a = np.zeros((8, 8))
    a[0, 0] = 1.0
    out = fft2d(a)
    assert np.max(np.abs(out - 1.0)) < 1e-12


@pytest.mark.parametrize("shape", [(8, 8), (16, 16), (4, 16), (32, 8)])
def test_matches_naive_dft(shape):
    rng = np.random.default_rng(hash(shape) % 2**31)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    assert np.max(np.abs(fft2d(a) - naive_dft2(a))) < 1e-9
    assert np.max(np.abs(fft2d(a, inverse=True) - naive_dft2(a, inverse=True))) < 1e-9


def test_forward_inverse_identity():
    rng = np.random.default_rng(12)
    a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    back = fft2d(fft2d(a), inverse=True)
    assert np.max(np.abs(back - a)) / np.max(np.abs(a)) < 1e-6


def test_parseval():
    rng = np.random.default_rng(13)
    a = rng.normal(size=(16, 16))
    spectrum = fft2d(a)
    space = np.sum(np.abs(a) ** 2)
    freq = np.sum(np.abs(spectrum) ** 2) / a.size
    assert abs(space - freq) / space < 1e-6


def test_non_power_of_two_rejected():
    with pytest.raises(NonPowerOfTwo):
        fft2d(np.zeros((6, 8)))
    with pytest.raises(NonPowerOfTwo):
        fft2d(np.zeros((8,)))
