import io

import numpy as np
import pytest
from PIL import Image

from attbus.messages import Header, ImageMsg, SaliencyMap
from attbus.png import encode_png


def decode(data):
    # Pillow is the independent decoder; the encoder is hand-rolled
    return np.asarray(Image.open(io.BytesIO(data)))


def test_single_black_pixel():
    png = encode_png(ImageMsg(Header(), 1, 1, 1, b"\x00"))
    out = decode(png)
    assert out.shape == (1, 1)
    assert out[0, 0] == 0


def test_random_rgb_round_trip():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 256, (23, 17, 3), dtype=np.uint8)
    out = decode(encode_png(ImageMsg.from_array(a)))
    assert np.array_equal(out, a)


def test_random_gray_round_trip():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 256, (9, 31), dtype=np.uint8)
    assert np.array_equal(decode(encode_png(ImageMsg.from_array(a))), a)


def test_saliency_full_scale():
    sal = SaliencyMap(Header(), 4, 3, np.ones((3, 4), dtype=np.float32))
    out = decode(encode_png(sal))
    assert out.shape == (3, 4)
    assert (out == 255).all()


def test_saliency_linear_mapping():
    sal = SaliencyMap(Header(), 2, 1, np.array([[0.0, 0.5]], dtype=np.float32))
    out = decode(encode_png(sal))
    assert out[0, 0] == 0
    assert abs(int(out[0, 1]) - 128) <= 1


def test_deterministic_bytes():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 256, (8, 8), dtype=np.uint8)
    img = ImageMsg.from_array(a)
    assert encode_png(img) == encode_png(img)


def test_rejects_other_types():
    with pytest.raises(TypeError):
        encode_png(b"raw")
