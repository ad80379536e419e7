"""Binary PGM (P5) / PPM (P6) readers and writers, maxval 255 only."""

from __future__ import annotations

import numpy as np

from .errors import UnreadableFile


def _read_tokens(data: bytes, count: int):
    """Read whitespace-separated header tokens, skipping # comments.

    Returns (tokens, offset_of_first_raster_byte).
    """
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ValueError("truncated header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ValueError("missing separator after header")
    return tokens, i + 1


def read_pnm(path) -> np.ndarray:
    """Load a binary PGM/PPM file as uint8 (h, w) or (h, w, 3)."""
    try:
        data = open(path, "rb").read()
    except OSError as e:
        raise UnreadableFile(path, str(e)) from None
    try:
        tokens, off = _read_tokens(data, 4)
        magic = tokens[0]
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"unsupported magic {magic!r}")
        w, h, maxval = (int(t) for t in tokens[1:4])
        if maxval != 255:
            raise ValueError(f"only maxval 255 supported, got {maxval}")
        if w < 1 or h < 1:
            raise ValueError("bad dimensions")
        channels = 1 if magic == b"P5" else 3
        need = w * h * channels
        raster = data[off : off + need]
        if len(raster) != need:
            raise ValueError(f"raster has {len(raster)} bytes, expected {need}")
        a = np.frombuffer(raster, dtype=np.uint8)
        return a.reshape((h, w) if channels == 1 else (h, w, 3))
    except ValueError as e:
        raise UnreadableFile(path, str(e)) from None


def write_pnm(path, a: np.ndarray):
    a = np.ascontiguousarray(a, dtype=np.uint8)
    if a.ndim == 2:
        magic = b"P5"
        h, w = a.shape
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"P6"
        h, w = a.shape[:2]
    else:
        raise ValueError(f"unsupported array shape {a.shape}")
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(a.tobytes())
