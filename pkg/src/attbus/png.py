"""Minimal PNG encoder (8-bit grayscale / RGB, no filtering).

Only the gateway uses PNG; the bus stays raw. Deterministic output:
fixed zlib level, filter byte 0 on every scanline.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .messages import ImageMsg, SaliencyMap

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, data: bytes) -> bytes:
    return (struct.pack(">I", len(data)) + tag + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))


def encode_png(msg) -> bytes:
    """ImageMsg or SaliencyMap to PNG bytes; saliency maps linearly to
    8-bit gray (0.0 -> 0, 1.0 -> 255)."""
    if isinstance(msg, SaliencyMap):
        arr = np.clip(np.floor(msg.values * 255.0 + 0.5), 0, 255).astype(np.uint8)
    elif isinstance(msg, ImageMsg):
        arr = msg.to_array()
    else:
        raise TypeError(f"cannot encode {type(msg).__name__} as PNG")
    h, w = arr.shape[:2]
    color_type = 2 if arr.ndim == 3 else 0
    raw = bytearray()
    for row in arr.reshape(h, -1):
        raw.append(0)  # filter: None
        raw.extend(row.tobytes())
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    return (PNG_SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(bytes(raw), 6))
            + _chunk(b"IEND", b""))
