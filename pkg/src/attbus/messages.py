"""Message types exchanged on the bus and their binary wire codec.

Every multi-byte field is little-endian; floats are IEEE-754 binary32 /
binary64. A wire frame is

    [len u32] [topic_len u16][topic] [type_id u16]
    [seq u32][stamp_ns u64][frame_id_len u16][frame_id] [body]

where ``len`` counts every byte after itself. The same layout is used on
TCP connections and inside bag files, so serialization must stay
bit-exact and deterministic.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import (
    BodyLengthMismatch,
    InvariantViolation,
    OversizedMessage,
    Truncated,
    UnknownTypeId,
)

MAX_FRAME_LEN = 0xFFFFFFFF
MAX_SHORT_STR = 0xFFFF

# Data type ids
IMAGE = 1
SALIENCY = 2
POINT_FOA = 3
REGION_FOA = 4
OBJECT_FOA = 5
TRACK_STATE = 6
PARAM_UPDATE = 7
TOPDOWN_GAIN = 8
INHIBIT_REGION = 9
# Control type ids (empty body; header.seq carries the payload type id)
ADVERTISE = 100
SUBSCRIBE = 101

CONTROL_IDS = (ADVERTISE, SUBSCRIBE)


@dataclass(frozen=True)
class Header:
    seq: int = 0
    stamp_ns: int = 0
    frame_id: str = ""

    def validate(self):
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise InvariantViolation(f"seq {self.seq} out of u32 range")
        if not 0 <= self.stamp_ns <= 0xFFFFFFFFFFFFFFFF:
            raise InvariantViolation(f"stamp_ns {self.stamp_ns} out of u64 range")
        if len(self.frame_id.encode("utf-8")) > MAX_SHORT_STR:
            raise InvariantViolation("frame_id longer than 65535 bytes")


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def validate(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFFFFFFFF:
                raise InvariantViolation(f"bbox {name}={v} out of u32 range")
        if self.w < 1 or self.h < 1:
            raise InvariantViolation("bbox must be at least 1x1")

    def inside(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class ImageMsg:
    header: Header
    width: int
    height: int
    channels: int
    pixels: bytes

    def validate(self):
        self.header.validate()
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("image dims must be >= 1")
        if self.width > 0xFFFFFFFF or self.height > 0xFFFFFFFF:
            raise InvariantViolation("image dims out of u32 range")
        if self.channels not in (1, 3):
            raise InvariantViolation(f"channels must be 1 or 3, got {self.channels}")
        expect = self.width * self.height * self.channels
        if len(self.pixels) != expect:
            raise InvariantViolation(
                f"pixel buffer is {len(self.pixels)} bytes, expected {expect}"
            )

    def to_array(self) -> np.ndarray:
        """Row-major view: (h, w) for grayscale, (h, w, 3) for RGB."""
        a = np.frombuffer(self.pixels, dtype=np.uint8)
        if self.channels == 1:
            return a.reshape(self.height, self.width)
        return a.reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, a: np.ndarray, header: Header = Header()) -> "ImageMsg":
        a = np.ascontiguousarray(a, dtype=np.uint8)
        if a.ndim == 2:
            h, w, c = a.shape[0], a.shape[1], 1
        elif a.ndim == 3 and a.shape[2] == 3:
            h, w, c = a.shape
        else:
            raise InvariantViolation(f"unsupported array shape {a.shape}")
        return cls(header, w, h, c, a.tobytes())


@dataclass(eq=False)
class SaliencyMap:
    header: Header
    width: int
    height: int
    values: np.ndarray  # float32, shape (height, width), in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32).reshape(self.height, self.width)
        v.setflags(write=False)
        self.values = v

    def validate(self):
        self.header.validate()
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("saliency dims must be >= 1")
        if self.values.shape != (self.height, self.width):
            raise InvariantViolation("saliency value count != width*height")
        if not np.all(np.isfinite(self.values)):
            raise InvariantViolation("saliency values must be finite")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise InvariantViolation("saliency values must lie in [0, 1]")

    def __eq__(self, other):
        return (
            isinstance(other, SaliencyMap)
            and self.header == other.header
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.values, other.values)
        )


def _f32(x: float) -> float:
    """Quantize to binary32 so wire round-trips are exact."""
    return float(np.float32(x))


@dataclass(frozen=True)
class PointFoa:
    header: Header
    x: int
    y: int
    score: float

    def __post_init__(self):
        object.__setattr__(self, "score", _f32(self.score))

    def validate(self):
        self.header.validate()
        if not 0 <= self.x <= 0xFFFFFFFF or not 0 <= self.y <= 0xFFFFFFFF:
            raise InvariantViolation("FOA coordinates out of u32 range")
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise InvariantViolation(f"FOA score {self.score} outside [0, 1]")


def mask_row_bytes(w: int) -> int:
    return (w + 7) // 8


@dataclass(frozen=True)
class RegionFoa:
    header: Header
    bbox: BoundingBox
    mask: bytes  # bit-packed rows, MSB first, each row padded to a byte
    score: float

    def __post_init__(self):
        object.__setattr__(self, "score", _f32(self.score))

    def validate(self):
        self.header.validate()
        self.bbox.validate()
        if not math.isfinite(self.score):
            raise InvariantViolation("region score must be finite")
        expect = self.bbox.h * mask_row_bytes(self.bbox.w)
        if len(self.mask) != expect:
            raise InvariantViolation(
                f"mask is {len(self.mask)} bytes, expected {expect}"
            )
        bits = self.to_mask_array()
        if not bits.any():
            raise InvariantViolation("region mask has no set bits")
        # Padding bits beyond bbox width must stay clear.
        rows = np.unpackbits(
            np.frombuffer(self.mask, dtype=np.uint8).reshape(self.bbox.h, -1), axis=1
        )
        if rows[:, self.bbox.w:].any():
            raise InvariantViolation("mask has set bits outside the bbox extent")

    def to_mask_array(self) -> np.ndarray:
        rows = np.unpackbits(
            np.frombuffer(self.mask, dtype=np.uint8).reshape(self.bbox.h, -1), axis=1
        )
        return rows[:, : self.bbox.w].astype(bool)

    @staticmethod
    def pack_mask(bits: np.ndarray) -> bytes:
        return np.packbits(bits.astype(np.uint8), axis=1).tobytes()


@dataclass(frozen=True)
class ObjectFoa:
    header: Header
    bbox: BoundingBox
    score: float

    def __post_init__(self):
        object.__setattr__(self, "score", _f32(self.score))

    def validate(self):
        self.header.validate()
        self.bbox.validate()
        if not math.isfinite(self.score):
            raise InvariantViolation("object score must be finite")


class TrackPhase(IntEnum):
    IDLE = 0
    TRACKING = 1
    LOST = 2


@dataclass(frozen=True)
class TrackState:
    header: Header
    state: TrackPhase
    bbox: BoundingBox
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "confidence", _f32(self.confidence))

    def validate(self):
        self.header.validate()
        if self.state not in (TrackPhase.IDLE, TrackPhase.TRACKING, TrackPhase.LOST):
            raise InvariantViolation(f"unknown track state {self.state}")
        self.bbox.validate()
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation("confidence must lie in [0, 1]")
        if self.state == TrackPhase.IDLE and self.confidence != 0.0:
            raise InvariantViolation("idle tracker must report confidence 0")


@dataclass(frozen=True)
class TopDownGain:
    header: Header
    gains: tuple  # (intensity, color, orientation, motion)

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(_f32(g) for g in self.gains))

    def validate(self):
        self.header.validate()
        if len(self.gains) != 4:
            raise InvariantViolation("expected four channel gains")
        for g in self.gains:
            if not math.isfinite(g) or g < 0:
                raise InvariantViolation(f"gain {g} must be finite and >= 0")


@dataclass(frozen=True)
class InhibitRegion:
    header: Header
    bbox: BoundingBox
    decay_frames: int

    def validate(self):
        self.header.validate()
        self.bbox.validate()
        if not 1 <= self.decay_frames <= 0xFFFFFFFF:
            raise InvariantViolation("decay_frames must be >= 1")


@dataclass(frozen=True)
class ParamUpdate:
    header: Header
    node: str
    param: str
    value: object  # float | int | bool | str

    def validate(self):
        self.header.validate()
        if not self.node or not self.param:
            raise InvariantViolation("node and param must be non-empty")
        if len(self.node.encode("utf-8")) > MAX_SHORT_STR:
            raise InvariantViolation("node name too long")
        if len(self.param.encode("utf-8")) > MAX_SHORT_STR:
            raise InvariantViolation("param name too long")
        if isinstance(self.value, bool):
            return
        if isinstance(self.value, int):
            if not -(2**63) <= self.value < 2**63:
                raise InvariantViolation("int value out of i64 range")
        elif isinstance(self.value, float):
            pass
        elif isinstance(self.value, str):
            if len(self.value.encode("utf-8")) > MAX_SHORT_STR:
                raise InvariantViolation("string value too long")
        else:
            raise InvariantViolation(f"unsupported param value {type(self.value)}")


TYPE_ID_OF = {
    ImageMsg: IMAGE,
    SaliencyMap: SALIENCY,
    PointFoa: POINT_FOA,
    RegionFoa: REGION_FOA,
    ObjectFoa: OBJECT_FOA,
    TrackState: TRACK_STATE,
    ParamUpdate: PARAM_UPDATE,
    TopDownGain: TOPDOWN_GAIN,
    InhibitRegion: INHIBIT_REGION,
}

TYPE_NAMES = {
    IMAGE: "ImageMsg",
    SALIENCY: "SaliencyMap",
    POINT_FOA: "PointFoa",
    REGION_FOA: "RegionFoa",
    OBJECT_FOA: "ObjectFoa",
    TRACK_STATE: "TrackState",
    PARAM_UPDATE: "ParamUpdate",
    TOPDOWN_GAIN: "TopDownGain",
    INHIBIT_REGION: "InhibitRegion",
    ADVERTISE: "ADVERTISE",
    SUBSCRIBE: "SUBSCRIBE",
}


def type_id_for(msg) -> int:
    try:
        return TYPE_ID_OF[type(msg)]
    except KeyError:
        raise InvariantViolation(f"not a bus message: {type(msg)!r}")


# --- body encoders ---


def _enc_str16(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > MAX_SHORT_STR:
        raise InvariantViolation("string longer than 65535 bytes")
    return struct.pack("<H", len(raw)) + raw


def _enc_bbox(b: BoundingBox) -> bytes:
    return struct.pack("<IIII", b.x, b.y, b.w, b.h)


def _encode_body(type_id: int, msg) -> bytes:
    if type_id == IMAGE:
        return struct.pack("<IIB", msg.width, msg.height, msg.channels) + msg.pixels
    if type_id == SALIENCY:
        return (
            struct.pack("<II", msg.width, msg.height)
            + np.ascontiguousarray(msg.values, dtype="<f4").tobytes()
        )
    if type_id == POINT_FOA:
        return struct.pack("<IIf", msg.x, msg.y, msg.score)
    if type_id == OBJECT_FOA:
        return _enc_bbox(msg.bbox) + struct.pack("<f", msg.score)
    if type_id == REGION_FOA:
        return _enc_bbox(msg.bbox) + struct.pack("<f", msg.score) + msg.mask
    if type_id == TRACK_STATE:
        return (
            struct.pack("<B", int(msg.state))
            + _enc_bbox(msg.bbox)
            + struct.pack("<f", msg.confidence)
        )
    if type_id == PARAM_UPDATE:
        head = _enc_str16(msg.node) + _enc_str16(msg.param)
        v = msg.value
        if isinstance(v, bool):
            return head + struct.pack("<BB", 2, 1 if v else 0)
        if isinstance(v, int):
            return head + struct.pack("<Bq", 1, v)
        if isinstance(v, float):
            return head + struct.pack("<Bd", 0, v)
        return head + struct.pack("<B", 3) + _enc_str16(v)
    if type_id == TOPDOWN_GAIN:
        return struct.pack("<4f", *msg.gains)
    if type_id == INHIBIT_REGION:
        return _enc_bbox(msg.bbox) + struct.pack("<I", msg.decay_frames)
    if type_id in CONTROL_IDS:
        return b""
    raise UnknownTypeId(f"type id {type_id}")


def serialize_frame(topic: str, type_id: int, msg) -> bytes:
    """Serialize one message into a complete wire frame (length prefix included)."""
    if not topic:
        raise InvariantViolation("topic must be non-empty")
    topic_raw = topic.encode("utf-8")
    if len(topic_raw) > MAX_SHORT_STR:
        raise InvariantViolation("topic longer than 65535 bytes")
    if type_id in CONTROL_IDS:
        if not isinstance(msg, Header):
            raise InvariantViolation("control frames carry a bare Header")
        header = msg
        header.validate()
    else:
        if type_id != type_id_for(msg):
            raise InvariantViolation(
                f"type id {type_id} does not match {type(msg).__name__}"
            )
        msg.validate()
        header = msg.header
    body = _encode_body(type_id, msg)
    frame_id_raw = header.frame_id.encode("utf-8")
    payload = (
        struct.pack("<H", len(topic_raw))
        + topic_raw
        + struct.pack("<H", type_id)
        + struct.pack("<IQ", header.seq, header.stamp_ns)
        + struct.pack("<H", len(frame_id_raw))
        + frame_id_raw
        + body
    )
    if len(payload) > MAX_FRAME_LEN:
        raise OversizedMessage(f"frame payload is {len(payload)} bytes")
    return struct.pack("<I", len(payload)) + payload


class _Cursor:
    """Bounds-checked reader over a byte string."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise Truncated(f"need {n} bytes at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def str16(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise InvariantViolation(f"invalid UTF-8: {e}") from None

    def remaining(self) -> int:
        return len(self.data) - self.pos


def _dec_bbox(c: _Cursor) -> BoundingBox:
    return BoundingBox(c.u32(), c.u32(), c.u32(), c.u32())


def _decode_body(type_id: int, header: Header, c: _Cursor):
    if type_id == IMAGE:
        w, h = c.u32(), c.u32()
        ch = c.u8()
        if ch not in (1, 3):
            raise InvariantViolation(f"channels must be 1 or 3, got {ch}")
        expect = w * h * ch
        if c.remaining() != expect:
            raise BodyLengthMismatch(
                f"image body has {c.remaining()} pixel bytes, expected {expect}"
            )
        return ImageMsg(header, w, h, ch, c.take(expect))
    if type_id == SALIENCY:
        w, h = c.u32(), c.u32()
        expect = w * h * 4
        if c.remaining() != expect:
            raise BodyLengthMismatch(
                f"saliency body has {c.remaining()} bytes, expected {expect}"
            )
        values = np.frombuffer(c.take(expect), dtype="<f4")
        if w < 1 or h < 1:
            raise InvariantViolation("saliency dims must be >= 1")
        return SaliencyMap(header, w, h, values.reshape(h, w))
    if type_id == POINT_FOA:
        return PointFoa(header, c.u32(), c.u32(), c.f32())
    if type_id == OBJECT_FOA:
        return ObjectFoa(header, _dec_bbox(c), c.f32())
    if type_id == REGION_FOA:
        bbox = _dec_bbox(c)
        score = c.f32()
        if bbox.w < 1 or bbox.h < 1:
            raise InvariantViolation("bbox must be at least 1x1")
        expect = bbox.h * mask_row_bytes(bbox.w)
        if c.remaining() != expect:
            raise BodyLengthMismatch(
                f"mask has {c.remaining()} bytes, expected {expect}"
            )
        return RegionFoa(header, bbox, c.take(expect), score)
    if type_id == TRACK_STATE:
        raw_state = c.u8()
        if raw_state not in (0, 1, 2):
            raise InvariantViolation(f"unknown track state {raw_state}")
        return TrackState(header, TrackPhase(raw_state), _dec_bbox(c), c.f32())
    if type_id == PARAM_UPDATE:
        node = c.str16()
        param = c.str16()
        tag = c.u8()
        if tag == 0:
            value = c.f64()
        elif tag == 1:
            value = c.i64()
        elif tag == 2:
            b = c.u8()
            if b not in (0, 1):
                raise InvariantViolation(f"bool byte must be 0 or 1, got {b}")
            value = bool(b)
        elif tag == 3:
            value = c.str16()
        else:
            raise InvariantViolation(f"unknown param value tag {tag}")
        return ParamUpdate(header, node, param, value)
    if type_id == TOPDOWN_GAIN:
        return TopDownGain(header, tuple(c.f32() for _ in range(4)))
    if type_id == INHIBIT_REGION:
        return InhibitRegion(header, _dec_bbox(c), c.u32())
    raise UnknownTypeId(f"type id {type_id}")


def deserialize_frame(data: bytes):
    """Parse a complete wire frame. Returns (topic, type_id, message).

    For control frames the returned message is the bare Header. Raises a
    typed error for anything that is not the exact output of
    serialize_frame.
    """
    outer = _Cursor(data)
    length = outer.u32()
    if outer.remaining() < length:
        raise Truncated(f"frame declares {length} bytes, {outer.remaining()} present")
    if outer.remaining() > length:
        raise BodyLengthMismatch(
            f"frame declares {length} bytes, {outer.remaining()} present"
        )
    c = _Cursor(data, outer.pos)
    topic = c.str16()
    if not topic:
        raise InvariantViolation("topic must be non-empty")
    type_id = c.u16()
    if type_id not in TYPE_NAMES:
        raise UnknownTypeId(f"type id {type_id}")
    header = Header(seq=c.u32(), stamp_ns=c.u64(), frame_id=c.str16())
    if type_id in CONTROL_IDS:
        if c.remaining() != 0:
            raise BodyLengthMismatch("control frames carry no body")
        return topic, type_id, header
    msg = _decode_body(type_id, header, c)
    if c.remaining() != 0:
        raise BodyLengthMismatch(f"{c.remaining()} trailing bytes after body")
    msg.validate()
    return topic, type_id, msg


def read_frame_from(read):
    """Read one length-prefixed frame via a read(n)->bytes callable.

    Returns the complete frame bytes or None on clean EOF at a frame
    boundary. Raises Truncated on EOF mid-frame.
    """
    head = read(4)
    if not head:
        return None
    if len(head) < 4:
        raise Truncated("EOF inside length prefix")
    (length,) = struct.unpack("<I", head)
    body = read(length)
    if len(body) < length:
        raise Truncated("EOF inside frame body")
    return head + body


# --- bounding-box geometry ---


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two pixel-aligned boxes; 0 when disjoint."""
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def bbox_scale(b: BoundingBox, from_size, to_size) -> BoundingBox:
    """Rescale a box between image resolutions.

    Left/top corners floor, right/bottom edges ceil, then the box is
    clamped into the target image with at least 1x1 extent.
    """
    fw, fh = from_size
    tw, th = to_size
    sx = tw / fw
    sy = th / fh
    x0 = math.floor(b.x * sx)
    y0 = math.floor(b.y * sy)
    x1 = math.ceil((b.x + b.w) * sx)
    y1 = math.ceil((b.y + b.h) * sy)
    x0 = min(max(x0, 0), tw - 1)
    y0 = min(max(y0, 0), th - 1)
    x1 = min(max(x1, x0 + 1), tw)
    y1 = min(max(y1, y0 + 1), th)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def with_header(msg, **fields):
    """Copy a message, replacing header fields (seq, stamp_ns, frame_id)."""
    new_header = replace(msg.header, **fields)
    if isinstance(msg, SaliencyMap):
        return SaliencyMap(new_header, msg.width, msg.height, msg.values)
    return replace(msg, header=new_header)
