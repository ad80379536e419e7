import struct

import numpy as np
import pytest

from attbus import messages as m
from attbus.errors import (
    BodyLengthMismatch,
    InvariantViolation,
    Truncated,
    UnknownTypeId,
)

from _msggen import ALL_DATA_TYPE_IDS, random_message, random_topic


def test_serialize_rejects_empty_topic():
    img = m.ImageMsg(m.Header(), 1, 1, 1, b"\x7f")
    with pytest.raises(InvariantViolation):
        m.serialize_frame("", m.IMAGE, img)


def test_frame_layout_hand_encoded():
    # 1x1 grayscale image, pixel 0x7F, topic "/img", seq 0, stamp 0, frame_id "".
    img = m.ImageMsg(m.Header(0, 0, ""), 1, 1, 1, b"\x7f")
    frame = m.serialize_frame("/img", m.IMAGE, img)
    payload = (
        struct.pack("<H", 4) + b"/img"
        + struct.pack("<H", 1)
        + struct.pack("<IQ", 0, 0)
        + struct.pack("<H", 0)
        + struct.pack("<IIB", 1, 1, 1) + b"\x7f"
    )
    assert frame == struct.pack("<I", len(payload)) + payload
    assert frame.endswith(bytes([1, 0, 0, 0, 1, 0, 0, 0, 1, 0x7F]))


def test_round_trip_every_type():
    rng = np.random.default_rng(7)
    for type_id in ALL_DATA_TYPE_IDS:
        for _ in range(50):
            msg = random_message(rng, type_id)
            topic = random_topic(rng)
            frame = m.serialize_frame(topic, type_id, msg)
            got_topic, got_type, got_msg = m.deserialize_frame(frame)
            assert (got_topic, got_type) == (topic, type_id)
            assert got_msg == msg
            # determinism: equal messages give byte-identical frames
            assert m.serialize_frame(topic, type_id, msg) == frame


def test_control_frames_round_trip():
    h = m.Header(seq=m.IMAGE, stamp_ns=0, frame_id="nodeA")
    frame = m.serialize_frame("/img", m.ADVERTISE, h)
    topic, type_id, hdr = m.deserialize_frame(frame)
    assert (topic, type_id, hdr) == ("/img", m.ADVERTISE, h)


def test_truncated_frame():
    img = m.ImageMsg(m.Header(), 2, 2, 1, bytes(4))
    frame = m.serialize_frame("/img", m.IMAGE, img)
    with pytest.raises(Truncated):
        m.deserialize_frame(frame[:-1])
    with pytest.raises(BodyLengthMismatch):
        m.deserialize_frame(frame + b"\x00")


def test_unknown_type_id():
    img = m.ImageMsg(m.Header(), 1, 1, 1, b"\x00")
    frame = bytearray(m.serialize_frame("/i", m.IMAGE, img))
    # type id sits right after the u32 length and the u16+topic
    off = 4 + 2 + 2
    frame[off:off + 2] = struct.pack("<H", 999)
    with pytest.raises(UnknownTypeId):
        m.deserialize_frame(bytes(frame))


def test_saliency_value_range_enforced_on_decode():
    sal = m.SaliencyMap(m.Header(), 2, 1, np.array([[0.2, 0.8]], dtype=np.float32))
    frame = bytearray(m.serialize_frame("/s", m.SALIENCY, sal))
    # patch one float to 2.0 (out of range)
    frame[-4:] = struct.pack("<f", 2.0)
    with pytest.raises(InvariantViolation):
        m.deserialize_frame(bytes(frame))
    frame[-4:] = struct.pack("<f", float("nan"))
    with pytest.raises(InvariantViolation):
        m.deserialize_frame(bytes(frame))


def test_invalid_messages_rejected_on_serialize():
    with pytest.raises(InvariantViolation):
        m.serialize_frame("/i", m.IMAGE, m.ImageMsg(m.Header(), 2, 2, 1, b"\x00"))
    with pytest.raises(InvariantViolation):
        m.serialize_frame("/t", m.TRACK_STATE,
                          m.TrackState(m.Header(), m.TrackPhase.IDLE, m.BoundingBox(0, 0, 1, 1), 0.5))
    with pytest.raises(InvariantViolation):
        m.serialize_frame("/g", m.TOPDOWN_GAIN, m.TopDownGain(m.Header(), (1.0, -0.1, 1.0, 1.0)))
    with pytest.raises(InvariantViolation):
        m.serialize_frame("/r", m.REGION_FOA,
                          m.RegionFoa(m.Header(), m.BoundingBox(0, 0, 3, 1), b"\x00", 0.5))


def test_fuzz_random_bytes_never_crash():
    rng = np.random.default_rng(99)
    errors = (InvariantViolation, Truncated, UnknownTypeId, BodyLengthMismatch)
    for _ in range(2000):
        blob = rng.integers(0, 256, int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
        try:
            m.deserialize_frame(blob)
        except errors:
            pass


def test_fuzz_mutated_valid_frames():
    rng = np.random.default_rng(5)
    errors = (InvariantViolation, Truncated, UnknownTypeId, BodyLengthMismatch)
    for type_id in ALL_DATA_TYPE_IDS:
        base = m.serialize_frame("/x", type_id, random_message(rng, type_id))
        for _ in range(200):
            blob = bytearray(base)
            for _ in range(int(rng.integers(1, 4))):
                blob[rng.integers(0, len(blob))] = rng.integers(0, 256)
            try:
                m.deserialize_frame(bytes(blob))
            except errors:
                pass


# --- bbox geometry ---


def iou_by_pixel_count(a, b):
    """Brute-force oracle: rasterize both boxes and count pixels."""
    w = max(a.x + a.w, b.x + b.w) + 1
    h = max(a.y + a.h, b.y + b.h) + 1
    ga = np.zeros((h, w), dtype=bool)
    gb = np.zeros((h, w), dtype=bool)
    ga[a.y:a.y + a.h, a.x:a.x + a.w] = True
    gb[b.y:b.y + b.h, b.x:b.x + b.w] = True
    union = np.logical_or(ga, gb).sum()
    return np.logical_and(ga, gb).sum() / union


def test_iou_identical_and_disjoint():
    a = m.BoundingBox(3, 4, 10, 10)
    assert m.bbox_iou(a, a) == 1.0
    assert m.bbox_iou(a, m.BoundingBox(100, 100, 5, 5)) == 0.0


def test_iou_half_overlap():
    a = m.BoundingBox(0, 0, 10, 10)
    b = m.BoundingBox(5, 0, 10, 10)
    assert m.bbox_iou(a, b) == pytest.approx(50 / 150)


def test_iou_matches_pixel_oracle_and_is_symmetric():
    rng = np.random.default_rng(17)
    for _ in range(300):
        a = m.BoundingBox(*(int(v) for v in rng.integers(0, 20, 2)),
                          *(int(v) for v in rng.integers(1, 20, 2)))
        b = m.BoundingBox(*(int(v) for v in rng.integers(0, 20, 2)),
                          *(int(v) for v in rng.integers(1, 20, 2)))
        iou = m.bbox_iou(a, b)
        assert iou == pytest.approx(iou_by_pixel_count(a, b))
        assert iou == m.bbox_iou(b, a)
        assert 0.0 <= iou <= 1.0
        assert (iou == 1.0) == (a == b)


def test_bbox_scale_examples():
    assert m.bbox_scale(m.BoundingBox(8, 8, 16, 16), (64, 64), (256, 256)) == \
        m.BoundingBox(32, 32, 64, 64)
    b = m.BoundingBox(5, 9, 3, 2)
    assert m.bbox_scale(b, (64, 48), (64, 48)) == b
    scaled = m.bbox_scale(m.BoundingBox(63, 63, 1, 1), (64, 64), (100, 100))
    assert scaled.x + scaled.w == 100
    assert scaled.y + scaled.h == 100
    assert scaled.inside(100, 100)


def test_bbox_scale_round_trip_contains_center():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d1 = (int(rng.integers(16, 128)), int(rng.integers(16, 128)))
        d2 = (int(rng.integers(16, 128)), int(rng.integers(16, 128)))
        x = int(rng.integers(0, d1[0] - 1))
        y = int(rng.integers(0, d1[1] - 1))
        b = m.BoundingBox(x, y, int(rng.integers(1, d1[0] - x + 1)), int(rng.integers(1, d1[1] - y + 1)))
        back = m.bbox_scale(m.bbox_scale(b, d1, d2), d2, d1)
        cx = b.x + b.w / 2
        cy = b.y + b.h / 2
        assert back.x <= cx <= back.x + back.w
        assert back.y <= cy <= back.y + back.h
