"""Bag files: an append-only log of timestamped wire frames.

Layout: 8-byte magic "SABAG01\\n", then records of
[recv_stamp_ns u64 LE][complete wire frame]. Receive stamps are
non-decreasing across records, which replay relies on for pacing.
"""

from __future__ import annotations

import struct
import time

from .errors import CorruptBag, IoFailure
from .messages import deserialize_frame, read_frame_from, serialize_frame

MAGIC = b"SABAG01\n"


class BagWriter:
    def __init__(self, path):
        try:
            self._f = open(path, "wb")
            self._f.write(MAGIC)
        except OSError as e:
            raise IoFailure(str(e)) from None
        self._last_recv = 0
        self.records = 0

    def append_frame(self, recv_stamp_ns: int, frame: bytes):
        # wall clocks can step backwards; clamp to keep the file invariant
        recv = max(int(recv_stamp_ns), self._last_recv)
        self._last_recv = recv
        try:
            self._f.write(struct.pack("<Q", recv))
            self._f.write(frame)
        except OSError as e:
            raise IoFailure(str(e)) from None
        self.records += 1

    def append(self, recv_stamp_ns: int, topic: str, type_id: int, msg):
        self.append_frame(recv_stamp_ns, serialize_frame(topic, type_id, msg))

    def close(self):
        try:
            self._f.close()
        except OSError as e:
            raise IoFailure(str(e)) from None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BagRecord:
    __slots__ = ("recv_stamp_ns", "topic", "type_id", "msg", "frame")

    def __init__(self, recv_stamp_ns, topic, type_id, msg, frame):
        self.recv_stamp_ns = recv_stamp_ns
        self.topic = topic
        self.type_id = type_id
        self.msg = msg
        self.frame = frame


def read_bag(path):
    """Yield BagRecords; raises CorruptBag with the offending byte offset."""
    with open(path, "rb") as f:
        head = f.read(len(MAGIC))
        if head != MAGIC:
            raise CorruptBag(f"bad magic {head!r}", 0)
        offset = len(MAGIC)
        last_recv = 0
        while True:
            stamp_raw = f.read(8)
            if not stamp_raw:
                return
            if len(stamp_raw) < 8:
                raise CorruptBag("truncated receive stamp", offset)
            (recv,) = struct.unpack("<Q", stamp_raw)
            if recv < last_recv:
                raise CorruptBag("receive stamps decrease", offset)
            last_recv = recv
            try:
                frame = read_frame_from(f.read)
            except Exception:
                raise CorruptBag("truncated record", offset) from None
            if frame is None:
                raise CorruptBag("missing frame after stamp", offset)
            try:
                topic, type_id, msg = deserialize_frame(frame)
            except Exception as e:
                raise CorruptBag(f"bad frame: {e}", offset) from None
            yield BagRecord(recv, topic, type_id, msg, frame)
            offset += 8 + len(frame)


class ReplaySession:
    """Republishes bag records with original headers, pacing gaps by rate.

    publish_fn(topic, type_id, msg, frame) is invoked per record; clock
    and sleep are injectable for tests.
    """

    def __init__(self, path, rate: float = 1.0, loop: bool = False,
                 sleep=time.sleep):
        if not rate > 0:
            raise ValueError("rate must be > 0")
        self.path = path
        self.rate = rate
        self.loop = loop
        self._sleep = sleep
        self.stopped = False

    def run(self, publish_fn):
        while True:
            prev_recv = None
            for rec in read_bag(self.path):
                if self.stopped:
                    return
                if prev_recv is not None and rec.recv_stamp_ns > prev_recv:
                    self._sleep((rec.recv_stamp_ns - prev_recv) / self.rate / 1e9)
                prev_recv = rec.recv_stamp_ns
                publish_fn(rec.topic, rec.type_id, rec.msg, rec.frame)
            if not self.loop or self.stopped:
                return

    def stop(self):
        self.stopped = True
