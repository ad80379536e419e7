import socket
import struct
import time

import numpy as np
import pytest

from attbus import messages as m
from attbus.broker import BrokerServer, TcpBusClient
from attbus.bus import LocalBus
from attbus.errors import BindFailure


@pytest.fixture
def broker():
    srv = BrokerServer("127.0.0.1:0")
    yield srv
    srv.close()


def wait_until(pred, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(0.01)
    return False


def subscriber_count(broker, topic):
    with broker.bus._lock:
        return len(broker.bus._subs.get(topic, []))


def pf(stamp):
    return m.PointFoa(m.Header(stamp_ns=stamp, frame_id="t"), 3, 4, 0.5)


def test_routing_is_byte_transparent(broker):
    a = TcpBusClient(broker.address, name="A")
    b = TcpBusClient(broker.address, name="B")
    pub = a.advertise("/img", m.IMAGE)
    b.subscribe("/img", m.IMAGE)
    assert wait_until(lambda: subscriber_count(broker, "/img") == 1)
    img = m.ImageMsg(m.Header(seq=9, stamp_ns=123, frame_id="cam"), 2, 2, 1, bytes([1, 2, 3, 4]))
    sent_frame = m.serialize_frame("/img", m.IMAGE, img)
    pub.publish(img, preserve_header=True)
    got = b.pop(timeout=5.0)
    assert got is not None
    _, received = got
    assert m.serialize_frame("/img", m.IMAGE, received) == sent_frame
    a.close(), b.close()


def test_garbage_client_disconnected_others_unaffected(broker):
    a = TcpBusClient(broker.address, name="A")
    b = TcpBusClient(broker.address, name="B")
    c = TcpBusClient(broker.address, name="C")
    pub = a.advertise("/foa", m.POINT_FOA)
    c.subscribe("/foa", m.POINT_FOA)
    assert wait_until(lambda: subscriber_count(broker, "/foa") == 1)
    # b sends a framed blob of junk
    b.sock.sendall(struct.pack("<I", 8) + b"garbage!")
    assert wait_until(lambda: b.closed)
    pub.publish(pf(1))
    got = c.pop(timeout=5.0)
    assert got is not None and got[1].header.stamp_ns == 1
    a.close(), b.close(), c.close()


def test_advertise_type_conflict_closes_client(broker):
    a = TcpBusClient(broker.address, name="A")
    b = TcpBusClient(broker.address, name="B")
    a.advertise("/x", m.IMAGE)
    assert wait_until(lambda: "/x" in broker.bus.topics())
    b.advertise("/x", m.SALIENCY)
    assert wait_until(lambda: b.closed)
    a.close(), b.close()


def test_stalled_subscriber_drops_oldest_only(broker):
    a = TcpBusClient(broker.address, name="A")
    fast = TcpBusClient(broker.address, name="fast")
    host, port = broker.address.rsplit(":", 1)
    slow_sock = socket.create_connection((host, int(port)))
    # subscribe on the raw socket, then never read from it
    slow_sock.sendall(m.serialize_frame("/img", m.SUBSCRIBE, m.Header(seq=m.IMAGE, frame_id="slow")))
    fast.subscribe("/img", m.IMAGE, capacity=4096)
    pub = a.advertise("/img", m.IMAGE)
    assert wait_until(lambda: subscriber_count(broker, "/img") == 2)

    big = np.zeros((128, 128), dtype=np.uint8)
    n = 300
    for i in range(n):
        big[0, 0] = i % 256
        pub.publish(m.ImageMsg.from_array(big, m.Header(stamp_ns=i)))

    received = []
    while len(received) < n:
        got = fast.pop(timeout=5.0)
        assert got is not None, f"fast subscriber stalled at {len(received)}"
        received.append(got[1].header.stamp_ns)
    assert received == list(range(n))  # fast client saw everything, in order

    # drain whatever the slow client ends up with
    slow_sock.settimeout(0.5)
    blob = b""
    try:
        while True:
            chunk = slow_sock.recv(65536)
            if not chunk:
                break
            blob += chunk
    except socket.timeout:
        pass
    stamps = []
    off = 0
    while off + 4 <= len(blob):
        (length,) = struct.unpack_from("<I", blob, off)
        if off + 4 + length > len(blob):
            break
        topic, tid, msg = m.deserialize_frame(blob[off:off + 4 + length])
        if tid == m.IMAGE:
            stamps.append(msg.header.stamp_ns)
        off += 4 + length
    assert len(stamps) < n  # it really lost messages
    assert stamps == sorted(stamps)  # but order is preserved
    assert stamps[-1] == n - 1  # and it caught up to the freshest frame
    slow_sock.close()
    a.close(), fast.close()


def test_transport_equivalence_local_vs_tcp(broker):
    msgs = [pf(i) for i in range(10)]

    # in-process delivery
    bus = LocalBus()
    sink = bus.node("sink")
    bus.subscribe(sink, "/foa", m.POINT_FOA, capacity=16)
    local_pub = bus.advertise("src", "/foa", m.POINT_FOA)
    local_out = []
    for msg in msgs:
        local_pub.publish(msg, preserve_header=True)
    for _, got in iter(sink.try_pop, None):
        local_out.append(got)

    # same sequence through the broker
    a = TcpBusClient(broker.address, name="src")
    b = TcpBusClient(broker.address, name="sink")
    b.subscribe("/foa", m.POINT_FOA, capacity=16)
    pub = a.advertise("/foa", m.POINT_FOA)
    assert wait_until(lambda: subscriber_count(broker, "/foa") == 1)
    for msg in msgs:
        pub.publish(msg, preserve_header=True)
    tcp_out = []
    while len(tcp_out) < len(local_out):
        got = b.pop(timeout=5.0)
        assert got is not None
        tcp_out.append(got[1])
    assert tcp_out == local_out
    a.close(), b.close()


def test_topic_announcements(broker):
    a = TcpBusClient(broker.address, name="A")
    a.advertise("/img", m.IMAGE)
    a.advertise("/sal", m.SALIENCY)
    late = TcpBusClient(broker.address, name="late")
    assert wait_until(lambda: late.topics() == {"/img": m.IMAGE, "/sal": m.SALIENCY})
    a.close(), late.close()


def test_bind_failure():
    srv = BrokerServer("127.0.0.1:0")
    with pytest.raises(BindFailure):
        BrokerServer(srv.address)
    srv.close()
