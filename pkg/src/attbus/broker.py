"""TCP star broker and the matching client transport.

Every connected client is a bus node: its subscriptions get the same
bounded drop-oldest queues as in-process subscribers, and a per-client
writer thread drains them onto the socket, so a stalled reader only
loses its own oldest messages. Frames pass through the broker
content-transparently (same serialization in equals out).

Topic bindings are announced to every client as ADVERTISE control frames
(header.seq carries the payload type id), which is what `attbus topics`
listens for.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
from collections import deque

from .bus import DEFAULT_QUEUE_CAPACITY, LocalBus, NodeHandle, Subscription
from .errors import BindFailure, Truncated
from .messages import (
    ADVERTISE,
    CONTROL_IDS,
    SUBSCRIBE,
    TYPE_NAMES,
    Header,
    deserialize_frame,
    read_frame_from,
    serialize_frame,
)

log = logging.getLogger("attbus.broker")

DEFAULT_ADDRESS = "127.0.0.1:7447"
MAX_REASONABLE_FRAME = 1 << 26  # 64 MiB; larger means a corrupt peer


def parse_address(address: str):
    host, _, port = address.rpartition(":")
    return host or "127.0.0.1", int(port)


def _exact_reader(sock):
    def read(n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return buf
            buf += chunk
        return buf

    return read


def _read_checked_frame(read):
    head = read(4)
    if not head:
        return None
    if len(head) < 4:
        raise Truncated("EOF inside length prefix")
    (length,) = struct.unpack("<I", head)
    if length > MAX_REASONABLE_FRAME:
        raise Truncated(f"frame of {length} bytes exceeds sanity limit")
    body = read(length)
    if len(body) < length:
        raise Truncated("EOF inside frame body")
    return head + body


class _BrokerClient:
    def __init__(self, broker, sock, addr, index):
        self.broker = broker
        self.sock = sock
        self.addr = addr
        self.node = broker.bus.node(f"tcp:{addr[0]}:{addr[1]}#{index}")
        self.pubs = {}
        self.control = deque()
        self.closed = False
        self.reader = threading.Thread(target=self._read_loop, daemon=True)
        self.writer = threading.Thread(target=self._write_loop, daemon=True)

    def start(self):
        self.reader.start()
        self.writer.start()

    def announce(self, topic: str, type_id: int):
        frame = serialize_frame(topic, ADVERTISE, Header(seq=type_id, frame_id="broker"))
        with self.node.cond:
            self.control.append(frame)
            self.node.cond.notify_all()

    def _read_loop(self):
        read = _exact_reader(self.sock)
        try:
            while True:
                frame = _read_checked_frame(read)
                if frame is None:
                    self.close("peer closed")
                    return
                topic, type_id, msg = deserialize_frame(frame)
                if type_id in CONTROL_IDS:
                    payload_tid = msg.seq
                    if payload_tid not in TYPE_NAMES or payload_tid in CONTROL_IDS:
                        raise ValueError(f"bad payload type id {payload_tid}")
                    if type_id == ADVERTISE:
                        self._publisher(topic, payload_tid)
                    else:
                        self.broker.bus.subscribe(
                            self.node, topic, payload_tid,
                            capacity=self.broker.queue_capacity,
                        )
                else:
                    self._publisher(topic, type_id).publish(msg, preserve_header=True)
        except Exception as e:
            self.close(f"{type(e).__name__}: {e}")

    def _publisher(self, topic, type_id):
        pub = self.pubs.get(topic)
        if pub is None:
            pub = self.broker.bus.advertise(self.node, topic, type_id)
            self.pubs[topic] = pub
        return pub

    def _write_loop(self):
        try:
            while True:
                frame = None
                with self.node.cond:
                    while frame is None:
                        if self.closed:
                            return
                        if self.control:
                            frame = self.control.popleft()
                        else:
                            got = self.node._take()
                            if got is not None:
                                sub, msg = got
                                frame = serialize_frame(sub.topic, sub.type_id, msg)
                            else:
                                self.node.cond.wait(0.25)
                self.sock.sendall(frame)
        except Exception as e:
            self.close(f"write failed: {e}")

    def close(self, reason: str):
        with self.node.cond:
            if self.closed:
                return
            self.closed = True
            self.node.cond.notify_all()
        log.info("client %s disconnected: %s", self.node.name, reason)
        for sub in list(self.node.subscriptions):
            self.broker.bus.unsubscribe(sub)
        try:
            self.sock.close()
        except OSError:
            pass
        self.broker._forget(self)


class BrokerServer:
    """Serves a LocalBus over TCP; in-process nodes and TCP clients mix freely."""

    def __init__(self, address: str = DEFAULT_ADDRESS, bus: LocalBus | None = None,
                 queue_capacity: int = DEFAULT_QUEUE_CAPACITY):
        self.bus = bus or LocalBus()
        self.queue_capacity = queue_capacity
        host, port = parse_address(address)
        try:
            self._listener = socket.create_server((host, port))
        except OSError as e:
            raise BindFailure(f"cannot bind {address}: {e}") from None
        self.address = f"{host}:{self._listener.getsockname()[1]}"
        self._clients = []
        self._clients_lock = threading.Lock()
        self._index = 0
        self._stopping = False
        self.bus.add_binding_listener(self._announce_binding)
        self._accepter = threading.Thread(target=self._accept_loop, daemon=True)
        self._accepter.start()

    def _accept_loop(self):
        while not self._stopping:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._clients_lock:
                self._index += 1
                client = _BrokerClient(self, sock, addr, self._index)
                self._clients.append(client)
            for topic, type_id in self.bus.topics().items():
                client.announce(topic, type_id)
            client.start()
            log.info("client %s connected", client.node.name)

    def _announce_binding(self, topic: str, type_id: int):
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.announce(topic, type_id)

    def _forget(self, client):
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)

    def close(self):
        self._stopping = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close("broker shutdown")


class TcpPublisher:
    def __init__(self, client, topic: str, type_id: int):
        self.client = client
        self.topic = topic
        self.type_id = type_id
        self._seq = 0

    def publish(self, msg, preserve_header: bool = False):
        from .bus import _with_seq

        if not preserve_header:
            msg = _with_seq(msg, self._seq)
            self._seq += 1
        frame = serialize_frame(self.topic, self.type_id, msg)
        self.client._send(frame)
        return msg

    def publish_frame(self, frame: bytes):
        self.client._send(frame)


class TcpBusClient:
    """Client-side transport with the same surface as LocalBus handles."""

    def __init__(self, address: str = DEFAULT_ADDRESS, name: str = "client",
                 connect_timeout: float = 5.0):
        host, port = parse_address(address)
        self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        self.sock.settimeout(None)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.name = name
        self.node = NodeHandle(None, name)
        self._send_lock = threading.Lock()
        self._subs: dict[str, Subscription] = {}
        self._ticket = 0
        self._topics: dict[str, int] = {}
        self.closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def advertise(self, topic: str, type_id: int) -> TcpPublisher:
        self._send(serialize_frame(topic, ADVERTISE, Header(seq=type_id, frame_id=self.name)))
        return TcpPublisher(self, topic, type_id)

    def subscribe(self, topic: str, type_id: int,
                  capacity: int = DEFAULT_QUEUE_CAPACITY) -> Subscription:
        sub = Subscription(self.node, topic, type_id, capacity)
        with self.node.cond:
            self.node.subscriptions.append(sub)
        self._subs[topic] = sub
        self._send(serialize_frame(topic, SUBSCRIBE, Header(seq=type_id, frame_id=self.name)))
        return sub

    def pop(self, timeout: float | None = None):
        return self.node.pop(timeout)

    def try_pop(self):
        return self.node.try_pop()

    def topics(self) -> dict[str, int]:
        with self.node.cond:
            return dict(self._topics)

    def _send(self, frame: bytes):
        with self._send_lock:
            self.sock.sendall(frame)

    def _read_loop(self):
        read = _exact_reader(self.sock)
        try:
            while True:
                frame = _read_checked_frame(read)
                if frame is None:
                    break
                topic, type_id, msg = deserialize_frame(frame)
                if type_id == ADVERTISE:
                    with self.node.cond:
                        self._topics[topic] = msg.seq
                    continue
                sub = self._subs.get(topic)
                if sub is not None:
                    with self.node.cond:
                        sub._push(self._ticket, msg)
                        self._ticket += 1
                        self.node.cond.notify_all()
        except Exception as e:
            log.debug("client %s reader stopped: %s", self.name, e)
        finally:
            with self.node.cond:
                self.closed = True
                self.node.cond.notify_all()

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
