"""In-process typed pub-sub bus.

Topics bind to exactly one message type for the life of the bus. Every
subscription owns a bounded FIFO (default capacity 16) that drops its
oldest entry on overflow, so a slow consumer can never block a
publisher. Delivery order per (publisher, topic) equals publish order.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import replace

from .errors import TypeConflict
from .messages import TYPE_NAMES, type_id_for

DEFAULT_QUEUE_CAPACITY = 16


class Subscription:
    """Bounded per-(node, topic) inbox. Entries are (ticket, message)."""

    def __init__(self, node: "NodeHandle", topic: str, type_id: int, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.node = node
        self.topic = topic
        self.type_id = type_id
        self.capacity = capacity
        self.items = deque()
        self.dropped = 0

    def _push(self, ticket: int, msg):
        # caller holds node.cond
        if len(self.items) >= self.capacity:
            self.items.popleft()
            self.dropped += 1
        self.items.append((ticket, msg))


class NodeHandle:
    """A bus participant: owns its subscriptions and a wakeup condition."""

    def __init__(self, bus, name: str):
        self.bus = bus
        self.name = name
        self.cond = threading.Condition()
        self.subscriptions: list[Subscription] = []

    def pop(self, timeout: float | None = None):
        """Take the earliest-delivered pending message across this node's
        subscriptions. Returns (subscription, message) or None on timeout."""
        with self.cond:
            if timeout is None:
                while True:
                    got = self._take()
                    if got is not None:
                        return got
                    self.cond.wait()
            else:
                got = self._take()
                if got is None:
                    self.cond.wait(timeout)
                    got = self._take()
                return got

    def try_pop(self):
        with self.cond:
            return self._take()

    def _take(self):
        best = None
        for sub in self.subscriptions:
            if sub.items and (best is None or sub.items[0][0] < best.items[0][0]):
                best = sub
        if best is None:
            return None
        _, msg = best.items.popleft()
        return best, msg

    def pending(self) -> int:
        with self.cond:
            return sum(len(s.items) for s in self.subscriptions)


class Publisher:
    """Per-(node, topic) publishing handle; assigns the monotone seq."""

    def __init__(self, bus, node_name: str, topic: str, type_id: int):
        self.bus = bus
        self.node_name = node_name
        self.topic = topic
        self.type_id = type_id
        self._seq = 0

    def publish(self, msg, preserve_header: bool = False):
        """Validate and fan out. Returns the message as delivered (with the
        assigned seq). preserve_header leaves seq/stamp untouched (replay)."""
        if type_id_for(msg) != self.type_id:
            raise TypeConflict(
                f"publisher for {TYPE_NAMES[self.type_id]} got {type(msg).__name__}"
            )
        if not preserve_header:
            msg = _with_seq(msg, self._seq)
            self._seq += 1
        msg.validate()
        self.bus._deliver(self.node_name, self.topic, msg)
        return msg


def _with_seq(msg, seq: int):
    from .messages import SaliencyMap

    header = replace(msg.header, seq=seq)
    if isinstance(msg, SaliencyMap):
        return SaliencyMap(header, msg.width, msg.height, msg.values)
    return replace(msg, header=header)


class LocalBus:
    """Star router for a single process; also the core of the TCP broker."""

    def __init__(self, default_capacity: int = DEFAULT_QUEUE_CAPACITY):
        self._lock = threading.Lock()
        self._bindings: dict[str, int] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._ticket = 0
        self._listeners = []  # called as (topic, type_id) on new bindings
        self.default_capacity = default_capacity

    def node(self, name: str) -> NodeHandle:
        return NodeHandle(self, name)

    def _bind(self, topic: str, type_id: int):
        if not topic or not topic.startswith("/"):
            raise TypeConflict(f"topic {topic!r} must start with '/'")
        bound = self._bindings.get(topic)
        if bound is None:
            self._bindings[topic] = type_id
            for fn in list(self._listeners):
                fn(topic, type_id)
        elif bound != type_id:
            raise TypeConflict(
                f"{topic} is bound to {TYPE_NAMES[bound]}, not {TYPE_NAMES[type_id]}"
            )

    def advertise(self, node, topic: str, type_id: int) -> Publisher:
        name = node.name if isinstance(node, NodeHandle) else str(node)
        with self._lock:
            self._bind(topic, type_id)
        return Publisher(self, name, topic, type_id)

    def subscribe(
        self, node: NodeHandle, topic: str, type_id: int, capacity: int | None = None
    ) -> Subscription:
        with self._lock:
            self._bind(topic, type_id)
            sub = Subscription(node, topic, type_id, capacity or self.default_capacity)
            self._subs.setdefault(topic, []).append(sub)
        with node.cond:
            node.subscriptions.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription):
        with self._lock:
            subs = self._subs.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)
        with sub.node.cond:
            if sub in sub.node.subscriptions:
                sub.node.subscriptions.remove(sub)

    def topics(self) -> dict[str, int]:
        with self._lock:
            return dict(self._bindings)

    def add_binding_listener(self, fn):
        """fn(topic, type_id) fires on every new topic binding."""
        with self._lock:
            self._listeners.append(fn)
            existing = list(self._bindings.items())
        for topic, type_id in existing:
            fn(topic, type_id)

    def _deliver(self, sender_name: str, topic: str, msg):
        with self._lock:
            ticket = self._ticket
            self._ticket += 1
            targets = [s for s in self._subs.get(topic, []) if s.node.name != sender_name]
        for sub in targets:
            with sub.node.cond:
                sub._push(ticket, msg)
                sub.node.cond.notify_all()
