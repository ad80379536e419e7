"""Builds a pipeline from its config and drives it.

Two engines share the same node graph:

- lockstep: single-threaded; all sources emit one frame, then queued
  deliveries are drained in global arrival order until quiescent.
  Deterministic, used by the evaluation harness and tests.
- threaded: one thread per node plus paced source threads; the live mode
  behind `attbus run` / `attbus serve`.
"""

from __future__ import annotations

import logging
import threading
import time

from . import messages as m
from .bag import BagWriter
from .bus import LocalBus
from .config import COMMON_PARAMS, NodeDecl, PipelineConfig
from .errors import AttbusError, ConfigError
from .messages import Header, ParamUpdate
from .nodes import NODE_KINDS, Node
from .sync import ApproximateTimeSync, SyncPolicy

log = logging.getLogger("attbus.runner")

PARAMS_TOPIC = "/params"
PARAM_ACK_TOPIC = "/param_ack"


class NodeFailure(AttbusError):
    def __init__(self, node_name: str, cause: BaseException):
        super().__init__(f"node {node_name!r} failed: {cause}")
        self.node_name = node_name
        self.cause = cause


class NodeContext:
    def __init__(self, runtime, name: str, pub_topics: list):
        self._runtime = runtime
        self.name = name
        self.pub_topics = pub_topics
        self.publishers = []
        self._param_pub = None

    def has_port(self, index: int) -> bool:
        return index < len(self.publishers)

    def publish(self, port: int, msg):
        self.publishers[port].publish(msg)

    def send_param(self, node: str, param: str, value):
        if self._param_pub is None:
            self._param_pub = self._runtime.bus.advertise(
                self._runtime.bus.node(self.name + "!cmd"), PARAMS_TOPIC,
                m.PARAM_UPDATE)
        self._param_pub.publish(ParamUpdate(Header(frame_id=self.name),
                                            node, param, value))


class NodeInstance:
    def __init__(self, runtime, decl: NodeDecl):
        spec = NODE_KINDS[decl.kind]
        self.decl = decl
        self.spec = spec
        params = dict(spec.params)
        params.update(COMMON_PARAMS)
        params.update(decl.params)
        self.handle = runtime.bus.node(decl.name)
        capacity = int(params.get("queue_capacity") or 0) or None

        self.ctx = NodeContext(runtime, decl.name, list(decl.pubs))
        for i, topic in enumerate(decl.pubs):
            type_id = spec.outputs[i][0]
            self.ctx.publishers.append(runtime.bus.advertise(self.handle, topic, type_id))

        self.syncs = []  # (ApproximateTimeSync, topics)
        self.topic_sync = {}
        assigned = set()
        for sync in decl.syncs:
            self._add_sync(sync.topics, sync.slop_ns, capacity)
            assigned.update(sync.topics)
        for group in spec.sync_groups:
            topics = [decl.subs[i] for i in group if i < len(decl.subs)]
            if len(topics) < 2:
                continue
            if any(set(s.topics) >= set(topics) for s in decl.syncs):
                continue
            if any(t in assigned for t in topics):
                raise ConfigError(
                    f"node {decl.name!r}: sync block must cover all of "
                    f"{topics}", decl.line)
            self._add_sync(topics, 0, capacity)
            assigned.update(topics)

        for i, topic in enumerate(decl.subs):
            type_id = spec.inputs[i][0]
            runtime.bus.subscribe(self.handle, topic, type_id, capacity=capacity)
        self.params_sub = runtime.bus.subscribe(self.handle, PARAMS_TOPIC,
                                                m.PARAM_UPDATE, capacity=capacity)
        self.ack_pub = runtime.bus.advertise(self.handle, PARAM_ACK_TOPIC,
                                             m.PARAM_UPDATE)
        self.node: Node = spec.factory(decl.name, params, self.ctx)

    def _add_sync(self, topics, slop_ns, capacity):
        sync = ApproximateTimeSync(SyncPolicy(list(topics), slop_ns,
                                              capacity or 16))
        self.syncs.append(sync)
        for t in topics:
            self.topic_sync[t] = sync

    def dispatch(self, sub, msg):
        if sub is self.params_sub:
            self._apply_param(msg)
            return
        sync = self.topic_sync.get(sub.topic)
        if sync is not None:
            for group in sync.push(sub.topic, msg):
                self.node.on_sync(group)
        else:
            self.node.on_message(sub.topic, msg)

    def _apply_param(self, msg: ParamUpdate):
        if msg.node != self.decl.name:
            return
        value = msg.value
        default = self.node.params.get(msg.param)
        if default is not None and not isinstance(value, bool):
            if isinstance(default, float) and isinstance(value, int):
                value = float(value)
        if self.node.on_param(msg.param, value):
            self.ack_pub.publish(ParamUpdate(
                Header(stamp_ns=msg.header.stamp_ns, frame_id=self.decl.name),
                msg.node, msg.param, value))
        else:
            log.warning("node %s rejected param %s=%r", self.decl.name,
                        msg.param, msg.value)


class RecorderInstance:
    """Internal sink appending matching traffic to a bag file."""

    def __init__(self, runtime, path, topics=None, wall_clock=False):
        self.decl = NodeDecl(name="!recorder", kind="recorder", line=0)
        self.handle = runtime.bus.node("!recorder")
        self.writer = BagWriter(path)
        self.wall_clock = wall_clock
        self._virtual = 0
        bound = runtime.bus.topics()
        wanted = topics if topics else [t for t in sorted(bound)
                                        if t not in (PARAMS_TOPIC, PARAM_ACK_TOPIC)]
        self.topic_types = {}
        for t in wanted:
            if t not in bound:
                raise ConfigError(f"cannot record unknown topic {t}", 0)
            runtime.bus.subscribe(self.handle, t, bound[t])
            self.topic_types[t] = bound[t]

    def dispatch(self, sub, msg):
        if self.wall_clock:
            recv = time.time_ns()
        else:
            self._virtual = max(self._virtual, msg.header.stamp_ns)
            recv = self._virtual
        self.writer.append(recv, sub.topic, self.topic_types[sub.topic], msg)

    def close(self):
        self.writer.close()


class CollectorInstance:
    """Internal sink keeping messages in memory, for metrics and tests."""

    def __init__(self, runtime, topics, capacity=100000):
        self.decl = NodeDecl(name="!collector", kind="collector", line=0)
        self.handle = runtime.bus.node("!collector")
        self.by_topic = {}
        bound = runtime.bus.topics()
        for t in topics:
            if t in bound:
                runtime.bus.subscribe(self.handle, t, bound[t], capacity=capacity)
                self.by_topic[t] = []

    def dispatch(self, sub, msg):
        self.by_topic[sub.topic].append(msg)


class PipelineRuntime:
    def __init__(self, cfg: PipelineConfig, bus: LocalBus | None = None):
        self.bus = bus or LocalBus()
        self.instances = []
        self.by_name = {}
        for decl in cfg.nodes:
            try:
                inst = NodeInstance(self, decl)
            except AttbusError as e:
                raise NodeFailure(decl.name, e) from e
            self.instances.append(inst)
            self.by_name[decl.name] = inst
        self.sources = [i for i in self.instances if i.node.is_source()]
        self._sinks = []
        self._threads = []
        self._running = False
        self.failures = []

    # --- optional sinks ---

    def attach_recorder(self, path, topics=None, wall_clock=False) -> RecorderInstance:
        rec = RecorderInstance(self, path, topics, wall_clock)
        self._sinks.append(rec)
        return rec

    def attach_collector(self, topics) -> CollectorInstance:
        col = CollectorInstance(self, topics)
        self._sinks.append(col)
        return col

    def close_sinks(self):
        for s in self._sinks:
            if isinstance(s, RecorderInstance):
                s.close()

    # --- lockstep engine ---

    def _all_dispatchable(self):
        return self.instances + self._sinks

    def drain(self):
        candidates = self._all_dispatchable()
        while True:
            best = None
            best_sub = None
            for inst in candidates:
                with inst.handle.cond:
                    for sub in inst.handle.subscriptions:
                        if sub.items and (best is None
                                          or sub.items[0][0] < best_sub.items[0][0]):
                            best, best_sub = inst, sub
            if best is None:
                return
            with best.handle.cond:
                if not best_sub.items:
                    continue
                _, msg = best_sub.items.popleft()
            try:
                best.dispatch(best_sub, msg)
            except Exception as e:
                raise NodeFailure(best.decl.name, e) from e

    def step_sources(self) -> bool:
        alive = False
        for src in self.sources:
            try:
                alive = src.node.step() or alive
            except Exception as e:
                raise NodeFailure(src.decl.name, e) from e
        return alive

    def run_lockstep(self, max_frames: int | None = None):
        if not self.sources:
            self.drain()
            return
        frames = 0
        while max_frames is None or frames < max_frames:
            alive = self.step_sources()
            self.drain()
            frames += 1
            if not alive:
                break
        self.close_sinks()

    # --- threaded engine ---

    def start(self):
        self._running = True
        for inst in self._all_dispatchable():
            t = threading.Thread(target=self._consume_loop, args=(inst,),
                                 daemon=True, name=f"node:{inst.decl.name}")
            t.start()
            self._threads.append(t)
        for src in self.sources:
            t = threading.Thread(target=self._source_loop, args=(src,),
                                 daemon=True, name=f"src:{src.decl.name}")
            t.start()
            self._threads.append(t)

    def _consume_loop(self, inst):
        while self._running:
            got = inst.handle.pop(timeout=0.2)
            if got is None:
                continue
            sub, msg = got
            try:
                inst.dispatch(sub, msg)
            except Exception as e:
                log.exception("node %s failed", inst.decl.name)
                self.failures.append(NodeFailure(inst.decl.name, e))
                return

    def _source_loop(self, src):
        interval = getattr(src.node, "pace_interval", lambda: 1 / 30)()
        next_t = time.monotonic()
        while self._running:
            try:
                if not src.node.step():
                    return
            except Exception as e:
                log.exception("source %s failed", src.decl.name)
                self.failures.append(NodeFailure(src.decl.name, e))
                return
            next_t += interval
            delay = next_t - time.monotonic()
            if delay > 0:
                time.sleep(delay)

    def sources_done(self) -> bool:
        alive_threads = [t for t in self._threads if t.name.startswith("src:")
                         and t.is_alive()]
        return not alive_threads

    def stop(self):
        self._running = False
        for t in self._threads:
            t.join(timeout=2.0)
        self.close_sinks()

    def run_threaded(self, duration: float | None = None, poll: float = 0.05):
        """Run until duration elapses, every source finishes, or a node
        fails; returns 0 on clean stop, 2 on node failure."""
        self.start()
        deadline = None if duration is None else time.monotonic() + duration
        try:
            while True:
                if self.failures:
                    break
                if self.sources and self.sources_done() and \
                        not any(i.handle.pending() for i in self._all_dispatchable()):
                    break
                if deadline is not None and time.monotonic() >= deadline:
                    break
                time.sleep(poll)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()
        return 2 if self.failures else 0
