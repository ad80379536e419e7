"""HTTP + WebSocket gateway: the live window into a running pipeline.

HTTP: GET /topics, /nodes, /graph as JSON; GET / and /ui/* serve the
operator console assets. WebSocket /ws speaks JSON ops:

  client: {"op":"subscribe","topic":T} {"op":"unsubscribe","topic":T}
          {"op":"set_param","node":N,"param":P,"value":V}
          {"op":"list_params","node":N}
  server: {"op":"message","topic":T,"stamp_ns":S,"type":K,"data":...}
          {"op":"param_ack","node":N,"param":P,"value":V}
          {"op":"params","node":N,"params":{...}}
          {"op":"error","reason":R}

Image and saliency payloads travel as base64 PNG; geometric messages as
plain JSON fields. Each session is an ordinary bus node whose
subscriptions hold at most 4 frames per topic (drop-oldest), so a slow
browser can never stall the pipeline. Parameter changes ride the bus as
ParamUpdate messages on /params and are acknowledged by the target node
on /param_ack.
"""

from __future__ import annotations

import asyncio
import base64
import itertools
import json
import os
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from . import messages as m
from .messages import Header, ParamUpdate, TrackPhase
from .nodes import NODE_KINDS
from .png import encode_png
from .runner import PARAM_ACK_TOPIC, PARAMS_TOPIC, PipelineRuntime

SESSION_FRAME_BUDGET = 4
ACK_TIMEOUT_S = 2.0

_session_ids = itertools.count(1)


def _bbox_json(b):
    return {"x": b.x, "y": b.y, "w": b.w, "h": b.h}


def message_data(msg):
    if isinstance(msg, (m.ImageMsg, m.SaliencyMap)):
        return {"png": base64.b64encode(encode_png(msg)).decode("ascii")}
    if isinstance(msg, m.PointFoa):
        return {"x": msg.x, "y": msg.y, "score": msg.score}
    if isinstance(msg, m.ObjectFoa):
        return {"bbox": _bbox_json(msg.bbox), "score": msg.score}
    if isinstance(msg, m.RegionFoa):
        return {"bbox": _bbox_json(msg.bbox), "score": msg.score,
                "mask": base64.b64encode(msg.mask).decode("ascii")}
    if isinstance(msg, m.TrackState):
        return {"state": TrackPhase(msg.state).name.lower(),
                "bbox": _bbox_json(msg.bbox), "confidence": msg.confidence}
    if isinstance(msg, m.InhibitRegion):
        return {"bbox": _bbox_json(msg.bbox), "decay_frames": msg.decay_frames}
    if isinstance(msg, m.TopDownGain):
        return {"gains": list(msg.gains)}
    if isinstance(msg, m.ParamUpdate):
        return {"node": msg.node, "param": msg.param, "value": msg.value}
    return {}


class GatewaySession:
    def __init__(self, runtime: PipelineRuntime):
        self.runtime = runtime
        self.node = runtime.bus.node(f"ws#{next(_session_ids)}")
        self.subs = {}
        self.ack_sub = runtime.bus.subscribe(self.node, PARAM_ACK_TOPIC,
                                             m.PARAM_UPDATE, capacity=64)
        self.param_pub = runtime.bus.advertise(self.node, PARAMS_TOPIC,
                                               m.PARAM_UPDATE)
        self.pending = {}  # (node, param) -> deadline
        self.outbox = []

    def _error(self, reason: str):
        self.outbox.append({"op": "error", "reason": reason})

    def handle(self, op: dict):
        kind = op.get("op")
        if kind == "subscribe":
            topic = op.get("topic", "")
            bound = self.runtime.bus.topics()
            if topic in self.subs:
                return
            if topic not in bound:
                self._error(f"unknown topic {topic!r}")
                return
            self.subs[topic] = self.runtime.bus.subscribe(
                self.node, topic, bound[topic], capacity=SESSION_FRAME_BUDGET)
        elif kind == "unsubscribe":
            sub = self.subs.pop(op.get("topic", ""), None)
            if sub is not None:
                self.runtime.bus.unsubscribe(sub)
        elif kind == "set_param":
            self._set_param(op)
        elif kind == "list_params":
            name = op.get("node", "")
            inst = self.runtime.by_name.get(name)
            if inst is None:
                self._error(f"unknown node {name!r}")
            else:
                self.outbox.append({"op": "params", "node": name,
                                    "params": dict(inst.node.params)})
        else:
            self._error(f"unknown op {kind!r}")

    def _set_param(self, op: dict):
        name = op.get("node", "")
        param = op.get("param", "")
        value = op.get("value")
        inst = self.runtime.by_name.get(name)
        if inst is None:
            self._error(f"unknown node {name!r}")
            return
        if param not in inst.node.params:
            self._error(f"unknown param {param!r} for node {name!r}")
            return
        if not isinstance(value, (int, float, bool, str)):
            self._error(f"param value must be a scalar, got {type(value).__name__}")
            return
        self.param_pub.publish(ParamUpdate(Header(frame_id=self.node.name),
                                           name, param, value))
        self.pending[(name, param)] = time.monotonic() + ACK_TIMEOUT_S
        # live pipelines drain /params continuously; a lockstep-driven
        # runtime (tests) applies them on the next drain
        if not self.runtime._running:
            self.runtime.drain()

    def flush(self) -> list:
        out, self.outbox = self.outbox, []
        while True:
            got = self.node.try_pop()
            if got is None:
                break
            sub, msg = got
            if sub is self.ack_sub:
                key = (msg.node, msg.param)
                if key in self.pending:
                    del self.pending[key]
                    out.append({"op": "param_ack", "node": msg.node,
                                "param": msg.param, "value": msg.value})
                continue
            out.append({"op": "message", "topic": sub.topic,
                        "stamp_ns": msg.header.stamp_ns,
                        "type": m.TYPE_NAMES[sub.type_id],
                        "data": message_data(msg)})
        now = time.monotonic()
        for key, deadline in list(self.pending.items()):
            if now >= deadline:
                del self.pending[key]
                out.append({"op": "error",
                            "reason": f"param_ack timeout for {key[0]}.{key[1]}"})
        return out

    def close(self):
        for sub in list(self.subs.values()):
            self.runtime.bus.unsubscribe(sub)
        self.runtime.bus.unsubscribe(self.ack_sub)


def resolve_ui_dir(explicit=None):
    for candidate in (explicit, os.environ.get("ATTBUS_UI_DIR")):
        if candidate and Path(candidate).is_dir():
            return Path(candidate)
    return Path(__file__).parent / "static"


def build_graph(runtime: PipelineRuntime) -> dict:
    topics = [{"name": t, "type": m.TYPE_NAMES[tid]}
              for t, tid in sorted(runtime.bus.topics().items())]
    nodes = [{"name": i.decl.name, "kind": i.decl.kind} for i in runtime.instances]
    edges = []
    for inst in runtime.instances:
        for t in inst.decl.pubs:
            edges.append({"from": inst.decl.name, "to": t})
        for t in inst.decl.subs:
            edges.append({"from": t, "to": inst.decl.name})
    return {"nodes": nodes, "topics": topics, "edges": edges}


def build_gateway_app(runtime: PipelineRuntime, ui_dir=None) -> FastAPI:
    app = FastAPI(title="attbus gateway")
    static_dir = resolve_ui_dir(ui_dir)

    @app.get("/topics")
    def topics():
        return [{"name": t, "type": m.TYPE_NAMES[tid]}
                for t, tid in sorted(runtime.bus.topics().items())]

    @app.get("/nodes")
    def nodes():
        return [{"name": i.decl.name, "kind": i.decl.kind,
                 "params": dict(i.node.params)} for i in runtime.instances]

    @app.get("/graph")
    def graph():
        return build_graph(runtime)

    @app.get("/")
    def index():
        index_file = static_dir / "index.html"
        if index_file.is_file():
            return FileResponse(index_file)
        return PlainTextResponse("attbus gateway: no UI assets installed")

    @app.get("/ui/{path:path}")
    def ui_asset(path: str):
        target = (static_dir / path).resolve()
        if static_dir.resolve() not in target.parents or not target.is_file():
            return JSONResponse({"error": "not found"}, status_code=404)
        return FileResponse(target)

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        session = GatewaySession(runtime)
        try:
            while True:
                try:
                    text = await asyncio.wait_for(websocket.receive_text(),
                                                  timeout=0.02)
                    try:
                        op = json.loads(text)
                        if not isinstance(op, dict):
                            raise ValueError("op must be an object")
                    except ValueError as e:
                        session._error(f"malformed op: {e}")
                    else:
                        session.handle(op)
                except asyncio.TimeoutError:
                    pass
                for out in session.flush():
                    await websocket.send_json(out)
        except WebSocketDisconnect:
            pass
        finally:
            session.close()

    return app
