"""Node kinds: the pieces a pipeline config can instantiate.

A node's config subscriptions/publications map positionally onto the
kind's declared ports (optional ports may be omitted from the end); at
runtime, inbound dispatch is by message type. Kinds whose inputs must
arrive as a matched set declare a sync group over port indexes, which
the runner materializes with slop 0 unless the config provides its own
sync block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import messages as m
from .attention import (
    AttentionState,
    IttiConfig,
    apply_feedback,
    extract_region,
    itti_saliency,
    select_foa,
    spectral_residual,
)
from .imaging import gaussian_blur, resize_bilinear
from .messages import Header, TrackPhase
from .sources import SequenceSource, SyntheticScene
from .tracking import BridgeFsm, BridgePolicy, tracker_init, tracker_step

log = logging.getLogger("attbus.nodes")


class Node:
    """Base behavior: parameters apply generically, messages are ignored."""

    def __init__(self, name: str, params: dict, ctx):
        self.name = name
        self.params = params
        self.ctx = ctx

    def on_message(self, topic: str, msg):
        pass

    def on_sync(self, msgs: dict):
        pass

    def step(self) -> bool:
        """Source hook; returns False at end of stream."""
        return False

    def is_source(self) -> bool:
        return False

    def on_param(self, key: str, value) -> bool:
        """Apply one runtime parameter; returns False to reject."""
        if key not in self.params:
            return False
        self.params[key] = value
        return True


@dataclass
class KindSpec:
    factory: type
    params: dict
    inputs: list   # [(type_id, required)]
    outputs: list  # [(type_id, required)]
    sync_groups: list = field(default_factory=list)  # [tuple(port indexes)]


class ImageSequenceNode(Node):
    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        self.source = SequenceSource(params["dir"], params["pattern"],
                                     fps=params["fps"], loop=bool(params["loop"]),
                                     frame_id=name)

    def is_source(self):
        return True

    def pace_interval(self):
        return self.source.step_ns / 1e9

    def step(self):
        frame = self.source.next_frame()
        if frame is None:
            return False
        self.ctx.publish(0, frame)
        return True


def _parse_distractors(text: str):
    out = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        x, y, side, level = (int(float(v)) for v in chunk.split(","))
        out.append((x, y, side, level))
    return out


class SyntheticSceneNode(Node):
    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        p = params
        self.scene = SyntheticScene(
            int(p["w"]), int(p["h"]), side=int(p["side"]),
            pos=(p["x"], p["y"]), vel=(p["vx"], p["vy"]),
            background=int(p["background"]), level=int(p["level"]),
            distractors=_parse_distractors(p["distractors"]),
            noise=int(p["noise"]), seed=int(p["seed"]), fps=p["fps"],
            vanish_at=None if p["vanish_at"] < 0 else int(p["vanish_at"]),
            reappear_at=None if p["reappear_at"] < 0 else int(p["reappear_at"]),
            frame_id=name)
        self.frames = int(p["frames"])

    def is_source(self):
        return True

    def pace_interval(self):
        return self.scene.step_ns / 1e9

    def step(self):
        if self.frames and self.scene.frame_index >= self.frames:
            return False
        img, gt = self.scene.step()
        self.ctx.publish(0, img)
        if gt is not None and self.ctx.has_port(1):
            self.ctx.publish(1, gt)
        return True


class PreprocessGaussianNode(Node):
    def on_message(self, topic, msg):
        if isinstance(msg, m.ImageMsg):
            self.ctx.publish(0, gaussian_blur(msg, float(self.params["sigma"])))


class PreprocessResizeNode(Node):
    def on_message(self, topic, msg):
        if isinstance(msg, m.ImageMsg):
            self.ctx.publish(0, resize_bilinear(msg, int(self.params["w"]),
                                                int(self.params["h"])))


class AttentionIttiNode(Node):
    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        self.state = AttentionState()
        self._sync_gains()

    def _sync_gains(self):
        for ch in ("intensity", "color", "orientation", "motion"):
            self.state.gains[ch] = float(self.params[f"gain_{ch}"])

    def _cfg(self):
        channels = tuple(
            c.strip() for c in str(self.params["channels"]).split(",") if c.strip()
        )
        return IttiConfig(depth=int(self.params["depth"]),
                          out_level=int(self.params["out_level"]),
                          channels=channels)

    def on_param(self, key, value):
        if not super().on_param(key, value):
            return False
        if key.startswith("gain_"):
            self._sync_gains()
        return True

    def on_message(self, topic, msg):
        if isinstance(msg, m.ImageMsg):
            self.ctx.publish(0, itti_saliency(msg, self.state, self._cfg()))
        elif isinstance(msg, (m.TopDownGain, m.InhibitRegion)):
            apply_feedback(self.state, msg)
            if isinstance(msg, m.TopDownGain):
                for ch, g in self.state.gains.items():
                    self.params[f"gain_{ch}"] = g


class AttentionSpectralNode(Node):
    def on_message(self, topic, msg):
        if isinstance(msg, m.ImageMsg):
            self.ctx.publish(0, spectral_residual(msg))


class FoaSelectorNode(Node):
    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        self.state = AttentionState()

    def on_sync(self, msgs):
        img = _first_of(msgs, m.ImageMsg)
        sal = _first_of(msgs, m.SaliencyMap)
        foa = select_foa(sal, self.state, (img.width, img.height),
                         ior_radius=float(self.params["ior_radius"]),
                         ior_decay=float(self.params["ior_decay"]))
        self.ctx.publish(0, foa)

    def on_message(self, topic, msg):
        if isinstance(msg, m.InhibitRegion):
            apply_feedback(self.state, msg)


class RegionExtractorNode(Node):
    def on_sync(self, msgs):
        img = _first_of(msgs, m.ImageMsg)
        sal = _first_of(msgs, m.SaliencyMap)
        foa = _first_of(msgs, m.PointFoa)
        region, obj = extract_region(sal, foa, (img.width, img.height),
                                     threshold=float(self.params["threshold"]))
        self.ctx.publish(0, obj)
        if self.ctx.has_port(1):
            self.ctx.publish(1, region)


class TrackerNccNode(Node):
    FRAME_BUFFER = 8

    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        self.core = None
        self.frames = []

    def on_message(self, topic, msg):
        if isinstance(msg, m.ImageMsg):
            self.frames.append(msg)
            del self.frames[: -self.FRAME_BUFFER]
            if self.core is None:
                self.ctx.publish(0, m.TrackState(
                    Header(stamp_ns=msg.header.stamp_ns, frame_id=self.name),
                    TrackPhase.IDLE, m.BoundingBox(0, 0, 1, 1), 0.0))
            else:
                _, bbox, conf = tracker_step(self.core, msg)
                self.ctx.publish(0, m.TrackState(
                    Header(stamp_ns=msg.header.stamp_ns, frame_id=self.name),
                    TrackPhase.TRACKING, bbox, min(conf, 1.0)))
        elif isinstance(msg, m.ObjectFoa):
            self._init_from(msg)

    def _init_from(self, cmd: m.ObjectFoa):
        frame = None
        for f in reversed(self.frames):
            if f.header.stamp_ns == cmd.header.stamp_ns:
                frame = f
                break
        if frame is None and self.frames:
            frame = self.frames[-1]
        if frame is None:
            log.warning("%s: init request before any frame; ignored", self.name)
            return
        try:
            self.core = tracker_init(frame, cmd.bbox,
                                     margin=float(self.params["margin"]),
                                     update_rate=float(self.params["update_rate"]))
        except Exception as e:
            log.warning("%s: init failed: %s", self.name, e)
            return
        self.ctx.publish(0, m.TrackState(
            Header(stamp_ns=frame.header.stamp_ns, frame_id=self.name),
            TrackPhase.TRACKING, cmd.bbox, 1.0))

    def on_param(self, key, value):
        if key == "stop":
            self.core = None
            return True
        return super().on_param(key, value)


class BridgeNode(Node):
    def __init__(self, name, params, ctx):
        super().__init__(name, params, ctx)
        self.fsm = BridgeFsm(self._policy())
        self.last_conf = 0.0
        self.lost_stamp = -1  # frames at or before a Lost never re-init

    def _policy(self):
        p = self.params
        return BridgePolicy(theta_start=float(p["theta_start"]),
                            a_min=float(p["a_min"]), a_max=float(p["a_max"]),
                            theta_conf=float(p["theta_conf"]), k=int(p["k"]),
                            inhibit_frames=int(p["inhibit_frames"]))

    def on_param(self, key, value):
        if not super().on_param(key, value):
            return False
        self.fsm.policy = self._policy()
        return True

    def on_sync(self, msgs):
        img = _first_of(msgs, m.ImageMsg)
        foa = _first_of(msgs, m.ObjectFoa)
        if img.header.stamp_ns <= self.lost_stamp:
            return
        bbox = self.fsm.on_object_foa((img.width, img.height), foa)
        if bbox is not None:
            self.ctx.publish(0, m.ObjectFoa(
                Header(stamp_ns=img.header.stamp_ns, frame_id=self.name),
                bbox, foa.score))

    def on_message(self, topic, msg):
        if not isinstance(msg, m.TrackState):
            return
        if msg.state == TrackPhase.TRACKING:
            self.last_conf = msg.confidence
        lost_bbox = self.fsm.on_track_state(msg.state, msg.bbox, msg.confidence)
        if lost_bbox is not None:
            stamp = msg.header.stamp_ns
            self.lost_stamp = stamp
            self.ctx.publish(1, m.InhibitRegion(
                Header(stamp_ns=stamp, frame_id=self.name),
                lost_bbox, int(self.params["inhibit_frames"])))
            if self.ctx.has_port(2):
                self.ctx.publish(2, m.TrackState(
                    Header(stamp_ns=stamp, frame_id=self.name),
                    TrackPhase.LOST, lost_bbox, self.last_conf))
            self.ctx.send_param(str(self.params["tracker"]), "stop", True)


def _first_of(msgs: dict, cls):
    for msg in msgs.values():
        if isinstance(msg, cls):
            return msg
    raise KeyError(f"synchronized set lacks a {cls.__name__}")


NODE_KINDS = {
    "image_sequence": KindSpec(
        ImageSequenceNode,
        {"dir": "", "pattern": "*", "fps": 30.0, "loop": False},
        inputs=[], outputs=[(m.IMAGE, True)]),
    "synthetic_scene": KindSpec(
        SyntheticSceneNode,
        {"w": 256, "h": 256, "side": 20, "x": 10, "y": 10, "vx": 0.0, "vy": 0.0,
         "background": 128, "level": 255, "noise": 0, "seed": 0, "fps": 30.0,
         "frames": 0, "vanish_at": -1, "reappear_at": -1, "distractors": ""},
        inputs=[], outputs=[(m.IMAGE, True), (m.OBJECT_FOA, False)]),
    "preprocess_gaussian": KindSpec(
        PreprocessGaussianNode, {"sigma": 1.0},
        inputs=[(m.IMAGE, True)], outputs=[(m.IMAGE, True)]),
    "preprocess_resize": KindSpec(
        PreprocessResizeNode, {"w": 64, "h": 64},
        inputs=[(m.IMAGE, True)], outputs=[(m.IMAGE, True)]),
    "attention_itti": KindSpec(
        AttentionIttiNode,
        {"depth": 8, "out_level": 2,
         "channels": "intensity,color,orientation,motion",
         "gain_intensity": 1.0, "gain_color": 1.0, "gain_orientation": 1.0,
         "gain_motion": 1.0},
        inputs=[(m.IMAGE, True), (m.INHIBIT_REGION, False), (m.TOPDOWN_GAIN, False)],
        outputs=[(m.SALIENCY, True)]),
    "attention_spectral": KindSpec(
        AttentionSpectralNode, {},
        inputs=[(m.IMAGE, True)], outputs=[(m.SALIENCY, True)]),
    "foa_selector": KindSpec(
        FoaSelectorNode, {"ior_radius": 16.0, "ior_decay": 0.9},
        inputs=[(m.IMAGE, True), (m.SALIENCY, True), (m.INHIBIT_REGION, False)],
        outputs=[(m.POINT_FOA, True)],
        sync_groups=[(0, 1)]),
    "region_extractor": KindSpec(
        RegionExtractorNode, {"threshold": 0.7},
        inputs=[(m.IMAGE, True), (m.SALIENCY, True), (m.POINT_FOA, True)],
        outputs=[(m.OBJECT_FOA, True), (m.REGION_FOA, False)],
        sync_groups=[(0, 1, 2)]),
    "tracker_ncc": KindSpec(
        TrackerNccNode, {"margin": 0.5, "update_rate": 0.0},
        inputs=[(m.IMAGE, True), (m.OBJECT_FOA, False)],
        outputs=[(m.TRACK_STATE, True)]),
    "bridge": KindSpec(
        BridgeNode,
        {"theta_start": 0.6, "a_min": 0.001, "a_max": 0.25, "theta_conf": 0.5,
         "k": 5, "inhibit_frames": 30, "tracker": "tracker"},
        inputs=[(m.IMAGE, True), (m.OBJECT_FOA, True), (m.TRACK_STATE, True)],
        outputs=[(m.OBJECT_FOA, True), (m.INHIBIT_REGION, True),
                 (m.TRACK_STATE, False)],
        sync_groups=[(0, 1)]),
}
