"""Ground-truth evaluation: wrap a pipeline, feed it deterministic input,
and score attention/tracking output against annotated boxes.

Frames align by stamp equality (sources stamp as frame_index * step), so
the metrics carry no hidden tolerance. run_comparison swaps only the
attention node between runs, keeping the input byte-identical.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

from . import messages as m
from .config import PipelineConfig, parse_config
from .errors import EmptyComparison, EmptyGroundTruth, OrderViolation, ParseError
from .messages import BoundingBox, TrackPhase, bbox_iou
from .nodes import NODE_KINDS
from .runner import PipelineRuntime
from .sources import stamp_step_ns


@dataclass
class GroundTruthSet:
    records: list  # [(frame_index, BoundingBox)], strictly increasing indices

    def __post_init__(self):
        last = -1
        for idx, _ in self.records:
            if idx <= last:
                raise OrderViolation(f"frame index {idx} not increasing")
            last = idx

    def as_dict(self) -> dict:
        return dict(self.records)

    def __len__(self):
        return len(self.records)


def load_ground_truth(path) -> GroundTruthSet:
    """CSV rows "frame_index,x,y,w,h"; a non-numeric first field on line 1
    is treated as a header."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [c.strip() for c in line.split(",")]
            if lineno == 1 and not _is_int(fields[0]):
                continue
            if len(fields) != 5:
                raise ParseError(f"expected 5 fields, got {len(fields)}", lineno)
            if not all(_is_int(c) for c in fields):
                raise ParseError(f"non-integer field in {line!r}", lineno)
            idx, x, y, w, h = (int(c) for c in fields)
            if w < 1 or h < 1:
                raise ParseError("box must be at least 1x1", lineno)
            if records and idx <= records[-1][0]:
                raise OrderViolation(
                    f"line {lineno}: frame index {idx} not increasing")
            records.append((idx, BoundingBox(x, y, w, h)))
    return GroundTruthSet(records)


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def ground_truth_from_messages(gts, stamp_step: int) -> GroundTruthSet:
    return GroundTruthSet(
        [(msg.header.stamp_ns // stamp_step, msg.bbox) for msg in gts])


@dataclass
class MetricsRow:
    algorithm: str
    foa_hit_rate: float
    mean_iou: float
    success_at_05: float
    frames_to_first_init: int | None
    frames: int


def compute_metrics(gt: GroundTruthSet, foas: dict, boxes: dict,
                    first_tracking_frame: int | None = None,
                    algorithm: str = "") -> MetricsRow:
    """foas: frame_index -> first PointFoa; boxes: frame_index -> BoundingBox.

    Missing predictions count as IoU 0 against the full ground-truth
    frame count; the FOA hit is point-in-box."""
    if len(gt) == 0:
        raise EmptyGroundTruth("no ground-truth records")
    gt_boxes = gt.as_dict()
    hits = 0
    iou_sum = 0.0
    successes = 0
    for idx, box in gt_boxes.items():
        foa = foas.get(idx)
        if foa is not None and box.x <= foa.x < box.x + box.w \
                and box.y <= foa.y < box.y + box.h:
            hits += 1
        pred = boxes.get(idx)
        if pred is not None:
            iou = bbox_iou(pred, box)
            iou_sum += iou
            if iou >= 0.5:
                successes += 1
    n = len(gt_boxes)
    return MetricsRow(algorithm, hits / n, iou_sum / n, successes / n,
                      first_tracking_frame, n)


@dataclass
class MetricsReport:
    rows: list

    CSV_HEADER = "algorithm,foa_hit_rate,mean_iou,success_at_05,frames_to_first_init,frames"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            init = "" if r.frames_to_first_init is None else str(r.frames_to_first_init)
            lines.append(f"{r.algorithm},{r.foa_hit_rate:.6f},{r.mean_iou:.6f},"
                         f"{r.success_at_05:.6f},{init},{r.frames}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        headers = self.CSV_HEADER.split(",")
        cells = [headers]
        for r in self.rows:
            init = "-" if r.frames_to_first_init is None else str(r.frames_to_first_init)
            cells.append([r.algorithm, f"{r.foa_hit_rate:.4f}", f"{r.mean_iou:.4f}",
                          f"{r.success_at_05:.4f}", init, str(r.frames)])
        widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
        lines = []
        for j, row in enumerate(cells):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if j == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


ATTENTION_KINDS = ("attention_itti", "attention_spectral")

EVAL_TOPICS = ("/foa", "/object_foa", "/track_state", "/gt")


def _swap_attention(cfg: PipelineConfig, kind: str) -> PipelineConfig:
    out = copy.deepcopy(cfg)
    targets = [n for n in out.nodes if n.kind in ATTENTION_KINDS]
    if len(targets) != 1:
        raise EmptyComparison(
            f"config must contain exactly one attention node, found {len(targets)}")
    node = targets[0]
    node.kind = kind
    schema = NODE_KINDS[kind].params
    node.params = {k: v for k, v in node.params.items() if k in schema}
    max_in = len(NODE_KINDS[kind].inputs)
    node.subs = node.subs[:max_in]
    node.syncs = [s for s in node.syncs if all(t in node.subs for t in s.topics)]
    return out


def _source_stamp_step(cfg: PipelineConfig) -> int:
    for n in cfg.nodes:
        if n.kind in ("synthetic_scene", "image_sequence"):
            fps = n.params.get("fps", NODE_KINDS[n.kind].params["fps"])
            return stamp_step_ns(float(fps))
    return stamp_step_ns(30.0)


def collect_run_streams(collector, stamp_step: int):
    """First FOA per frame, predicted box per frame, first Tracking frame."""
    foas = {}
    for foa in collector.by_topic.get("/foa", []):
        foas.setdefault(foa.header.stamp_ns // stamp_step, foa)
    boxes = {}
    for obj in collector.by_topic.get("/object_foa", []):
        boxes.setdefault(obj.header.stamp_ns // stamp_step, obj.bbox)
    first_tracking = None
    for ts in collector.by_topic.get("/track_state", []):
        if ts.state == TrackPhase.TRACKING:
            first_tracking = ts.header.stamp_ns // stamp_step
            break
    return foas, boxes, first_tracking


def run_single(cfg: PipelineConfig, gt: GroundTruthSet | None,
               algorithm: str = "") -> MetricsRow:
    runtime = PipelineRuntime(cfg)
    collector = runtime.attach_collector(list(EVAL_TOPICS))
    runtime.run_lockstep()
    step = _source_stamp_step(cfg)
    if gt is None:
        gt = ground_truth_from_messages(collector.by_topic.get("/gt", []), step)
    foas, boxes, first_tracking = collect_run_streams(collector, step)
    return compute_metrics(gt, foas, boxes, first_tracking, algorithm)


def run_comparison(base_config, algorithms, gt: GroundTruthSet | None = None)\
        -> MetricsReport:
    """Identical pipeline once per attention algorithm; one row each."""
    if isinstance(base_config, str):
        base_config = parse_config(base_config)
    if not algorithms:
        raise EmptyComparison("no algorithms given")
    for kind in algorithms:
        if kind not in ATTENTION_KINDS:
            raise EmptyComparison(f"{kind!r} is not an attention node kind")
    rows = []
    for kind in algorithms:
        cfg = _swap_attention(base_config, kind)
        rows.append(run_single(cfg, gt, algorithm=kind))
    return MetricsReport(rows)
