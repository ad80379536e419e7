"""Line-oriented pipeline configuration.

    # comment
    node <name> <kind>
      param <key> <value>
      sub <topic>
      pub <topic>
      sync <topic> <topic> [...] slop <ns>
    end

Topics listed in a sync block are subscriptions; declaring them with an
explicit sub line as well is allowed. Values parse as int, float,
true/false, or string, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKind(ConfigError):
    pass


class DuplicateName(ConfigError):
    pass


@dataclass
class SyncDecl:
    topics: list
    slop_ns: int


@dataclass
class NodeDecl:
    name: str
    kind: str
    line: int
    params: dict = field(default_factory=dict)
    subs: list = field(default_factory=list)
    pubs: list = field(default_factory=list)
    syncs: list = field(default_factory=list)


@dataclass
class PipelineConfig:
    nodes: list = field(default_factory=list)

    def node(self, name: str) -> NodeDecl:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


def parse_scalar(token: str):
    if token.lower() == "true":
        return True
    if token.lower() == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def _check_topic(topic: str, line: int) -> str:
    if not topic.startswith("/") or len(topic) < 2 or " " in topic:
        raise ConfigSyntaxError(f"malformed topic {topic!r}", line)
    return topic


def parse_config(text: str, kinds: dict | None = None) -> PipelineConfig:
    """Parse and validate; every failure carries its line number."""
    if kinds is None:
        from .nodes import NODE_KINDS

        kinds = NODE_KINDS
    cfg = PipelineConfig()
    current: NodeDecl | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "node":
            if current is not None:
                raise ConfigSyntaxError("missing 'end' before new node", lineno)
            if len(tokens) != 3:
                raise ConfigSyntaxError("expected: node <name> <kind>", lineno)
            name, kind = tokens[1], tokens[2]
            if any(n.name == name for n in cfg.nodes):
                raise DuplicateName(f"node {name!r} already declared", lineno)
            if kind not in kinds:
                raise UnknownKind(f"unknown node kind {kind!r}", lineno)
            current = NodeDecl(name, kind, lineno)
            continue
        if current is None:
            raise ConfigSyntaxError(f"{keyword!r} outside a node block", lineno)
        if keyword == "end":
            if len(tokens) != 1:
                raise ConfigSyntaxError("'end' takes no arguments", lineno)
            _validate_node(current, kinds[current.kind], lineno)
            cfg.nodes.append(current)
            current = None
        elif keyword == "param":
            if len(tokens) < 3:
                raise ConfigSyntaxError("expected: param <key> <value>", lineno)
            key = tokens[1]
            schema = kinds[current.kind].params
            if key not in schema and key not in COMMON_PARAMS:
                raise ConfigSyntaxError(
                    f"unknown param {key!r} for kind {current.kind!r}", lineno
                )
            current.params[key] = parse_scalar(" ".join(tokens[2:]))
        elif keyword == "sub":
            if len(tokens) != 2:
                raise ConfigSyntaxError("expected: sub <topic>", lineno)
            current.subs.append(_check_topic(tokens[1], lineno))
        elif keyword == "pub":
            if len(tokens) != 2:
                raise ConfigSyntaxError("expected: pub <topic>", lineno)
            current.pubs.append(_check_topic(tokens[1], lineno))
        elif keyword == "sync":
            if len(tokens) < 5 or tokens[-2] != "slop":
                raise ConfigSyntaxError(
                    "expected: sync <topic> <topic> [...] slop <ns>", lineno
                )
            topics = [_check_topic(t, lineno) for t in tokens[1:-2]]
            if len(topics) < 2:
                raise ConfigSyntaxError("sync needs at least two topics", lineno)
            try:
                slop = int(tokens[-1])
            except ValueError:
                raise ConfigSyntaxError(f"bad slop value {tokens[-1]!r}", lineno) from None
            if slop < 0:
                raise ConfigSyntaxError("slop must be >= 0", lineno)
            current.syncs.append(SyncDecl(topics, slop))
            for t in topics:
                if t not in current.subs:
                    current.subs.append(t)
        else:
            raise ConfigSyntaxError(f"unknown directive {keyword!r}", lineno)
    if current is not None:
        raise ConfigSyntaxError(f"node {current.name!r} not closed with 'end'",
                                len(text.splitlines()) or 1)
    return cfg


COMMON_PARAMS = {"queue_capacity": 0}


def _validate_node(decl: NodeDecl, spec, lineno: int):
    n_in = len(spec.inputs)
    required_in = sum(1 for _, req in spec.inputs if req)
    if not required_in <= len(decl.subs) <= n_in:
        raise ConfigSyntaxError(
            f"kind {decl.kind!r} takes {required_in}..{n_in} subscriptions, "
            f"got {len(decl.subs)}", lineno)
    n_out = len(spec.outputs)
    required_out = sum(1 for _, req in spec.outputs if req)
    if not required_out <= len(decl.pubs) <= n_out:
        raise ConfigSyntaxError(
            f"kind {decl.kind!r} takes {required_out}..{n_out} publications, "
            f"got {len(decl.pubs)}", lineno)
    seen = set()
    for sync in decl.syncs:
        for t in sync.topics:
            if t in seen:
                raise ConfigSyntaxError(
                    f"topic {t} appears in two sync blocks", lineno)
            seen.add(t)


def format_config(cfg: PipelineConfig) -> str:
    """Inverse of parse_config (modulo comments); used to clone configs."""
    lines = []
    for n in cfg.nodes:
        lines.append(f"node {n.name} {n.kind}")
        for k, v in n.params.items():
            lines.append(f"  param {k} {v}")
        synced = {t for s in n.syncs for t in s.topics}
        for s in n.syncs:
            lines.append(f"  sync {' '.join(s.topics)} slop {s.slop_ns}")
        for t in n.subs:
            if t not in synced:
                lines.append(f"  sub {t}")
        for t in n.pubs:
            lines.append(f"  pub {t}")
        lines.append("end")
    return "\n".join(lines) + "\n"
