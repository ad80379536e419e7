"""attbus command line: run, record, replay, eval, serve, topics, echo.

Exit codes: 0 success, 1 configuration error, 2 runtime failure. The
broker address resolves from --broker, then ATTBUS_BROKER, then
127.0.0.1:7447.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import messages as m
from .bag import ReplaySession
from .broker import DEFAULT_ADDRESS, BrokerServer, TcpBusClient
from .config import parse_config
from .errors import AttbusError, ConfigError, OrderViolation, ParseError
from .evalharness import load_ground_truth, run_comparison
from .runner import NodeFailure, PipelineRuntime

log = logging.getLogger("attbus.cli")


def resolve_broker(flag: str | None) -> str:
    return flag or os.environ.get("ATTBUS_BROKER") or DEFAULT_ADDRESS


def _load_config(path):
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return None
    try:
        return parse_config(text)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return None


def _build_runtime(cfg, broker_flag):
    runtime = PipelineRuntime(cfg)
    broker = None
    address = broker_flag or os.environ.get("ATTBUS_BROKER")
    if address:
        broker = BrokerServer(address, bus=runtime.bus)
        print(f"broker listening on {broker.address}")
    return runtime, broker


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    try:
        runtime, broker = _build_runtime(cfg, args.broker)
    except (NodeFailure, AttbusError) as e:
        print(f"startup failed: {e}", file=sys.stderr)
        return 2
    rc = runtime.run_threaded(duration=args.duration)
    if broker:
        broker.close()
    for failure in runtime.failures:
        print(f"runtime failure: {failure}", file=sys.stderr)
    return rc


def cmd_record(args) -> int:
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    topics = [t for t in (args.topics or "").split(",") if t] or None
    try:
        runtime, broker = _build_runtime(cfg, args.broker)
        recorder = runtime.attach_recorder(args.output, topics, wall_clock=True)
    except (NodeFailure, AttbusError) as e:
        print(f"startup failed: {e}", file=sys.stderr)
        return 2
    rc = runtime.run_threaded(duration=args.duration)
    if broker:
        broker.close()
    print(f"recorded {recorder.writer.records} messages to {args.output}")
    return rc


def cmd_replay(args) -> int:
    address = resolve_broker(args.broker)
    try:
        client = TcpBusClient(address, name="replay")
    except OSError as e:
        print(f"cannot reach broker at {address}: {e}", file=sys.stderr)
        return 2
    pubs = {}

    def publish(topic, type_id, msg, frame):
        pub = pubs.get(topic)
        if pub is None:
            pub = client.advertise(topic, type_id)
            pubs[topic] = pub
        pub.publish_frame(frame)

    session = ReplaySession(args.bag, rate=args.rate, loop=args.loop)
    try:
        session.run(publish)
    except AttbusError as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    gt = None
    if args.gt:
        try:
            gt = load_ground_truth(args.gt)
        except (ParseError, OrderViolation, OSError) as e:
            print(f"ground truth error: {e}", file=sys.stderr)
            return 1
    algorithms = [a for a in args.algorithms.split(",") if a]
    try:
        report = run_comparison(cfg, algorithms, gt)
    except AttbusError as e:
        print(f"eval failed: {e}", file=sys.stderr)
        return 2
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="") as f:
            f.write(report.to_csv())
    print(report.to_table(), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import build_gateway_app

    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    try:
        runtime, broker = _build_runtime(cfg, args.broker)
    except (NodeFailure, AttbusError) as e:
        print(f"startup failed: {e}", file=sys.stderr)
        return 2
    app = build_gateway_app(runtime, ui_dir=args.ui_dir)
    runtime.start()
    try:
        uvicorn.run(app, host=args.host, port=args.http, log_level="warning")
    except KeyboardInterrupt:
        pass
    finally:
        runtime.stop()
        if broker:
            broker.close()
    return 0


def cmd_topics(args) -> int:
    address = resolve_broker(args.broker)
    try:
        client = TcpBusClient(address, name="topics")
    except OSError as e:
        print(f"cannot reach broker at {address}: {e}", file=sys.stderr)
        return 2
    time.sleep(args.wait)
    topics = client.topics()
    client.close()
    for name in sorted(topics):
        print(f"{name}  {m.TYPE_NAMES[topics[name]]}")
    return 0


def cmd_echo(args) -> int:
    address = resolve_broker(args.broker)
    try:
        client = TcpBusClient(address, name="echo")
    except OSError as e:
        print(f"cannot reach broker at {address}: {e}", file=sys.stderr)
        return 2
    deadline = time.monotonic() + args.wait
    type_id = None
    while time.monotonic() < deadline:
        type_id = client.topics().get(args.topic)
        if type_id is not None:
            break
        time.sleep(0.05)
    if type_id is None:
        print(f"topic {args.topic} not advertised at {address}", file=sys.stderr)
        client.close()
        return 2
    client.subscribe(args.topic, type_id)
    count = 0
    try:
        while args.count == 0 or count < args.count:
            got = client.pop(timeout=0.25)
            if got is None:
                if client.closed:
                    break
                continue
            _, msg = got
            print(msg)
            count += 1
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attbus")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_broker(p):
        p.add_argument("--broker", default=None, metavar="HOST:PORT")
        return p

    p = with_broker(sub.add_parser("run", help="run a pipeline config"))
    p.add_argument("config")
    p.add_argument("--duration", type=float, default=None, metavar="S")
    p.set_defaults(fn=cmd_run)

    p = with_broker(sub.add_parser("record", help="run and record topics to a bag"))
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--topics", default="", metavar="T1,T2")
    p.add_argument("--duration", type=float, default=None, metavar="S")
    p.set_defaults(fn=cmd_record)

    p = with_broker(sub.add_parser("replay", help="publish a bag to a broker"))
    p.add_argument("bag")
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--loop", action="store_true")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("eval", help="compare attention algorithms against ground truth")
    p.add_argument("config")
    p.add_argument("--gt", default=None, metavar="FILE")
    p.add_argument("--algorithms", required=True, metavar="K1,K2")
    p.add_argument("--report", default=None, metavar="FILE")
    p.set_defaults(fn=cmd_eval)

    p = with_broker(sub.add_parser("serve", help="run a pipeline with the web gateway"))
    p.add_argument("config")
    p.add_argument("--http", type=int, required=True, metavar="PORT")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=cmd_serve)

    p = with_broker(sub.add_parser("topics", help="list topics known to a broker"))
    p.add_argument("--wait", type=float, default=0.5)
    p.set_defaults(fn=cmd_topics)

    p = with_broker(sub.add_parser("echo", help="print messages from a topic"))
    p.add_argument("topic")
    p.add_argument("--count", type=int, default=0, help="stop after N messages (0 = forever)")
    p.add_argument("--wait", type=float, default=2.0)
    p.set_defaults(fn=cmd_echo)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ATTBUS_LOG", "WARNING"))
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
