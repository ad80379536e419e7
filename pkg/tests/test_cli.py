import threading
import time

import pytest

from attbus import messages as m
from attbus.broker import BrokerServer, TcpBusClient
from attbus.cli import main
from attbus.messages import Header, PointFoa

from _pipelines import attention_only_config


def write_cfg(tmp_path, text, name="p.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_exit_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, "node a no_such_kind\nend\n")
    assert main(["run", bad]) == 1
    assert "config error" in capsys.readouterr().err

    missing_dir = write_cfg(
        tmp_path, "node feeder image_sequence\n  param dir /no/such\n  pub /image\nend\n")
    assert main(["run", missing_dir]) == 2
    assert "feeder" in capsys.readouterr().err


def test_run_small_scene_clean_exit(tmp_path):
    cfg = write_cfg(tmp_path, attention_only_config(frames=5))
    assert main(["run", cfg, "--duration", "10"]) == 0


def test_eval_report_two_rows(tmp_path, capsys):
    cfg = write_cfg(tmp_path, attention_only_config(frames=6))
    report = tmp_path / "report.csv"
    rc = main(["eval", cfg, "--algorithms", "attention_itti,attention_spectral",
               "--report", str(report)])
    assert rc == 0
    lines = report.read_text().splitlines()
    assert lines[0].startswith("algorithm,")
    assert len(lines) == 3
    out = capsys.readouterr().out
    assert "attention_itti" in out and "attention_spectral" in out


def test_eval_rejects_empty_algorithms(tmp_path, capsys):
    cfg = write_cfg(tmp_path, attention_only_config(frames=2))
    assert main(["eval", cfg, "--algorithms", ""]) == 2


def test_eval_with_gt_file(tmp_path):
    cfg = write_cfg(tmp_path, attention_only_config(frames=4))
    gt = tmp_path / "gt.csv"
    gt.write_text("0,30,118,20,20\n1,33,118,20,20\n2,36,118,20,20\n3,39,118,20,20\n")
    report = tmp_path / "r.csv"
    assert main(["eval", cfg, "--gt", str(gt), "--algorithms", "attention_itti",
                 "--report", str(report)]) == 0
    assert len(report.read_text().splitlines()) == 2


def test_record_writes_bag(tmp_path):
    from attbus.bag import read_bag

    cfg = write_cfg(tmp_path, attention_only_config(frames=4))
    bag = tmp_path / "out.bag"
    assert main(["record", cfg, "-o", str(bag), "--duration", "10",
                 "--topics", "/image,/foa"]) == 0
    topics = {r.topic for r in read_bag(bag)}
    assert topics == {"/image", "/foa"}


def test_topics_and_echo_against_broker(capsys):
    broker = BrokerServer("127.0.0.1:0")
    feeder = TcpBusClient(broker.address, name="feeder")
    pub = feeder.advertise("/foa", m.POINT_FOA)

    stop = threading.Event()

    def pump():
        i = 0
        while not stop.is_set():
            pub.publish(PointFoa(Header(stamp_ns=i), 1, 2, 0.5))
            i += 1
            time.sleep(0.02)

    t = threading.Thread(target=pump, daemon=True)
    t.start()
    try:
        assert main(["topics", "--broker", broker.address, "--wait", "0.3"]) == 0
        out = capsys.readouterr().out
        assert "/foa  PointFoa" in out

        assert main(["echo", "/foa", "--broker", broker.address, "--count", "3"]) == 0
        out = capsys.readouterr().out
        assert out.count("PointFoa") == 3
    finally:
        stop.set()
        t.join()
        feeder.close()
        broker.close()


def test_topics_no_broker(capsys):
    assert main(["topics", "--broker", "127.0.0.1:1"]) == 2
    assert "cannot reach broker" in capsys.readouterr().err


def test_replay_into_broker(tmp_path):
    from attbus.bag import BagWriter

    bag = tmp_path / "r.bag"
    with BagWriter(bag) as w:
        for i in range(3):
            w.append(i * 1000, "/foa", m.POINT_FOA, PointFoa(Header(stamp_ns=i), 7, 8, 0.25))

    broker = BrokerServer("127.0.0.1:0")
    sink = TcpBusClient(broker.address, name="sink")
    sink.subscribe("/foa", m.POINT_FOA)
    time.sleep(0.1)
    try:
        assert main(["replay", str(bag), "--broker", broker.address,
                     "--rate", "1000"]) == 0
        got = []
        while len(got) < 3:
            item = sink.pop(timeout=5.0)
            assert item is not None
            got.append(item[1])
        assert [g.header.stamp_ns for g in got] == [0, 1, 2]
        assert got[0].score == 0.25
    finally:
        sink.close()
        broker.close()


def test_run_with_broker_exposes_bus(tmp_path):
    cfg = write_cfg(tmp_path, attention_only_config(frames=200))
    seen = {}

    def probe():
        # give the pipeline a moment to come up, then watch /foa over TCP
        for _ in range(100):
            try:
                client = TcpBusClient("127.0.0.1:7521", name="probe")
                break
            except OSError:
                time.sleep(0.05)
        else:
            return
        client.subscribe("/foa", m.POINT_FOA)
        got = client.pop(timeout=5.0)
        if got is not None:
            seen["msg"] = got[1]
        client.close()

    t = threading.Thread(target=probe, daemon=True)
    t.start()
    rc = main(["run", cfg, "--duration", "4", "--broker", "127.0.0.1:7521"])
    t.join(timeout=5)
    assert rc == 0
    assert isinstance(seen.get("msg"), PointFoa)
