import json
from pathlib import Path

import pytest

from iotrace.cli import main
from iotrace.core import DeviceKey, beacon_hex, derive_beacon

DATA = Path(__file__).parent / "data"
CONFIG = {"seed": 3, "duration": 3600, "slot_len": 300,
          "totems": [{"id": "T-0001", "x": 0, "y": 0, "radio_range": 10},
                     {"id": "T-0002", "x": 40, "y": 0, "radio_range": 10}],
          "devices": {"count": 6, "mobility": {"dwell_mean": 600}},
          "infections": [{"device": 0, "diagnosis_time": 3000}],
          "adversary": {"targets": [1, 2]}}


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(CONFIG))
    return p


def test_help_documents_formats(capsys):
    with pytest.raises(SystemExit) as e:
        run_cli("reconcile", "--help")
    assert e.value.code == 0
    text = capsys.readouterr().out
    for name in ("records.jsonl", "positives.json", "published.json", "eavesdrop.jsonl", "totems.json"):
        assert name in text


def test_simulate_writes_artifacts(config, tmp_path):
    out = tmp_path / "run"
    assert run_cli("simulate", "--config", config, "--out", out) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["cost"]["tx_bytes_per_min"] == 1920
    assert (out / "published-000.json").exists() and (out / "records.jsonl").exists()


def test_simulate_refuses_nonempty_dir(config, tmp_path, capsys):
    out = tmp_path / "run"
    out.mkdir()
    (out / "junk").write_text("x")
    assert run_cli("simulate", "--config", config, "--out", out) == 2
    assert "--overwrite" in capsys.readouterr().err
    assert run_cli("simulate", "--config", config, "--out", out, "--overwrite") == 0


def test_simulate_missing_field(tmp_path, capsys):
    bad = dict(CONFIG)
    bad.pop("duration")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(bad))
    assert run_cli("simulate", "--config", p, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "duration" in err and "c.json" in err


def test_simulate_unreadable_config(tmp_path):
    assert run_cli("simulate", "--config", tmp_path / "nope.json", "--out", tmp_path / "o") == 2


def test_simulate_determinism_and_overrides(config, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert run_cli("simulate", "--config", config, "--out", d, "--seed", 9, "--mode", "decentralized") == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()
    assert json.loads((a / "config.json").read_text())["mode"] == "decentralized"
    assert run_cli("simulate", "--config", config, "--out", c, "--seed", 10) == 0
    assert (a / "records.jsonl").read_bytes() != (c / "records.jsonl").read_bytes()


def test_sweep(config, tmp_path):
    out = tmp_path / "sweep"
    assert run_cli("simulate", "--config", config, "--out", out, "--sweep", "seeds=1..3", "--jobs", 1) == 0
    assert sorted(p.name for p in out.iterdir()) == ["seed-1", "seed-2", "seed-3"]
    assert run_cli("simulate", "--config", config, "--out", tmp_path / "x", "--sweep", "seeds=5..1") == 2


def published_set(path):
    return set(json.loads(Path(path).read_text())["beacons"])


@pytest.mark.parametrize("eps", [0, 1])
def test_reconcile_golden(tmp_path, eps):
    out = tmp_path / "pub.json"
    assert run_cli("reconcile", "--records", DATA / "golden_records.jsonl", "--positives",
                   DATA / "golden_positives.json", "--epsilon", eps, "--out", out) == 0
    assert published_set(out) == set(json.loads((DATA / f"golden_published_eps{eps}.json").read_text()))


def test_reconcile_empty_records(tmp_path):
    (tmp_path / "r.jsonl").write_text("")
    out = tmp_path / "pub.json"
    assert run_cli("reconcile", "--records", tmp_path / "r.jsonl", "--positives", DATA / "golden_positives.json",
                   "--out", out) == 0
    pos = {e["beacon"] for e in json.loads((DATA / "golden_positives.json").read_text())}
    assert published_set(out) == pos


def test_reconcile_duplicates_same_output(tmp_path):
    lines = (DATA / "golden_records.jsonl").read_text().splitlines()
    dedup = tmp_path / "dedup.jsonl"
    dedup.write_text("\n".join(dict.fromkeys(lines)) + "\n")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("reconcile", "--records", DATA / "golden_records.jsonl", "--positives",
            DATA / "golden_positives.json", "--out", a, "--seed", 4)
    run_cli("reconcile", "--records", dedup, "--positives", DATA / "golden_positives.json", "--out", b, "--seed", 4)
    assert a.read_bytes() == b.read_bytes()


def test_reconcile_malformed_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text((DATA / "golden_records.jsonl").read_text() + "{oops\n")
    assert run_cli("reconcile", "--records", bad, "--positives", DATA / "golden_positives.json") == 2
    assert "bad.jsonl:12" in capsys.readouterr().err


def test_reconcile_empty_positives(tmp_path):
    (tmp_path / "p.json").write_text("[]")
    assert run_cli("reconcile", "--records", DATA / "golden_records.jsonl", "--positives", tmp_path / "p.json") == 2


def test_reconcile_with_fraud_filter(tmp_path):
    recs = DATA / "replay_records.jsonl"
    injected = set(json.loads((DATA / "replay_injected.json").read_text()))
    rows = [json.loads(line) for line in recs.read_text().splitlines()]
    hit = next(r for r in rows if r["totem"] == "T-FAR" and r["beacon"] in injected)
    positives = tmp_path / "p.json"
    positives.write_text(json.dumps([{"slot": hit["slot"], "beacon": hit["beacon"]}]))
    plain, filtered = tmp_path / "plain.json", tmp_path / "filtered.json"
    run_cli("reconcile", "--records", recs, "--positives", positives, "--out", plain)
    run_cli("reconcile", "--records", recs, "--positives", positives, "--out", filtered,
            "--totems", DATA / "replay_totems.json")
    assert len(published_set(plain)) > 1
    assert published_set(filtered) == {hit["beacon"]}


def test_detect_fraud_honest(tmp_path):
    out = tmp_path / "f.json"
    assert run_cli("detect-fraud", "--records", DATA / "honest_records.jsonl", "--totems",
                   DATA / "honest_totems.json", "--slot-len", 60, "--out", out) == 0
    assert json.loads(out.read_text()) == []


def test_detect_fraud_replay(tmp_path):
    out = tmp_path / "f.json"
    assert run_cli("detect-fraud", "--records", DATA / "replay_records.jsonl", "--totems",
                   DATA / "replay_totems.json", "--out", out) == 0
    assert json.loads(out.read_text()) == json.loads((DATA / "replay_injected.json").read_text())


def test_detect_fraud_missing_position(tmp_path, capsys):
    totems = tmp_path / "t.json"
    totems.write_text(json.dumps([{"id": "T-NEAR", "x": 0, "y": 0}]))
    assert run_cli("detect-fraud", "--records", DATA / "replay_records.jsonl", "--totems", totems) == 2
    assert "T-FAR" in capsys.readouterr().err


def test_match(tmp_path):
    key = DeviceKey(bytes(range(16)))
    pub = tmp_path / "pub.json"
    pub.write_text(json.dumps({"published_at": 0,
                               "beacons": [beacon_hex(derive_beacon(key, s)) for s in (8, 9, 10)]}))
    out = tmp_path / "rep.json"
    assert run_cli("match", "--key", key.key.hex(), "--published", pub, "--now", 6010,
                   "--threshold", 1200, "--out", out) == 0
    assert json.loads(out.read_text()) == {"matched_slots": [8, 9, 10], "exposure_seconds": 1800.0,
                                           "notified": True}
    assert run_cli("match", "--key", "zz", "--published", pub, "--now", 1) == 2


def test_attack_files(config, tmp_path):
    run_dir = tmp_path / "run"
    run_cli("simulate", "--config", config, "--out", run_dir)
    targets = tmp_path / "targets.json"
    log = [json.loads(line) for line in (run_dir / "eavesdrop.jsonl").read_text().splitlines()]
    targets.write_text(json.dumps(sorted({e["payload"] for e in log})[:3]))
    totems = tmp_path / "totems.json"
    totems.write_text(json.dumps(CONFIG["totems"]))
    outs = []
    for name in ("a.json", "b.json"):
        outs.append(tmp_path / name)
        assert run_cli("attack", "--eavesdrop", run_dir / "eavesdrop.jsonl", "--published",
                       *sorted(run_dir.glob("published-*.json")), "--targets", targets, "--totems", totems,
                       "--slot-len", 300, "--out", outs[-1]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    report = json.loads(outs[0].read_text())
    assert set(report) == {"health_status", "trajectory", "wire_published_overlap"}


def test_attack_needs_ranges(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    (tmp_path / "t.json").write_text("[]")
    (tmp_path / "p.json").write_text('{"published_at": 0, "beacons": []}')
    (tmp_path / "g.json").write_text('[{"id": "T", "x": 0, "y": 0}]')
    assert run_cli("attack", "--eavesdrop", tmp_path / "e.jsonl", "--published", tmp_path / "p.json",
                   "--targets", tmp_path / "t.json", "--totems", tmp_path / "g.json") == 2
