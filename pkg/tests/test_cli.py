import csv
import json
import math

import numpy as np
import pytest

from kcapture.cli import main
from kcapture.scenario import Scenario, random_interior_scenario, save_scenario


def _hexagon(r=3.0):
    ang = np.linspace(0, 2 * math.pi, 6, endpoint=False) + 0.1
    return r * np.column_stack([np.cos(ang), np.sin(ang)])


@pytest.fixture
def scenario_file(tmp_path):
    sc = Scenario(k=2, pursuers=_hexagon(), evader=np.zeros(2), name="hex")
    path = tmp_path / "hex.json"
    save_scenario(sc, path)
    return path


def test_simulate_valid_scenario(tmp_path, scenario_file, capsys):
    out = tmp_path / "out"
    assert main(["simulate", str(scenario_file), "--out-dir", str(out), "--svg"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["outcome"] == "k_captured"
    assert report["audit"]["ok"]
    svg = (out / "trajectory.svg").read_text()
    for gid in ("agent-e", "agent-p0", "agent-p5", "khull"):
        assert f'id="{gid}"' in svg
    assert json.loads(capsys.readouterr().out)["outcome"] == "k_captured"


def test_simulate_helly_violation_exits_1(tmp_path, capsys):
    sc = Scenario(k=3, pursuers=_hexagon(), evader=np.zeros(2))
    path = tmp_path / "bad.json"
    save_scenario(sc, path)
    assert main(["simulate", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    assert "ceil(n/(m+1))" in capsys.readouterr().err


def test_simulate_separation_violation_lists_pair(tmp_path, capsys):
    P = _hexagon()
    P[4] = P[2]
    path = tmp_path / "sep.json"
    save_scenario(Scenario(k=2, pursuers=P, evader=np.zeros(2)), path)
    assert main(["simulate", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    assert "p2-p4" in capsys.readouterr().err


def test_simulate_missing_file_exits_3(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 3


def test_simulate_bad_schema_exits_1(tmp_path):
    path = tmp_path / "old.json"
    path.write_text(json.dumps({"schema_version": 99, "k": 1}))
    assert main(["simulate", str(path), "--out-dir", str(tmp_path / "o")]) == 1


def test_simulate_traces_are_byte_identical(tmp_path, scenario_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", str(scenario_file), "--out-dir", str(a), "--seed", "5"]) == 0
    assert main(["simulate", str(scenario_file), "--out-dir", str(b), "--seed", "5"]) == 0
    assert (a / "trace.json").read_bytes() == (b / "trace.json").read_bytes()


def test_khull_polygon_and_depth(tmp_path, capsys):
    ang = 2 * math.pi * np.arange(5) / 5
    path = tmp_path / "pts.json"
    path.write_text(json.dumps(np.column_stack([np.cos(ang), np.sin(ang)]).tolist()))
    assert main(["khull", str(path), "--k", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["vertices"]) == 5
    assert main(["khull", str(path), "--k", "2", "--query", "0", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"depth": 2, "exact": True, "in_interior": True}
    assert main(["khull", str(path), "--k", "3"]) == 1


def test_khull_degenerate_reports_point(tmp_path, capsys):
    path = tmp_path / "pts.json"
    path.write_text(json.dumps({"points": [[1, 0], [-1, 0], [0, 1], [0, -1], [0, 0]]}))
    assert main(["khull", str(path), "--k", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["degenerate"] and out["vertices"] == [[0.0, 0.0]]


def test_beta_command(tmp_path, capsys):
    path = tmp_path / "pts.json"
    path.write_text(json.dumps([[1, 0], [0, 1], [-1, 0], [0, -1]]))
    assert main(["beta", str(path), "--k", "1", "--query", "0", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["beta_max"] == pytest.approx(math.pi / 4, abs=1e-9)
    assert main(["beta", str(path), "--k", "1", "--query", "5", "0"]) == 1


def test_batch_generator_spec(tmp_path):
    spec = {"count": 3, "kind": "interior", "n": [5, 7], "k": [2, 2], "seed": 1,
            "strategies": [{"kind": "greedy_maximin", "samples": 64}]}
    path = tmp_path / "gen.json"
    path.write_text(json.dumps(spec))
    out = tmp_path / "b"
    assert main(["batch", str(path), "--out-dir", str(out), "--svg", "--traces"]) == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert all(r["outcome"] == "k_captured" and float(r["ratio"]) <= 1.0 for r in rows)
    assert (out / "ratios.svg").exists()
    assert len(list((out / "traces").glob("*.trace.json"))) == 3


def test_batch_empty_generator(tmp_path):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps({"count": 0}))
    out = tmp_path / "b"
    assert main(["batch", str(path), "--out-dir", str(out)]) == 0
    report = json.loads((out / "batch_report.json").read_text())
    assert report["rows"] == [] and report["summary"]["runs"] == 0


def test_batch_corrupted_scenario_isolated(tmp_path):
    src = tmp_path / "scs"
    src.mkdir()
    rng = np.random.default_rng(2)
    for i in range(3):
        save_scenario(random_interior_scenario(rng, 6, 2, name=f"ok{i}"), src / f"ok{i}.json")
    (src / "zz_broken.json").write_text("{\"k\": ")
    out = tmp_path / "b"
    assert main(["batch", str(src), "--out-dir", str(out)]) == 2
    with open(out / "summary.csv") as fh:
        rows = {r["scenario"]: r for r in csv.DictReader(fh)}
    assert rows["zz_broken"]["outcome"] == "invalid"
    assert all(rows[f"ok{i}"]["outcome"] == "k_captured" for i in range(3))


def test_audit_command(tmp_path, scenario_file, capsys):
    out = tmp_path / "o"
    main(["simulate", str(scenario_file), "--out-dir", str(out)])
    capsys.readouterr()
    assert main(["audit", str(out / "trace.json")]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    assert main(["audit", str(bad)]) == 1
