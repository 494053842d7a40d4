from __future__ import annotations

import csv
import json

import pytest

from mapfgen.assets import kiva_highway, kiva_map
from mapfgen.cli import main
from mapfgen.formats import serialize_highway, serialize_map


@pytest.fixture
def files(tmp_path):
    (tmp_path / "c.map").write_text("type octile\nheight 1\nwidth 3\nmap\n...\n")
    (tmp_path / "one.scen").write_text("mapfgen-scen v1\nagent a 0 0 2 0\n")
    (tmp_path / "headon.scen").write_text("mapfgen-scen v1\nagent a 0 0 2 0\nagent b 2 0 0 0\n")
    (tmp_path / "hw.txt").write_text("mapfgen-hwy v1\nedge 0 0 1 0\nedge 1 0 2 0\n")
    return tmp_path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_solve_corridor(files, capsys):
    code, out = _run(capsys, "solve", files / "c.map", files / "one.scen", "--alg", "cbs")
    assert code == 0
    assert json.loads(out.out)["metrics"]["makespan"] == 2


def test_solve_then_validate(files, capsys):
    sol = files / "sol.json"
    code, out = _run(capsys, "solve", files / "c.map", files / "one.scen", "--out", sol)
    assert code == 0 and json.loads(out.out)["status"] == "solved"
    code, out = _run(capsys, "validate", files / "c.map", files / "one.scen", sol)
    assert code == 0 and '"valid"' in out.out


def test_validate_rejects_bad_solution(files, capsys):
    bad = files / "bad.json"
    bad.write_text(json.dumps({"paths": {"a": [[0, 0], [2, 0]]}, "assignment": {"a": [2, 0]}}))
    code, _ = _run(capsys, "validate", files / "c.map", files / "one.scen", bad)
    assert code == 2


def test_solve_headon_infeasible(files, capsys):
    code, out = _run(capsys, "solve", files / "c.map", files / "headon.scen")
    assert code == 2 and json.loads(out.out)["status"] == "infeasible"


def test_highway_needs_w1(files, capsys):
    code, out = _run(capsys, "solve", files / "c.map", files / "one.scen", "--alg", "ecbs", "--w", "1.5",
                     "--highway", files / "hw.txt")
    assert code == 1 and "--w1" in out.err


def test_highway_solve(files, capsys):
    code, out = _run(capsys, "solve", files / "c.map", files / "one.scen", "--alg", "ecbs", "--w1", "2",
                     "--w2", "1.5", "--highway", files / "hw.txt")
    assert code == 0


def test_bad_alg_and_flavor(files, capsys):
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--alg", "nope")[0] == 1
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--alg", "perr-opt")[0] == 1
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--w", "0.5", "--alg", "ecbs")[0] == 1


def test_parse_error(files, capsys):
    (files / "broken.map").write_text("type octile\nheight 1\nwidth 3\nmap\n.x.\n")
    code, out = _run(capsys, "solve", files / "broken.map", files / "one.scen")
    assert code == 1 and "line 5" in out.err


def test_budget_exit(tmp_path, capsys):
    # head-on on a plus shape: one mover must duck into a side cell, which takes branching
    (tmp_path / "p.map").write_text("type octile\nheight 3\nwidth 3\nmap\n@.@\n...\n@.@\n")
    (tmp_path / "p.scen").write_text("mapfgen-scen v1\nagent a 0 1 2 1\nagent b 2 1 0 1\n")
    code, out = _run(capsys, "solve", tmp_path / "p.map", tmp_path / "p.scen", "--budget-nodes", "1")
    assert code == 3 and json.loads(out.out)["status"] == "budget"
    code, out = _run(capsys, "solve", tmp_path / "p.map", tmp_path / "p.scen")
    assert code == 0 and json.loads(out.out)["metrics"]["makespan"] == 4


def test_config_file(files, capsys):
    cfg = files / "run.cfg"
    cfg.write_text("mapfgen-config v1\nalg = ecbs\nw = 1.5\n")
    code, out = _run(capsys, "solve", files / "c.map", files / "one.scen", "--config", cfg)
    assert code == 0
    cfg.write_text("alg = ecbs\n")
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--config", cfg)[0] == 1
    cfg.write_text("mapfgen-config v1\ncolour = red\n")
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--config", cfg)[0] == 1


def test_gen_instance_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        code, _ = _run(capsys, "gen-instance", "--width", "6", "--height", "5", "--blocked", "20",
                       "--sizes", "4", "--seed", "42", "--out", tmp_path / name)
        assert code == 0
    for ext in (".map", ".scen"):
        assert (tmp_path / f"a{ext}").read_bytes() == (tmp_path / f"b{ext}").read_bytes()


def test_gen_instance_too_many(tmp_path, capsys):
    code, out = _run(capsys, "gen-instance", "--width", "2", "--height", "2", "--sizes", "5",
                     "--out", tmp_path / "x")
    assert code == 1 and "error" in out.err


def test_gen_instance_teams(tmp_path, capsys):
    code, _ = _run(capsys, "gen-instance", "--width", "5", "--height", "5", "--flavor", "tapf",
                   "--sizes", "3,3", "--out", tmp_path / "t")
    assert code == 0
    records = [ln.split() for ln in (tmp_path / "t.scen").read_text().splitlines()[1:]]
    assert [r[0] for r in records] == ["team", "team"]
    for r in records:
        assert len(r[r.index("targets") + 1].split(";")) == 3
    code, _ = _run(capsys, "solve", tmp_path / "t.map", tmp_path / "t.scen", "--alg", "cbm")
    assert code == 0


def test_gen_highway(tmp_path, capsys):
    ws = kiva_map()
    (tmp_path / "k.map").write_text(serialize_map(ws))
    code, _ = _run(capsys, "gen-highway", tmp_path / "k.map", "--samples", "100", "--out", tmp_path / "k.hwy")
    assert code == 0
    text = (tmp_path / "k.hwy").read_text()
    assert text.startswith("mapfgen-hwy v1")
    assert _run(capsys, "gen-highway", tmp_path / "k.map")[0] == 1
    assert serialize_highway(kiva_highway(ws), ws).startswith("mapfgen-hwy v1")


def _solved(files, capsys):
    sol = files / "sol.json"
    assert _run(capsys, "solve", files / "c.map", files / "one.scen", "--out", sol)[0] == 0
    return sol


def test_post_deadline_slack(files, capsys):
    sol = _solved(files, capsys)
    code, out = _run(capsys, "post", files / "c.map", files / "one.scen", sol, "--deadline", "4")
    assert code == 0
    events = json.loads(out.out)["events"]
    assert [e["earliest_s"] for e in events] == [0.0, 1.0, 2.0]
    assert [e["slack_s"] for e in events] == [2.0, 2.0, 2.0]


def test_post_unbounded(files, capsys):
    sol = _solved(files, capsys)
    code, out = _run(capsys, "post", files / "c.map", files / "one.scen", sol, "--deadline", "none")
    assert code == 0 and all(e["slack_s"] is None for e in json.loads(out.out)["events"])


def test_post_tight_deadline(files, capsys):
    sol = _solved(files, capsys)
    code, out = _run(capsys, "post", files / "c.map", files / "one.scen", sol, "--deadline", "1")
    report = json.loads(out.out)
    assert code == 2 and report["status"] == "inconsistent" and -1 in report["cycle"]


def test_post_invalid_solution(files, capsys):
    bad = files / "bad.json"
    bad.write_text(json.dumps({"paths": {"a": [[0, 0], [2, 0]]}, "assignment": {"a": [2, 0]}}))
    code, out = _run(capsys, "post", files / "c.map", files / "one.scen", bad)
    assert code == 2 and json.loads(out.out)["status"] == "invalid"


def test_simulate_zero_delay(files, capsys):
    sol = _solved(files, capsys)
    code, out = _run(capsys, "simulate", files / "c.map", files / "one.scen", sol)
    assert code == 0
    trace = json.loads(out.out)
    assert trace["realized_s"] == [0.0, 1.0, 2.0] and not trace["replan_needed"]


def test_simulate_capped_delays(files, capsys):
    sol = _solved(files, capsys)
    code, out = _run(capsys, "simulate", files / "c.map", files / "one.scen", sol, "--delay-kind", "uniform",
                     "--delay-scale", "5", "--delay-cap", "slack", "--seed", "9")
    trace = json.loads(out.out)
    assert code == 0 and not trace["replan_needed"] and trace["realized_s"][-1] <= 4.0 + 1e-9


def test_benchmark_empty(tmp_path, capsys):
    code, _ = _run(capsys, "benchmark", "--count", "0", "--out", tmp_path / "b")
    assert code == 0
    rows = list(csv.reader((tmp_path / "b.csv").read_text().splitlines()))
    assert len(rows) == 1 and "instance" in rows[0] and "hl_nodes" in rows[0]


def test_benchmark_mapf_perr(tmp_path, capsys):
    code, out = _run(capsys, "benchmark", "--count", "10", "--seed", "1", "--out", tmp_path / "b")
    assert code == 0
    comp = json.loads(out.out)["comparisons"][0]
    assert comp["instances"] == 10 and comp["a_solved"] >= comp["b_solved"]
    doc = json.loads((tmp_path / "b.json").read_text())
    assert len(doc["rows"]) == 20


def test_benchmark_highway_columns(tmp_path, capsys):
    code, _ = _run(capsys, "benchmark", "--suite", "highway", "--count", "2", "--movers", "6",
                   "--out", tmp_path / "h")
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "h.csv").read_text().splitlines()))
    assert len(rows) == 4
    assert all(r["hl_nodes"] != "" for r in rows)
    assert all(r["adherence"] != "" for r in rows if "w1" in r["algorithm"] and r["success"] == "True")
