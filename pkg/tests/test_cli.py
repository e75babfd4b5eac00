import json

import pytest

from bsngame.cli import main
from bsngame.traceio import CSV_COLUMNS, read_trace_rows


def test_simulate_writes_trace_and_summary(tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["simulate", "--scenario", "builtin:default", "--seed", "1", "--max-iters", "300", "--out", str(out)]) == 0
    rows = read_trace_rows(out)
    assert len(rows) == 300 * 5
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert summary["converged"] and summary["mode"] == "disg"
    for key in ("seed", "convergence_iter", "final_assignment", "final_powers_mw", "avg_sinr_db",
                "avg_sinr_db_last_quartile", "feasibility_violations"):
        assert key in summary
    assert "converged iter=" in capsys.readouterr().out


def test_baseline_summary_states_rule(tmp_path):
    out = tmp_path / "b.csv"
    summ = tmp_path / "b.json"
    assert main(["simulate", "--scenario", "builtin:default", "--baseline", "--max-iters", "10",
                 "--out", str(out), "--summary", str(summ)]) == 0
    s = json.loads(summ.read_text())
    assert s["mode"] == "baseline" and "p_max" in s["baseline_rule"]


def test_same_seed_same_bytes(tmp_path):
    paths = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        main(["simulate", "--scenario", "builtin:default", "--seed", "7", "--max-iters", "80", "--out", str(out)])
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].with_suffix(".summary.json").read_bytes() == paths[1].with_suffix(".summary.json").read_bytes()


def test_missing_scenario_writes_nothing(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--out", str(out)]) == 1
    assert not out.exists() and list(tmp_path.iterdir()) == []
    assert "error" in capsys.readouterr().err


def test_invalid_scenario_lists_problems(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"users": [{"id": 0, "position": [0, 0]}], "channels": [], "p_min_mw": 5, "p_max_mw": 1, "delta": 2.4}))
    assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path / "o.csv")]) == 1
    err = capsys.readouterr().err
    assert "channel" in err and "p_min" in err


@pytest.mark.parametrize("argv", [
    ["simulate", "--scenario", "builtin:default", "--out", "o.csv", "--lock-threshold", "0.1"],
    ["simulate", "--scenario", "builtin:default", "--out", "o.csv", "--max-iters", "0"],
    ["simulate", "--scenario", "builtin:default"],
    ["bogus"],
])
def test_bad_arguments_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert not (tmp_path / "o.csv").exists()


def test_sweep_single_seed(tmp_path, capsys):
    out = tmp_path / "sweep.json"
    assert main(["sweep", "--scenario", "builtin:default", "--seeds", "1", "--max-iters", "300", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "seed 0:" in text and "gap_db=" in text
    agg = json.loads(out.read_text())
    assert agg["seeds"] == 1 and len(agg["runs"]) == 1


def test_verify_two_user_lists_equilibria(tmp_path, capsys):
    out = tmp_path / "ne.json"
    assert main(["verify", "--scenario", "builtin:two_user", "--power-grid", "levels", "--out", str(out)]) == 0
    assert "11:50.69 12:50.69" in capsys.readouterr().out
    assert len(json.loads(out.read_text())["ne_profiles"]) == 2


def test_verify_too_large_exits_one(capsys):
    assert main(["verify", "--scenario", "builtin:default"]) == 1
    assert "--trace" in capsys.readouterr().err


def test_verify_converged_trace_passes(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    main(["simulate", "--scenario", "builtin:default", "--seed", "2", "--max-iters", "300", "--out", str(trace)])
    capsys.readouterr()
    report = tmp_path / "r.json"
    assert main(["verify", "--scenario", "builtin:default", "--trace", str(trace), "--out", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["candidate_check"]["max_relative_improvement"] <= 1e-6
    assert rep["ce"]["eps"] == 0.0


def test_verify_colliding_trace_fails(tmp_path, capsys):
    trace = tmp_path / "c.csv"
    main(["simulate", "--scenario", "builtin:default", "--baseline", "--seed", "0", "--max-iters", "3", "--out", str(trace)])
    rows = read_trace_rows(trace)
    assert len({r["channel"] for r in rows if r["iter"] == 3}) < 5  # seed 0 baseline collides
    capsys.readouterr()
    assert main(["verify", "--scenario", "builtin:default", "--trace", str(trace)]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_verify_bad_grid_and_trace(tmp_path):
    assert main(["verify", "--scenario", "builtin:default", "--power-grid", "cubic"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["verify", "--scenario", "builtin:default", "--trace", str(bad)]) == 1


def test_no_temp_files_left(tmp_path):
    out = tmp_path / "run.csv"
    main(["simulate", "--scenario", "builtin:two_user", "--max-iters", "20", "--out", str(out)])
    assert sorted(p.name for p in tmp_path.iterdir()) == ["run.csv", "run.summary.json"]
