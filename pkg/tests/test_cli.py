import json
import subprocess
import sys

import pytest

from aqmsim import cli

SHORT = ["--duration", "20", "--set", "cbr.start_s=8"]


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    codel, lstf = base / "codel", base / "lstf"
    assert run_cli("run", "--qdisc", "codel", "--seed", 1, "--out", codel, *SHORT) == 0
    assert run_cli("run", "--qdisc", "lstfcodel", "--alpha", 0.5, "--seed", 1, "--out", lstf, *SHORT) == 0
    return codel, lstf


def test_run_writes_trace_report_and_config(runs, capsys):
    codel, _ = runs
    assert sorted(p.name for p in codel.iterdir()) == ["report.json", "scenario.txt", "trace.csv"]
    report = json.loads((codel / "report.json").read_text())
    assert report["seed"] == 1
    assert report["config"]["qdisc.kind"] == "codel"
    assert report["config"]["sim.duration_s"] == "20.0"
    assert report["delay_s"]["n"] == report["events"]["dequeue"]
    assert report["slack_s"] is None
    assert (codel / "trace.csv").read_text().startswith("time_s,event,pkt_id,flow,size_bytes,sojourn_s,")


def test_lstf_report_has_slack(runs):
    report = json.loads((runs[1] / "report.json").read_text())
    assert report["slack_s"]["n"] > 0
    assert report["config"]["lstfcodel.alpha"] == "0.5"


def test_report_regeneration_is_bit_identical(runs, capsys):
    for d in runs:
        assert run_cli("report", d, "--check") == 0
        regenerated = cli.rep.dumps(cli.regenerate_report(d))
        assert regenerated == (d / "report.json").read_text()


def test_tampered_report_fails_check(runs, tmp_path):
    d = tmp_path / "copy"
    d.mkdir()
    for name in ("trace.csv", "scenario.txt"):
        (d / name).write_text((runs[0] / name).read_text())
    (d / "report.json").write_text((runs[0] / "report.json").read_text().replace('"seed": 1', '"seed": 2'))
    assert run_cli("report", d, "--check") == 3


def test_unknown_qdisc_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "never"
    assert run_cli("run", "--qdisc", "pie", "--out", out) == 2
    assert not out.exists()
    assert "qdisc.kind" in capsys.readouterr().err


def test_bad_override_and_env_seed(tmp_path, monkeypatch):
    assert run_cli("run", "--set", "codel.bogus=1", "--out", tmp_path / "x") == 2
    monkeypatch.setenv("AQMSIM_SEED", "nope")
    assert run_cli("run", "--out", tmp_path / "y", *SHORT) == 2
    assert not (tmp_path / "x").exists() and not (tmp_path / "y").exists()


def test_env_seed_fallback_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("AQMSIM_SEED", "17")
    assert run_cli("run", "--out", tmp_path / "env", "--no-trace", "--duration", 2) == 0
    assert json.loads((tmp_path / "env" / "report.json").read_text())["seed"] == 17
    assert run_cli("run", "--seed", 3, "--out", tmp_path / "flag", "--no-trace", "--duration", 2) == 0
    assert json.loads((tmp_path / "flag" / "report.json").read_text())["seed"] == 3
    scen = tmp_path / "s.txt"
    scen.write_text("sim.seed = 5\nsim.duration_s = 2\n")
    assert run_cli("run", "--scenario", scen, "--out", tmp_path / "file", "--no-trace") == 0
    assert json.loads((tmp_path / "file" / "report.json").read_text())["seed"] == 5


def test_compare_self_is_null(runs, capsys):
    assert run_cli("compare", runs[0], runs[0], "--samples", 500, "--seed", 4) == 0
    out = capsys.readouterr().out
    assert "Welch t-test" in out and "F-test" in out
    result = cli.compare_reports(*(cli.load_report(runs[0]),) * 2, 500, 4)
    assert abs(result["welch_t_test"]["t"]) < 4
    assert 0.7 < result["f_test"]["F"] < 1.4
    assert result["welch_t_test"]["ci"][1] == float("inf")


def test_compare_json_marks_unbounded_ci(runs, tmp_path, capsys):
    out = tmp_path / "cmp.json"
    assert run_cli("compare", runs[0], runs[1], "--out", out, "--format", "csv") == 0
    data = json.loads(out.read_text())
    assert data["welch_t_test"]["ci"][1] == "inf"
    assert data["samples"] == 500


def test_compare_needs_two_samples(runs):
    assert run_cli("compare", runs[0], runs[1], "--samples", 1) == 2


def test_compare_missing_population(tmp_path, runs):
    report = json.loads((runs[0] / "report.json").read_text())
    report["delay_s"] = None
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(report))
    assert run_cli("compare", bad, runs[0]) == 2
    assert run_cli("compare", tmp_path / "missing", runs[0]) == 2


def test_sweep_rows_equal_independent_runs(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert run_cli("sweep", "--alphas", "0.25,0.75", "--seed", 2, "--out", out, "--format", "csv",
                   "--no-trace", *SHORT) == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("alpha,delay_avg_s")
    assert [row.split(",")[0] for row in summary[1:]] == ["0.25", "0.75"]
    single = tmp_path / "single"
    assert run_cli("run", "--qdisc", "lstfcodel", "--alpha", 0.75, "--seed", 2, "--out", single,
                   "--no-trace", *SHORT) == 0
    assert (single / "report.json").read_text() == (out / "alpha_0.75" / "report.json").read_text()


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    args = ["--alphas", "0.5,0.125", "--no-trace", "--duration", 5]
    assert run_cli("sweep", "--out", tmp_path / "a", *args) == 0
    assert run_cli("sweep", "--out", tmp_path / "b", "--jobs", 2, *args) == 0
    assert (tmp_path / "a" / "summary.txt").read_text() == (tmp_path / "b" / "summary.txt").read_text()


def test_sweep_rejects_other_qdisc(tmp_path):
    assert run_cli("sweep", "--qdisc", "codel", "--out", tmp_path / "s") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "aqmsim", "run", "--qdisc", "nope", "--out", str(tmp_path / "z")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
