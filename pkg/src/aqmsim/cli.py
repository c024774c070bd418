"""Command-line runner: ``run``, ``sweep``, ``compare`` and ``report``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime invariant
violation (including a regenerated report that differs from the stored one).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import report as rep
from .config import ConfigError, Scenario, load_scenario, parse_scenario_text
from .engine import RngStream
from .stats import StatsError, clt_sample, f_test, welch_t_test
from .topology import InvariantViolation, run_scenario
from .trace import TraceStats, read_trace

SEED_ENV = "AQMSIM_SEED"
DEFAULT_ALPHAS = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875)

TRACE_FILE = "trace.csv"
REPORT_FILE = "report.json"
SCENARIO_FILE = "scenario.txt"


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _parse_set(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def resolve_scenario(args: argparse.Namespace) -> Scenario:
    """Defaults, then scenario file, then the seed fallback, then --set, then named flags."""
    overrides: dict[str, Any] = {}
    file_keys: dict[str, str] = {}
    if args.scenario:
        try:
            file_keys = parse_scenario_text(Path(args.scenario).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {args.scenario}: {exc}") from None
    overrides.update(file_keys)
    if "sim.seed" not in file_keys:
        env = _env_seed()
        if env is not None:
            overrides["sim.seed"] = env
    overrides.update(_parse_set(args.set or []))
    for flag, key in (("qdisc", "qdisc.kind"), ("alpha", "lstfcodel.alpha"),
                      ("duration", "sim.duration_s"), ("seed", "sim.seed")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return load_scenario(None, overrides)


# -- run -------------------------------------------------------------------------

def execute(scenario: Scenario, out: Path, write_trace: bool = True) -> dict[str, Any]:
    """Run one scenario into ``out``; the trace is written under a temporary name until the run succeeds."""
    out.mkdir(parents=True, exist_ok=True)
    partial = out / (TRACE_FILE + ".partial")
    try:
        if write_trace:
            with partial.open("w", newline="") as sink:
                result = run_scenario(scenario, sink)
            partial.replace(out / TRACE_FILE)
        else:
            result = run_scenario(scenario)
    finally:
        if partial.exists():
            partial.unlink()
    report = rep.build_report(scenario, result.stats)
    (out / SCENARIO_FILE).write_text(scenario.to_text())
    (out / REPORT_FILE).write_text(rep.dumps(report))
    return report


def cmd_run(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args)
    report = execute(scenario, Path(args.out), not args.no_trace)
    print(rep.run_table(report, args.format), end="")
    return 0


# -- sweep -----------------------------------------------------------------------

def _parse_alphas(text: str) -> list[float]:
    try:
        alphas = [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"--alphas must be comma-separated numbers, got {text!r}") from None
    if not alphas:
        raise ConfigError("--alphas is empty")
    if len(set(alphas)) != len(alphas):
        raise ConfigError("--alphas contains duplicates")
    return alphas


def _sweep_one(job: tuple[Scenario, str, bool]) -> dict[str, Any]:
    scenario, out, write_trace = job
    return execute(scenario, Path(out), write_trace)


def cmd_sweep(args: argparse.Namespace) -> int:
    alphas = _parse_alphas(args.alphas)
    base = resolve_scenario(args)
    if base.qdisc_kind != "lstfcodel":
        raise ConfigError(f"sweep varies lstfcodel.alpha; qdisc is {base.qdisc_kind!r}")
    scenarios = [base.with_overrides({"lstfcodel.alpha": a}).validate() for a in alphas]
    out = Path(args.out)
    jobs = [(s, str(out / f"alpha_{a}"), not args.no_trace) for s, a in zip(scenarios, alphas)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(j) for j in jobs]
    entries = sorted(zip(alphas, reports), key=lambda e: e[0])
    summary = rep.sweep_table(entries, args.format)
    ext = "csv" if args.format == "csv" else "txt"
    (out / f"summary.{ext}").write_text(summary)
    print(summary, end="")
    return 0


# -- compare -----------------------------------------------------------------------

def load_report(path: str | Path) -> dict[str, Any]:
    p = Path(path)
    if p.is_dir():
        p = p / REPORT_FILE
    try:
        return json.loads(p.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {p}: {exc}") from None


def _delay_moments(report: dict[str, Any], label: str) -> tuple[float, float]:
    pop = report.get("delay_s")
    if not pop or pop.get("n", 0) < 1:
        raise ConfigError(f"run {label} has no delay population")
    return float(pop["mean"]), float(pop["stddev"])


def compare_reports(report_a: dict[str, Any], report_b: dict[str, Any], n: int, seed: int) -> dict[str, Any]:
    if n < 2:
        raise ConfigError(f"--samples must be at least 2, got {n}")
    mean_a, sd_a = _delay_moments(report_a, "a")
    mean_b, sd_b = _delay_moments(report_b, "b")
    a = clt_sample(mean_a, sd_a, n, RngStream(seed, "compare-a"))
    b = clt_sample(mean_b, sd_b, n, RngStream(seed, "compare-b"))
    try:
        t = welch_t_test(a, b, "greater")
        f = f_test(a, b)
    except StatsError as exc:
        raise ConfigError(str(exc)) from None
    return {"samples": n, "seed": seed, "welch_t_test": rep.t_test_dict(t), "f_test": rep.f_test_dict(f)}


def cmd_compare(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    result = compare_reports(load_report(args.run_a), load_report(args.run_b), args.samples,
                             1 if seed is None else seed)
    if args.out:
        Path(args.out).write_text(rep.dumps(result))
    print(rep.compare_table(result, args.format), end="")
    return 0


# -- report ------------------------------------------------------------------------

def regenerate_report(run_dir: str | Path) -> dict[str, Any]:
    d = Path(run_dir)
    try:
        scenario = load_scenario(d / SCENARIO_FILE)
        with (d / TRACE_FILE).open(newline="") as f:
            stats = TraceStats.from_rows(read_trace(f))
    except OSError as exc:
        raise ConfigError(f"cannot read run directory {d}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return rep.build_report(scenario, stats)


def cmd_report(args: argparse.Namespace) -> int:
    report = regenerate_report(args.run_dir)
    text = rep.dumps(report)
    if args.check:
        stored = (Path(args.run_dir) / REPORT_FILE).read_text()
        if stored != text:
            raise InvariantViolation(f"regenerated report differs from {args.run_dir}/{REPORT_FILE}")
    print(rep.run_table(report, args.format), end="")
    return 0


# -- entry point ------------------------------------------------------------------------

def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario file of 'key = value' lines")
    p.add_argument("--qdisc", help="droptail, red, codel or lstfcodel")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--seed", type=int, help=f"run seed (falls back to ${SEED_ENV})")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any scenario key")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-trace", action="store_true", help="skip writing the trace CSV")
    p.add_argument("--format", choices=("table", "csv"), default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqmsim", description="Queue discipline experiments on a two-client star.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _add_scenario_flags(p)
    p.add_argument("--alpha", type=float, help="LSTFCoDel forgetfulness factor")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run LSTFCoDel over several alpha values")
    _add_scenario_flags(p)
    p.add_argument("--alphas", default=",".join(str(a) for a in DEFAULT_ALPHAS))
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p.set_defaults(func=cmd_sweep, qdisc="lstfcodel")

    p = sub.add_parser("compare", help="t-test and F-test of two runs' delay")
    p.add_argument("run_a", help="run directory or report.json (hypothesis: mean delay of a exceeds b)")
    p.add_argument("run_b")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the test results as JSON")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="rebuild a run's report from its trace")
    p.add_argument("run_dir")
    p.add_argument("--check", action="store_true", help="exit 3 unless identical to the stored report")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"aqmsim: error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"aqmsim: invariant violated: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
