"""Experiment reports: population summaries, sweep tables and test tables.

Reports are plain dicts so they serialize to JSON with a stable key order.
Infinite confidence bounds are written as the string ``"inf"`` / ``"-inf"``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Sequence

from .config import Scenario
from .stats import FTestResult, RunningStats, TTestResult
from .trace import TraceStats

REPORT_VERSION = 1


def population(acc: RunningStats) -> dict[str, Any] | None:
    if acc.n == 0:
        return None
    return {"n": acc.n, "mean": acc.mean, "variance": acc.variance, "stddev": acc.stddev}


def build_report(scenario: Scenario, stats: TraceStats) -> dict[str, Any]:
    return {
        "version": REPORT_VERSION,
        "seed": scenario.sim_seed,
        "config": dict(scenario.to_items()),
        "delay_s": population(stats.delay),
        "queue_length_bytes": population(stats.qlen),
        "slack_s": population(stats.slack),
        "events": {k: stats.events[k] for k in sorted(stats.events)},
        "delivered_by_flow": {k: stats.delivered_by_flow[k] for k in sorted(stats.delivered_by_flow)},
        "last_event_s": stats.last_time,
    }


def dumps(report: dict[str, Any]) -> str:
    return json.dumps(_finite(report), indent=2, sort_keys=True) + "\n"


def _finite(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def t_test_dict(r: TTestResult) -> dict[str, Any]:
    return {
        "t": r.t_stat, "df": r.df, "p_value": r.p_value,
        "ci": [r.ci_lower, r.ci_upper], "confidence": r.confidence,
        "mean_a": r.mean_a, "mean_b": r.mean_b, "alternative": r.alternative,
    }


def f_test_dict(r: FTestResult) -> dict[str, Any]:
    return {
        "F": r.f_stat, "df_num": r.df_num, "df_den": r.df_den, "p_value": r.p_value,
        "ci": list(r.ci), "confidence": r.confidence,
    }


# -- rendering --------------------------------------------------------------

def _fmt(x: Any) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.6g}"
    return str(x)


def render(header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    cells = [[_fmt(c) for c in row] for row in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(cells)
        return buf.getvalue()
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def run_table(report: dict[str, Any], fmt: str = "table") -> str:
    """Per-run summary: average, variance and standard deviation of each population."""
    rows = []
    for label, key in (("queuing delay (s)", "delay_s"), ("queue length (bytes)", "queue_length_bytes"),
                       ("slack (s)", "slack_s")):
        pop = report.get(key)
        if pop:
            rows.append([label, pop["n"], pop["mean"], pop["variance"], pop["stddev"]])
    ev = report["events"]
    text = render(["metric", "n", "average", "variance", "std dev"], rows, fmt)
    counts = render(["event", "count"], [[k, ev[k]] for k in sorted(ev)], fmt)
    return text + ("\n" if fmt == "table" else "") + counts


def sweep_table(entries: Sequence[tuple[float, dict[str, Any]]], fmt: str = "table") -> str:
    """One row per alpha: delay, queue length and slack averages and spreads."""
    header = ["alpha", "delay_avg_s", "delay_var_s2", "delay_std_s",
              "qlen_avg_bytes", "qlen_var", "qlen_std", "slack_avg_s", "slack_var_s2", "slack_std_s",
              "aqm_drops"]
    rows = []
    for alpha, rep in entries:
        row: list[Any] = [alpha]
        for key in ("delay_s", "queue_length_bytes", "slack_s"):
            pop = rep.get(key)
            row += [pop["mean"], pop["variance"], pop["stddev"]] if pop else ["", "", ""]
        row.append(rep["events"].get("aqm_drop", 0))
        rows.append(row)
    return render(header, rows, fmt)


def compare_table(result: dict[str, Any], fmt: str = "table") -> str:
    t, f = result["welch_t_test"], result["f_test"]
    lo, hi = t["ci"]
    t_rows = [
        ["t", t["t"]], ["df", t["df"]], ["p-value", t["p_value"]],
        [f"{t['confidence']:.0%} CI lower", lo], [f"{t['confidence']:.0%} CI upper", hi],
        ["mean of a", t["mean_a"]], ["mean of b", t["mean_b"]],
    ]
    f_rows = [
        ["F", f["F"]], ["num df", f["df_num"]], ["denom df", f["df_den"]], ["p-value", f["p_value"]],
        [f"{f['confidence']:.0%} CI lower", f["ci"][0]], [f"{f['confidence']:.0%} CI upper", f["ci"][1]],
        ["ratio of variances", f["F"]],
    ]
    sep = "\n" if fmt == "table" else ""
    return (render(["Welch t-test (a > b)", "value"], t_rows, fmt) + sep
            + render(["F-test (var a / var b)", "value"], f_rows, fmt))
