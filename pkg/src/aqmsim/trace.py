"""Per-packet trace rows at the studied queue and the statistics derived from them.

Statistics are always accumulated from the rendered CSV fields, so a report
rebuilt from a stored trace is bit-identical to the one made during the run.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .engine import format_seconds
from .qdisc import Packet, Qdisc
from .stats import RunningStats

TRACE_HEADER = (
    "time_s", "event", "pkt_id", "flow", "size_bytes", "sojourn_s",
    "qlen_bytes", "qlen_pkts", "gamma_s", "epsilon",
)
EVENTS = ("enqueue", "dequeue", "tail_drop", "aqm_drop", "deliver")


@dataclass
class TraceStats:
    delay: RunningStats = field(default_factory=RunningStats)
    qlen: RunningStats = field(default_factory=RunningStats)
    slack: RunningStats = field(default_factory=RunningStats)
    events: Counter = field(default_factory=Counter)
    delivered_by_flow: Counter = field(default_factory=Counter)
    last_time: str = "0.000000000"

    def add(self, row: tuple[str, ...]) -> None:
        time_s, event, _, flow, _, sojourn, qlen_bytes, _, gamma, _ = row
        self.events[event] += 1
        self.last_time = time_s
        if event == "dequeue":
            self.delay.push(float(sojourn))
            self.qlen.push(float(qlen_bytes))
            if gamma:
                self.slack.push(float(gamma))
        elif event == "enqueue":
            self.qlen.push(float(qlen_bytes))
        elif event == "deliver":
            self.delivered_by_flow[flow] += 1

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, ...]]) -> TraceStats:
        stats = cls()
        for row in rows:
            stats.add(row)
        return stats


class Tracer:
    """Renders trace rows for one qdisc, feeding them to the stats and optionally a CSV sink."""

    def __init__(self, qdisc: Qdisc, sink: TextIO | None = None):
        self.qdisc = qdisc
        self.stats = TraceStats()
        self._writer = None
        if sink is not None:
            self._writer = csv.writer(sink, lineterminator="\n")
            self._writer.writerow(TRACE_HEADER)
        self._has_slack = hasattr(qdisc, "slack")

    def record(self, event: str, now: int, pkt: Packet, sojourn: int | None = None) -> None:
        q = self.qdisc
        if self._has_slack:
            gamma = f"{q.slack.gamma:.9f}"
            eps = "" if pkt.priority is None else f"{pkt.priority:.9f}"
        else:
            gamma = eps = ""
        row = (
            format_seconds(now), event, str(pkt.id), pkt.flow, str(pkt.size_bytes),
            "" if sojourn is None else format_seconds(sojourn),
            str(q.byte_length), str(len(q)), gamma, eps,
        )
        self.stats.add(row)
        if self._writer is not None:
            self._writer.writerow(row)


def read_trace(f: TextIO) -> Iterable[tuple[str, ...]]:
    reader = csv.reader(f)
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_HEADER:
        raise ValueError(f"not a trace file: header {header!r}")
    for row in reader:
        yield tuple(row)
