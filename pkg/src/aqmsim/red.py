"""Random Early Detection gateway.

Average queue size is tracked in bytes. Idle periods decay the average as
if ``m`` packets of typical (MTU) size had been sent at line rate, and
marks inside the threshold window are spread out with the count-based
correction ``p_a = p_b / (1 - count * p_b)``. A mark is a drop here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .engine import RngStream, transmission_ns
from .qdisc import DEFAULT_CAPACITY_BYTES, MTU, DropTail, Outcome, Packet, QdiscVerdict


class Mark(str, enum.Enum):
    PASS = "pass"
    MARK = "mark"
    FORCE = "force-mark"


@dataclass
class RedState:
    w_q: float = 0.002
    min_th: float = 5 * MTU
    max_th: float = 15 * MTU
    max_p: float = 0.1
    avg: float = 0.0
    q_time: int | None = 0
    count_since_mark: int = -1

    def __post_init__(self):
        if not 0.0 < self.w_q < 1.0:
            raise ValueError(f"w_q must lie in (0, 1), got {self.w_q}")
        if not 0 <= self.min_th < self.max_th:
            raise ValueError(f"need 0 <= min_th < max_th, got {self.min_th}, {self.max_th}")
        if not 0.0 < self.max_p <= 1.0:
            raise ValueError(f"max_p must lie in (0, 1], got {self.max_p}")


def red_update_avg(state: RedState, q: float, now: int, idle: bool, typical_tx_time: int) -> float:
    """Update ``state.avg`` on a packet arrival and return it.

    ``q`` is the instantaneous queue size; ``typical_tx_time`` (ns) converts
    the idle duration ``now - q_time`` into a packet count.
    """
    if q < 0:
        raise ValueError(f"negative queue size {q}")
    if idle:
        if state.q_time is None:
            raise ValueError("idle update without a recorded idle start (q_time)")
        m = (now - state.q_time) / typical_tx_time
        state.avg = (1.0 - state.w_q) ** m * state.avg
    else:
        # (1 - w_q) * avg + w_q * q in incremental form, clamped against rounding
        avg = state.avg + state.w_q * (q - state.avg)
        state.avg = min(max(avg, min(state.avg, q)), max(state.avg, q))
    return state.avg


def red_mark_decision(state: RedState, rng: RngStream) -> Mark:
    avg = state.avg
    if avg < state.min_th:
        state.count_since_mark = -1
        return Mark.PASS
    if avg >= state.max_th:
        state.count_since_mark = 0
        return Mark.FORCE
    state.count_since_mark += 1
    p_b = state.max_p * (avg - state.min_th) / (state.max_th - state.min_th)
    denom = 1.0 - state.count_since_mark * p_b
    p_a = 1.0 if denom <= p_b else p_b / denom
    if rng.random() < p_a:
        state.count_since_mark = 0
        return Mark.MARK
    return Mark.PASS


class Red(DropTail):
    kind = "red"

    def __init__(
        self,
        capacity_bytes: int = DEFAULT_CAPACITY_BYTES,
        link_rate_bps: int = 1_700_000,
        w_q: float = 0.002,
        min_th_bytes: float = 5 * MTU,
        max_th_bytes: float = 15 * MTU,
        max_p: float = 0.1,
        rng: RngStream | None = None,
    ):
        super().__init__(capacity_bytes)
        self.state = RedState(w_q, min_th_bytes, max_th_bytes, max_p)
        self.typical_tx_time = transmission_ns(MTU, link_rate_bps)
        self.rng = rng if rng is not None else RngStream(0, "red")

    def enqueue(self, pkt: Packet, now: int) -> QdiscVerdict:
        st = self.state
        idle = len(self) == 0 and st.q_time is not None
        red_update_avg(st, self.byte_length, now, idle, self.typical_tx_time)
        st.q_time = None
        if red_mark_decision(st, self.rng) is not Mark.PASS:
            self._c.enqueues += 1
            self._count_aqm_drop()
            if len(self) == 0:
                st.q_time = now
            return QdiscVerdict(Outcome.DROPPED_AQM, pkt)
        verdict = super().enqueue(pkt, now)
        if len(self) == 0:
            st.q_time = now
        return verdict

    def dequeue(self, now: int):
        out = super().dequeue(now)
        if out is not None and len(self) == 0:
            self.state.q_time = now
        return out
