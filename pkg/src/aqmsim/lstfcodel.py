"""LSTFCoDel: CoDel's control loop over a slack-ordered priority queue.

Each arriving packet is stamped with ``epsilon = classify(gamma)`` where
``gamma`` is an exponentially weighted average of the sojourn times of
departing packets. Service picks the smallest ``(epsilon, arrival)`` key;
when the control loop calls for a drop, the largest key is dropped instead.

The control loop's sojourn observation comes from the packet it would drop
(the largest key) by default, so that as in plain CoDel the packet judged
is the packet dropped. ``congestion_signal="candidate"`` judges the packet
about to be served instead; fresh urgent arrivals then keep resetting the
estimator and the AQM rarely engages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from sortedcontainers import SortedList

from .codel import DEFAULT_INTERVAL_S, DEFAULT_TARGET_S, CoDel, should_drop
from .engine import ns_to_seconds
from .qdisc import DEFAULT_CAPACITY_BYTES, Packet

DEFAULT_ALPHA = 0.5
CONGESTION_SIGNALS = ("victim", "candidate")


@dataclass
class SlackEstimator:
    alpha: float
    gamma: float = 0.0
    beta_last: float = 0.0
    pending_drop_next_influence: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")

    def update(self, beta: float) -> float:
        """Fold one delay observation (seconds) into gamma; consumes any pending drop-time term."""
        if beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {beta}")
        self.beta_last = beta
        sample = beta + self.pending_drop_next_influence
        self.gamma = (1.0 - self.alpha) * self.gamma + self.alpha * sample
        self.pending_drop_next_influence = 0.0
        return self.gamma


def update_slack(est: SlackEstimator, beta: float) -> SlackEstimator:
    est.update(beta)
    return est


def classify(gamma: float) -> float:
    """Packet priority from average slack: 0 when gamma is 0, else 1 / (1 + gamma)."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0.0:
        return 0.0
    return 1.0 / (1.0 + gamma)


class LSTFCoDel(CoDel):
    kind = "lstfcodel"

    def __init__(
        self,
        capacity_bytes: int = DEFAULT_CAPACITY_BYTES,
        target_s: float = DEFAULT_TARGET_S,
        interval_s: float = DEFAULT_INTERVAL_S,
        alpha: float = DEFAULT_ALPHA,
        drop_next_influence: bool = True,
        congestion_signal: str = "victim",
    ):
        if congestion_signal not in CONGESTION_SIGNALS:
            raise ValueError(f"congestion_signal must be one of {CONGESTION_SIGNALS}, got {congestion_signal!r}")
        super().__init__(capacity_bytes, target_s, interval_s)
        self.congestion_signal = congestion_signal
        self.slack = SlackEstimator(alpha)
        self.drop_next_influence = drop_next_influence
        self._arrivals = itertools.count()
        # entries are (epsilon, arrival_seq, packet); arrival_seq is unique
        self._pq: SortedList = SortedList()

    @property
    def gamma(self) -> float:
        return self.slack.gamma

    def resident_keys(self) -> list[tuple[float, int, int]]:
        """(epsilon, arrival_seq, packet id) of every resident, in service order."""
        return [(eps, seq, pkt.id) for eps, seq, pkt in self._pq]

    def _push(self, pkt: Packet) -> None:
        pkt.priority = classify(self.slack.gamma)
        self._pq.add((pkt.priority, next(self._arrivals), pkt))

    def _pop(self) -> Packet | None:
        return self._pq.pop(0)[2] if self._pq else None

    def head(self) -> Packet | None:
        return self._pq[0][2] if self._pq else None

    def _peek(self) -> Packet | None:
        return self.head()

    def _take(self, pkt: Packet) -> None:
        self._pq.pop(0)

    def _take_victim(self) -> Packet:
        return self._pq.pop(-1)[2]

    def _observe(self, pkt: Packet, now: int) -> bool:
        judged = self._pq[-1][2] if self.congestion_signal == "victim" else pkt
        remaining = self.byte_length - pkt.size_bytes
        return should_drop(now - judged.enqueued_at, now, self.state, remaining)

    def _on_served(self, pkt: Packet, sojourn: int, now: int) -> None:
        self.slack.update(ns_to_seconds(sojourn))

    def _on_aqm_drop(self, now: int) -> None:
        if not self.drop_next_influence:
            return
        drop_next = self.state.drop_next
        ahead = 0 if drop_next is None else max(drop_next - now, 0)
        self.slack.pending_drop_next_influence = ns_to_seconds(ahead)
