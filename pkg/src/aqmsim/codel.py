"""CoDel: sojourn-time congestion detection with a square-root drop schedule.

The control loop follows the reference pseudocode of RFC 8289, with the
re-entry heuristic ``count = count - 2`` (when the previous episode ended
less than 16 intervals ago) and the one-MTU standing-queue exemption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import seconds_to_ns
from .qdisc import DEFAULT_CAPACITY_BYTES, MTU, Dequeued, DropTail, Packet

DEFAULT_TARGET_S = 0.005
DEFAULT_INTERVAL_S = 0.100
REENTRY_WINDOW_INTERVALS = 16


@dataclass
class CoDelState:
    target: int  # ns
    interval: int  # ns
    first_above_time: int | None = None
    drop_next: int | None = None
    count: int = 0
    last_count: int = 0
    dropping: bool = False
    # drop_next at the moment the last episode ended, for the re-entry heuristic
    last_drop_next: int | None = None

    def __post_init__(self):
        if not 0 < self.target < self.interval:
            raise ValueError(f"need 0 < target < interval, got target={self.target} interval={self.interval}")

    @classmethod
    def from_seconds(cls, target_s: float = DEFAULT_TARGET_S, interval_s: float = DEFAULT_INTERVAL_S) -> CoDelState:
        return cls(seconds_to_ns(target_s), seconds_to_ns(interval_s))


def control_law(t: int, count: int, interval: int) -> int:
    """Next drop time: ``t + interval / sqrt(count)``, in integer ns."""
    if count < 1:
        raise ValueError(f"control_law needs count >= 1, got {count}")
    return t + round(interval / math.sqrt(count))


def should_drop(sojourn: int, now: int, state: CoDelState, queue_bytes: int | None = None, mtu: int = MTU) -> bool:
    """Update ``state.first_above_time`` for one sojourn observation.

    Returns True once the sojourn has stayed at or above target for a full
    interval. ``queue_bytes`` is what remains queued after the observed
    packet leaves; at most one MTU of backlog never counts as congestion.
    """
    if sojourn < 0:
        raise ValueError(f"negative sojourn {sojourn}")
    if sojourn < state.target or (queue_bytes is not None and queue_bytes <= mtu):
        state.first_above_time = None
        return False
    if state.first_above_time is None:
        state.first_above_time = now + state.interval
        return False
    return now >= state.first_above_time


class CoDel(DropTail):
    kind = "codel"

    def __init__(
        self,
        capacity_bytes: int = DEFAULT_CAPACITY_BYTES,
        target_s: float = DEFAULT_TARGET_S,
        interval_s: float = DEFAULT_INTERVAL_S,
    ):
        super().__init__(capacity_bytes)
        self.state = CoDelState.from_seconds(target_s, interval_s)
        # set to a list to record (time, count, drop_next) after every AQM drop;
        # drop_next is None for the drop that ends an episode
        self.drop_log: list[tuple[int, int, int | None]] | None = None

    # -- service-order hooks (FIFO here) --------------------------------------
    def _peek(self) -> Packet | None:
        return self.head()

    def _take(self, pkt: Packet) -> None:
        self._q.popleft()

    def _take_victim(self) -> Packet:
        return self._q.popleft()

    def _on_served(self, pkt: Packet, sojourn: int, now: int) -> None:
        pass

    def _on_aqm_drop(self, now: int) -> None:
        pass

    # -- control loop -------------------------------------------------------
    def _observe(self, pkt: Packet, now: int) -> bool:
        remaining = self.byte_length - pkt.size_bytes
        return should_drop(now - pkt.enqueued_at, now, self.state, remaining)

    def _drop(self, now: int, drops: list[Packet]) -> None:
        victim = self._take_victim()
        self._release(victim)
        self._count_aqm_drop()
        drops.append(victim)

    def _log_drop(self, now: int, drop_next: int | None) -> None:
        if self.drop_log is not None:
            self.drop_log.append((now, self.state.count, drop_next))

    def _exit_dropping(self) -> None:
        st = self.state
        if st.dropping:
            st.last_count = st.count
            st.last_drop_next = st.drop_next
        st.dropping = False
        st.count = 0
        st.drop_next = None

    def dequeue(self, now: int) -> Dequeued | None:
        st = self.state
        drops: list[Packet] = []
        cand = self._peek()
        if cand is None:
            st.first_above_time = None
            self._exit_dropping()
            return None
        ok_to_drop = self._observe(cand, now)

        if st.dropping:
            if not ok_to_drop:
                self._exit_dropping()
            while st.dropping and now >= st.drop_next:
                self._drop(now, drops)
                st.count += 1
                cand = self._peek()
                ok_to_drop = self._observe(cand, now)
                if not ok_to_drop:
                    # this drop ends the episode; no further drop is scheduled
                    self._log_drop(now, None)
                    self._on_aqm_drop(now)
                    self._exit_dropping()
                else:
                    st.drop_next = control_law(st.drop_next, st.count, st.interval)
                    self._log_drop(now, st.drop_next)
                    self._on_aqm_drop(now)
        elif ok_to_drop:
            self._drop(now, drops)
            cand = self._peek()
            self._observe(cand, now)
            st.dropping = True
            recent = (
                st.last_drop_next is not None
                and now - st.last_drop_next < REENTRY_WINDOW_INTERVALS * st.interval
            )
            st.count = st.last_count - 2 if recent and st.last_count > 2 else 1
            st.drop_next = control_law(now, st.count, st.interval)
            self._log_drop(now, st.drop_next)
            self._on_aqm_drop(now)

        self._take(cand)
        self._release(cand)
        self._c.dequeues += 1
        sojourn = now - cand.enqueued_at
        self._on_served(cand, sojourn, now)
        return Dequeued(cand, sojourn, drops)
