"""Discrete-event engine: integer-nanosecond virtual time, a deterministic
event calendar and named, seedable random streams."""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

NS_PER_S = 1_000_000_000


def seconds_to_ns(seconds: float) -> int:
    """Convert seconds to the nearest integer nanosecond."""
    return int(round(seconds * NS_PER_S))


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_S


def format_seconds(ns: int) -> str:
    """Exact decimal rendering of a nanosecond time with 9 fractional digits."""
    sign = "-" if ns < 0 else ""
    whole, frac = divmod(abs(ns), NS_PER_S)
    return f"{sign}{whole}.{frac:09d}"


def transmission_ns(size_bytes: int, rate_bps: int) -> int:
    """Serialization time of ``size_bytes`` at ``rate_bps``, rounded to the nearest ns."""
    num = size_bytes * 8 * NS_PER_S
    return (num + rate_bps // 2) // rate_bps


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current virtual time."""


class EventHandle:
    __slots__ = ("fire_at", "seq", "action", "args", "cancelled")

    def __init__(self, fire_at: int, seq: int, action: Callable[..., Any], args: tuple):
        self.fire_at = fire_at
        self.seq = seq
        self.action = action
        self.args = args
        self.cancelled = False

    def __repr__(self) -> str:
        return f"EventHandle(fire_at={self.fire_at}, seq={self.seq}, cancelled={self.cancelled})"


@dataclass(frozen=True)
class RunSummary:
    events_executed: int
    final_time: int


class RngStream:
    """PCG64 stream derived from a 64-bit seed and a stream name.

    The stream name is folded into the seed sequence's spawn key via CRC-32,
    so every named source gets an independent, reproducible stream.
    """

    def __init__(self, seed: int, name: str = ""):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.name = name
        ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
        self._bitgen = np.random.PCG64(ss)

    def next_u64(self) -> int:
        return int(self._bitgen.random_raw())

    def random(self) -> float:
        """Uniform draw on the open interval (0, 1) with 53 bits of precision."""
        return ((self.next_u64() >> 11) + 0.5) / 2.0**53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()


class Simulator:
    """Single-threaded event loop over integer-nanosecond virtual time.

    Events with equal ``fire_at`` run in insertion order.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._now = 0
        self._heap: list[tuple[int, int, EventHandle]] = []
        self._seq = 0
        self.scheduled = 0
        self.cancelled = 0
        self.executed = 0
        self._streams: dict[str, RngStream] = {}

    @property
    def now(self) -> int:
        return self._now

    @property
    def pending(self) -> int:
        return self.scheduled - self.cancelled - self.executed

    def schedule(self, fire_at: int, action: Callable[..., Any], *args: Any) -> EventHandle:
        if fire_at < self._now:
            raise SchedulingError(
                f"cannot schedule {action!r} at t={format_seconds(fire_at)}s; "
                f"now is t={format_seconds(self._now)}s"
            )
        handle = EventHandle(fire_at, self._seq, action, args)
        heapq.heappush(self._heap, (fire_at, self._seq, handle))
        self._seq += 1
        self.scheduled += 1
        return handle

    def schedule_in(self, delay: int, action: Callable[..., Any], *args: Any) -> EventHandle:
        return self.schedule(self._now + delay, action, *args)

    def cancel(self, handle: EventHandle) -> bool:
        """Cancel a pending event. Returns False if it already ran or was cancelled."""
        if handle.cancelled or handle.seq < 0:
            return False
        handle.cancelled = True
        self.cancelled += 1
        return True

    def run_until(self, t_end: int) -> RunSummary:
        if t_end < self._now:
            raise SchedulingError(
                f"run_until({format_seconds(t_end)}) is before now={format_seconds(self._now)}"
            )
        heap = self._heap
        pop = heapq.heappop
        ran = 0
        while heap and heap[0][0] <= t_end:
            fire_at, _, handle = pop(heap)
            if handle.cancelled:
                continue
            handle.seq = -1  # marks as executed so cancel() becomes a no-op
            self._now = fire_at
            self.executed += 1
            ran += 1
            handle.action(*handle.args)
        self._now = t_end
        return RunSummary(ran, t_end)

    def rng(self, name: str) -> RngStream:
        """Return the random stream for ``name``, creating it on first use."""
        stream = self._streams.get(name)
        if stream is None:
            stream = self._streams[name] = RngStream(self.seed, name)
        return stream
