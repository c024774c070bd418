"""Packets, the queue-discipline interface, and the DropTail FIFO baseline."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .engine import ns_to_seconds

MTU = 1500
DEFAULT_CAPACITY_BYTES = 10 * MTU


class Protocol(str, enum.Enum):
    TCP_DATA = "tcp-data"
    TCP_ACK = "tcp-ack"
    UDP = "udp"


@dataclass(eq=False)
class Packet:
    id: int
    flow: str
    size_bytes: int
    protocol: Protocol
    created_at: int
    enqueued_at: int | None = None
    priority: float | None = None
    # transport fields; unused by the queues
    seq: int = -1
    retransmit: bool = False
    sent_at: int = 0

    def __post_init__(self):
        if not 0 < self.size_bytes <= MTU:
            raise ValueError(f"packet size {self.size_bytes} outside (0, {MTU}]")


class Outcome(str, enum.Enum):
    ENQUEUED = "enqueued"
    DROPPED_TAIL = "dropped-tail"
    DROPPED_AQM = "dropped-aqm"


class QdiscVerdict(NamedTuple):
    outcome: Outcome
    dropped_packet: Packet | None = None

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ENQUEUED


ENQUEUED = QdiscVerdict(Outcome.ENQUEUED)


class Dequeued(NamedTuple):
    packet: Packet
    sojourn: int  # ns
    aqm_drops: list[Packet]

    @property
    def sojourn_s(self) -> float:
        return ns_to_seconds(self.sojourn)


@dataclass(frozen=True)
class QdiscStats:
    enqueues: int = 0
    dequeues: int = 0
    tail_drops: int = 0
    aqm_drops: int = 0
    byte_length: int = 0
    packet_length: int = 0


@dataclass
class _Counters:
    enqueues: int = 0
    dequeues: int = 0
    tail_drops: int = 0
    aqm_drops: int = 0
    byte_length: int = 0
    packet_length: int = 0
    resident: set = field(default_factory=set)


class Qdisc:
    """Byte-limited queue. Subclasses supply the container and service order.

    ``enqueues`` counts every offered packet, so the identity
    ``enqueues == dequeues + tail_drops + aqm_drops + packet_length`` holds
    after any sequence of operations.
    """

    kind = "abstract"

    def __init__(self, capacity_bytes: int = DEFAULT_CAPACITY_BYTES):
        if capacity_bytes < MTU:
            raise ValueError(f"capacity_bytes must be at least one MTU ({MTU}), got {capacity_bytes}")
        self.capacity_bytes = capacity_bytes
        self._c = _Counters()

    # -- container hooks -------------------------------------------------
    def _push(self, pkt: Packet) -> None:
        raise NotImplementedError

    def _pop(self) -> Packet | None:
        raise NotImplementedError

    # -- public interface ------------------------------------------------
    def enqueue(self, pkt: Packet, now: int) -> QdiscVerdict:
        if pkt.id in self._c.resident:
            raise ValueError(f"packet {pkt.id} is already queued")
        self._c.enqueues += 1
        if self._c.byte_length + pkt.size_bytes > self.capacity_bytes:
            self._c.tail_drops += 1
            return QdiscVerdict(Outcome.DROPPED_TAIL, pkt)
        self._admit(pkt, now)
        return ENQUEUED

    def dequeue(self, now: int) -> Dequeued | None:
        pkt = self._pop()
        if pkt is None:
            return None
        self._release(pkt)
        self._c.dequeues += 1
        return Dequeued(pkt, now - pkt.enqueued_at, [])

    def occupancy(self) -> QdiscStats:
        c = self._c
        return QdiscStats(c.enqueues, c.dequeues, c.tail_drops, c.aqm_drops, c.byte_length, c.packet_length)

    @property
    def byte_length(self) -> int:
        return self._c.byte_length

    def __len__(self) -> int:
        return self._c.packet_length

    # -- accounting helpers for subclasses ---------------------------------
    def _admit(self, pkt: Packet, now: int) -> None:
        pkt.enqueued_at = now
        self._push(pkt)
        self._c.resident.add(pkt.id)
        self._c.byte_length += pkt.size_bytes
        self._c.packet_length += 1

    def _release(self, pkt: Packet) -> None:
        self._c.resident.discard(pkt.id)
        self._c.byte_length -= pkt.size_bytes
        self._c.packet_length -= 1

    def _count_aqm_drop(self) -> None:
        self._c.aqm_drops += 1


class DropTail(Qdisc):
    kind = "droptail"

    def __init__(self, capacity_bytes: int = DEFAULT_CAPACITY_BYTES):
        super().__init__(capacity_bytes)
        self._q: deque[Packet] = deque()

    def _push(self, pkt: Packet) -> None:
        self._q.append(pkt)

    def _pop(self) -> Packet | None:
        return self._q.popleft() if self._q else None

    def head(self) -> Packet | None:
        return self._q[0] if self._q else None
