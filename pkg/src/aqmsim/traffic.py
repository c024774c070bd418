"""Traffic sources: a backlogged FTP transfer over simplified Reno TCP, and CBR over UDP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .engine import EventHandle, Simulator, ns_to_seconds, seconds_to_ns, transmission_ns
from .qdisc import MTU, Packet, Protocol

ACK_BYTES = 40


@dataclass
class TcpRttEstimator:
    alpha: float = 0.125
    estimated_rtt: float = 0.0
    last_sample: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def rtt_update(est: TcpRttEstimator, sample: float) -> TcpRttEstimator:
    """Exponentially weighted RTT estimate: ``(1 - alpha) * estimate + alpha * sample``."""
    if sample < 0.0:
        raise ValueError(f"negative RTT sample {sample}")
    est.last_sample = sample
    # incremental form: a constant input is an exact fixed point
    est.estimated_rtt += est.alpha * (sample - est.estimated_rtt)
    return est


@dataclass
class TcpSenderState:
    cwnd: float = 1.0
    ssthresh: float = 64.0
    next_seq: int = 0
    highest_acked: int = 0
    rto: float = 1.0
    timer: EventHandle | None = None
    dup_acks: int = 0
    # highest sequence outstanding when the last loss response began
    recover: int = -1
    fast_recovery: bool = False
    high_seq: int = 0

    @property
    def in_flight(self) -> int:
        return self.next_seq - self.highest_acked


@dataclass
class _Segment:
    sent_at: int
    retransmitted: bool = False


class TcpSender:
    """Always-backlogged Reno sender; windows are counted in segments.

    Loss recovery: three duplicate ACKs halve the window and retransmit the
    first unacknowledged segment (partial ACKs retransmit the next hole);
    a timeout collapses the window to one segment, backs off the RTO and
    goes back to the first unacknowledged segment. Per Karn, retransmitted
    segments never yield RTT samples.
    """

    def __init__(
        self,
        sim: Simulator,
        send: Callable[[Packet], None],
        ids: Iterator[int],
        flow: str = "ftp",
        packet_bytes: int = MTU,
        alpha: float = 0.125,
        init_ssthresh: float = 64.0,
        init_rto_s: float = 1.0,
        min_rto_s: float = 0.2,
        max_rto_s: float = 60.0,
    ):
        self.sim = sim
        self.send = send
        self.ids = ids
        self.flow = flow
        self.packet_bytes = packet_bytes
        self.est = TcpRttEstimator(alpha)
        self.state = TcpSenderState(ssthresh=init_ssthresh, rto=init_rto_s)
        self.min_rto = min_rto_s
        self.max_rto = max_rto_s
        self.has_sample = False
        self.segments: dict[int, _Segment] = {}
        self.emitted = 0
        self.stopped = False
        # (time, in_flight, cwnd) after every new-data transmission, when enabled
        self.send_log: list[tuple[int, int, float]] | None = None

    def start(self) -> None:
        self._fill_window()

    def stop(self) -> None:
        self.stopped = True
        if self.state.timer is not None:
            self.sim.cancel(self.state.timer)
            self.state.timer = None

    # -- transmission -----------------------------------------------------
    def _transmit(self, seq: int) -> None:
        now = self.sim.now
        seg = self.segments.get(seq)
        if seg is None:
            self.segments[seq] = _Segment(now)
            retransmit = False
        else:
            seg.retransmitted = True
            seg.sent_at = now
            retransmit = True
        pkt = Packet(next(self.ids), self.flow, self.packet_bytes, Protocol.TCP_DATA, now,
                     seq=seq, retransmit=retransmit, sent_at=now)
        self.emitted += 1
        self.send(pkt)

    def _fill_window(self) -> None:
        st = self.state
        if self.stopped:
            return
        while st.in_flight < math.floor(st.cwnd):
            self._transmit(st.next_seq)
            st.next_seq += 1
            st.high_seq = max(st.high_seq, st.next_seq)
            if self.send_log is not None:
                self.send_log.append((self.sim.now, st.in_flight, st.cwnd))
        if st.timer is None and st.in_flight > 0:
            self._arm_timer()

    def _arm_timer(self) -> None:
        st = self.state
        if st.timer is not None:
            self.sim.cancel(st.timer)
        st.timer = self.sim.schedule_in(seconds_to_ns(st.rto), self.on_timeout)

    # -- feedback ---------------------------------------------------------
    def on_ack(self, ack_seq: int) -> None:
        st = self.state
        if self.stopped:
            return
        if ack_seq > st.high_seq:
            raise ValueError(f"ACK {ack_seq} beyond highest sent sequence {st.high_seq}")
        now = self.sim.now
        if ack_seq > st.highest_acked:
            seg = self.segments.get(ack_seq - 1)
            if seg is not None and not seg.retransmitted:
                self._rtt_sample(ns_to_seconds(now - seg.sent_at))
            for s in range(st.highest_acked, ack_seq):
                self.segments.pop(s, None)
            st.highest_acked = ack_seq
            st.next_seq = max(st.next_seq, ack_seq)
            st.dup_acks = 0
            if st.fast_recovery and ack_seq <= st.recover:
                # partial ACK: the next hole was lost too
                self._transmit(ack_seq)
            elif st.fast_recovery:
                st.fast_recovery = False
            elif st.cwnd < st.ssthresh:
                st.cwnd += 1.0
            else:
                st.cwnd += 1.0 / st.cwnd
            if st.timer is not None:
                self.sim.cancel(st.timer)
                st.timer = None
            if st.in_flight > 0:
                self._arm_timer()
            self._fill_window()
        elif ack_seq == st.highest_acked and st.in_flight > 0:
            st.dup_acks += 1
            if st.dup_acks == 3 and st.highest_acked > st.recover:
                self.on_loss(timeout=False)

    def _rtt_sample(self, sample: float) -> None:
        if self.has_sample:
            rtt_update(self.est, sample)
        else:
            self.est.estimated_rtt = self.est.last_sample = sample
            self.has_sample = True
        self.state.rto = min(max(2.0 * self.est.estimated_rtt, self.min_rto), self.max_rto)

    def on_loss(self, timeout: bool) -> None:
        st = self.state
        st.ssthresh = max(st.cwnd / 2.0, 2.0)
        st.recover = st.high_seq - 1
        st.dup_acks = 0
        st.fast_recovery = not timeout
        if timeout:
            st.cwnd = 1.0
            st.rto = min(st.rto * 2.0, self.max_rto)
            st.next_seq = st.highest_acked
            if st.timer is not None:
                self.sim.cancel(st.timer)
                st.timer = None
            self._fill_window()
        else:
            st.cwnd = st.ssthresh
            self._transmit(st.highest_acked)
            self._arm_timer()

    def on_timeout(self) -> None:
        self.state.timer = None
        if self.stopped or self.state.in_flight == 0:
            return
        self.on_loss(timeout=True)


class TcpSink:
    """Cumulative-ACK receiver that buffers out-of-order segments."""

    def __init__(self, send_ack: Callable[[Packet], None], ids: Iterator[int], flow: str = "ftp"):
        self.send_ack = send_ack
        self.ids = ids
        self.flow = flow
        self.expected = 0
        self.buffered: set[int] = set()

    def on_data(self, pkt: Packet, now: int) -> None:
        if pkt.seq == self.expected:
            self.expected += 1
            while self.expected in self.buffered:
                self.buffered.remove(self.expected)
                self.expected += 1
        elif pkt.seq > self.expected:
            self.buffered.add(pkt.seq)
        ack = Packet(next(self.ids), self.flow, ACK_BYTES, Protocol.TCP_ACK, now, seq=self.expected)
        self.send_ack(ack)


@dataclass
class CbrConfig:
    rate_bps: int = 1_500_000
    packet_size_bytes: int = 1000
    start_at: int = seconds_to_ns(300.0)
    period: int = field(init=False)

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ValueError(f"CBR rate must be positive, got {self.rate_bps}")
        if not 0 < self.packet_size_bytes <= MTU:
            raise ValueError(f"CBR packet size {self.packet_size_bytes} outside (0, {MTU}]")
        self.period = transmission_ns(self.packet_size_bytes, self.rate_bps)


class CbrSource:
    """Emits one packet every ``config.period`` ns from ``config.start_at`` on, ignoring feedback."""

    def __init__(self, sim: Simulator, send: Callable[[Packet], None], ids: Iterator[int],
                 config: CbrConfig, flow: str = "cbr"):
        self.sim = sim
        self.send = send
        self.ids = ids
        self.config = config
        self.flow = flow
        self.emitted = 0
        self.stopped = False
        self._next: EventHandle | None = None

    def start(self) -> None:
        self._next = self.sim.schedule(max(self.config.start_at, self.sim.now), self.cbr_emit)

    def stop(self) -> None:
        self.stopped = True
        if self._next is not None:
            self.sim.cancel(self._next)
            self._next = None

    def cbr_emit(self) -> None:
        now = self.sim.now
        pkt = Packet(next(self.ids), self.flow, self.config.packet_size_bytes, Protocol.UDP, now)
        self.emitted += 1
        self.send(pkt)
        self._next = self.sim.schedule(now + self.config.period, self.cbr_emit)
