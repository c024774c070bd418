"""Links, the studied router egress port, and the two-client star scenario.

Client A (FTP/TCP) reaches Router A over 2 Mbps and Client B (CBR/UDP)
over 1.5 Mbps; Router A forwards to Server A over 1.7 Mbps through the
queue discipline under test. ACKs return over unbounded FIFO links.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, TextIO

from .codel import CoDel
from .config import Scenario
from .engine import NS_PER_S, Simulator, seconds_to_ns, transmission_ns
from .lstfcodel import LSTFCoDel
from .qdisc import MTU, DropTail, Outcome, Packet, Protocol, Qdisc
from .red import Red
from .trace import Tracer, TraceStats
from .traffic import CbrConfig, CbrSource, TcpSender, TcpSink

DRAIN_LIMIT_NS = 300 * NS_PER_S


class InvariantViolation(RuntimeError):
    pass


class Link:
    """Point-to-point link with an unbounded FIFO at its sending end."""

    def __init__(self, sim: Simulator, rate_bps: int, prop_delay: int, deliver: Callable[[Packet], None]):
        self.sim = sim
        self.rate_bps = rate_bps
        self.prop_delay = prop_delay
        self.deliver = deliver
        self.busy_until = 0
        # (start, end) of every serialization, when enabled
        self.tx_log: list[tuple[int, int]] | None = None

    def serialization(self, pkt: Packet) -> int:
        return transmission_ns(pkt.size_bytes, self.rate_bps)

    def transmit(self, pkt: Packet) -> int:
        """Queue ``pkt`` behind any transmission in progress; returns its arrival time."""
        if pkt.size_bytes > MTU:
            raise ValueError(f"packet {pkt.id} exceeds the MTU")
        start = max(self.sim.now, self.busy_until)
        self.busy_until = start + self.serialization(pkt)
        if self.tx_log is not None:
            self.tx_log.append((start, self.busy_until))
        arrival = self.busy_until + self.prop_delay
        self.sim.schedule(arrival, self.deliver, pkt)
        return arrival


def transmit(link: Link, pkt: Packet) -> int:
    return link.transmit(pkt)


class EgressPort:
    """A link fed by a queue discipline: dequeues whenever the line goes idle."""

    def __init__(self, sim: Simulator, qdisc: Qdisc, link: Link, tracer: Tracer):
        self.sim = sim
        self.qdisc = qdisc
        self.link = link
        self.tracer = tracer
        self.busy = False

    def receive(self, pkt: Packet) -> None:
        now = self.sim.now
        verdict = self.qdisc.enqueue(pkt, now)
        if verdict.accepted:
            self.tracer.record("enqueue", now, pkt)
        elif verdict.outcome is Outcome.DROPPED_TAIL:
            self.tracer.record("tail_drop", now, pkt)
        else:
            self.tracer.record("aqm_drop", now, pkt, 0)
        if not self.busy:
            self._send_next()

    def _send_next(self) -> None:
        now = self.sim.now
        out = self.qdisc.dequeue(now)
        if out is None:
            self.busy = False
            return
        for victim in out.aqm_drops:
            self.tracer.record("aqm_drop", now, victim, now - victim.enqueued_at)
        pkt = out.packet
        self.tracer.record("dequeue", now, pkt, out.sojourn)
        self.busy = True
        self.link.transmit(pkt)
        self.sim.schedule(self.link.busy_until, self._send_next)


def make_qdisc(scenario: Scenario, sim: Simulator) -> Qdisc:
    s = scenario
    if s.qdisc_kind == "droptail":
        return DropTail(s.qdisc_capacity_bytes)
    if s.qdisc_kind == "codel":
        return CoDel(s.qdisc_capacity_bytes, s.codel_target_s, s.codel_interval_s)
    if s.qdisc_kind == "lstfcodel":
        return LSTFCoDel(s.qdisc_capacity_bytes, s.codel_target_s, s.codel_interval_s,
                         s.lstfcodel_alpha, s.lstfcodel_drop_next_influence,
                         s.lstfcodel_congestion_signal)
    if s.qdisc_kind == "red":
        return Red(s.qdisc_capacity_bytes, s.link_server_bps, s.red_w_q, s.red_min_th_bytes,
                   s.red_max_th_bytes, s.red_max_p, rng=sim.rng("red"))
    raise ValueError(f"unknown qdisc kind {s.qdisc_kind!r}")


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    stats: TraceStats
    emitted: int
    delivered: int
    tail_drops: int
    aqm_drops: int
    events_executed: int
    end_time: int


class StarTopology:
    def __init__(self, scenario: Scenario, trace_sink: TextIO | None = None):
        s = scenario.validate()
        self.scenario = s
        self.sim = sim = Simulator(s.sim_seed)
        self.ids = itertools.count(1)
        delay = seconds_to_ns(s.link_delay_s)

        self.qdisc = make_qdisc(s, sim)
        self.tracer = Tracer(self.qdisc, trace_sink)
        self.delivered = 0

        # forward path
        self.server_link = Link(sim, s.link_server_bps, delay, self._server_receive)
        self.port = EgressPort(sim, self.qdisc, self.server_link, self.tracer)
        self.client_a_link = Link(sim, s.link_client_a_bps, delay, self.port.receive)
        self.client_b_link = Link(sim, s.link_client_b_bps, delay, self.port.receive)

        # reverse path for ACKs
        self.ack_to_client = Link(sim, s.link_client_a_bps, delay, self._client_a_receive)
        self.ack_to_router = Link(sim, s.link_server_bps, delay, self.ack_to_client.transmit)
        self._ack_rng = sim.rng("ack-jitter")
        self._ack_jitter = seconds_to_ns(s.ack_jitter_s)
        self._last_ack_at = 0

        self.sources: list = []
        self.tcp: TcpSender | None = None
        self.sink: TcpSink | None = None
        if s.ftp_enabled:
            self.tcp = TcpSender(sim, self.client_a_link.transmit, self.ids, "ftp", s.tcp_packet_bytes,
                                 s.tcp_alpha, s.tcp_init_ssthresh)
            self.sink = TcpSink(self._send_ack, self.ids, "ftp")
            sim.schedule(seconds_to_ns(s.ftp_start_s), self.tcp.start)
            self.sources.append(self.tcp)
        self.cbr: CbrSource | None = None
        if s.cbr_enabled:
            cfg = CbrConfig(s.cbr_rate_bps, s.cbr_packet_bytes, seconds_to_ns(s.cbr_start_s))
            self.cbr = CbrSource(sim, self.client_b_link.transmit, self.ids, cfg, "cbr")
            self.cbr.start()
            self.sources.append(self.cbr)

    def _server_receive(self, pkt: Packet) -> None:
        now = self.sim.now
        self.delivered += 1
        self.tracer.record("deliver", now, pkt)
        if pkt.protocol is Protocol.TCP_DATA and self.sink is not None:
            self.sink.on_data(pkt, now)

    def _send_ack(self, ack: Packet) -> None:
        jitter = 0
        if self._ack_jitter:
            jitter = int(self._ack_rng.random() * self._ack_jitter)
        at = max(self._last_ack_at, self.sim.now + jitter)
        self._last_ack_at = at
        self.sim.schedule(at, self.ack_to_router.transmit, ack)

    def _client_a_receive(self, ack: Packet) -> None:
        self.tcp.on_ack(ack.seq)

    def run(self) -> RunResult:
        s = self.scenario
        end = seconds_to_ns(s.sim_duration_s)
        self.sim.run_until(end)
        for src in self.sources:
            src.stop()
        while self.sim.pending:
            if self.sim.now - end > DRAIN_LIMIT_NS:
                raise InvariantViolation("network failed to drain after the sources stopped")
            self.sim.run_until(self.sim.now + NS_PER_S)
        occ = self.qdisc.occupancy()
        emitted = sum(src.emitted for src in self.sources)
        if occ.packet_length != 0 or emitted != self.delivered + occ.tail_drops + occ.aqm_drops:
            raise InvariantViolation(
                f"packet conservation violated: emitted={emitted} delivered={self.delivered} "
                f"tail_drops={occ.tail_drops} aqm_drops={occ.aqm_drops} resident={occ.packet_length}"
            )
        return RunResult(s, self.tracer.stats, emitted, self.delivered, occ.tail_drops,
                         occ.aqm_drops, self.sim.executed, self.sim.now)


def build_star_topology(scenario: Scenario, trace_sink: TextIO | None = None) -> StarTopology:
    return StarTopology(scenario, trace_sink)


def run_scenario(scenario: Scenario, trace_sink: TextIO | None = None) -> RunResult:
    return StarTopology(scenario, trace_sink).run()
