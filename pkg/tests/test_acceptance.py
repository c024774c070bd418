"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the lines are repeated in the
terminal summary. ``python3 tests/test_acceptance.py`` runs the same checks
without pytest.
"""

import hashlib
import math
import random
import sys
import time
from decimal import Decimal, getcontext
from pathlib import Path

import numpy as np

from aqmsim.config import load_scenario
from aqmsim.engine import RngStream, transmission_ns
from aqmsim.lstfcodel import LSTFCoDel, SlackEstimator, classify
from aqmsim.qdisc import DropTail, Packet, Protocol
from aqmsim.red import Mark, RedState, red_mark_decision, red_update_avg
from aqmsim.stats import RunningStats, clt_sample, f_test, welch_t_test
from aqmsim.topology import StarTopology, run_scenario
from aqmsim.traffic import TcpRttEstimator, rtt_update

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

MS = 10**6
SEEDS = (1, 2, 3, 4, 5)

# reference delay moments: CoDel, and LSTFCoDel at alpha = 0.5
CODEL_MEAN, CODEL_SD = 0.035329, 0.00228407
LSTF_MEAN, LSTF_SD = 0.00859185, 0.0181358


def verdict(number, ok, detail, elapsed, limit):
    within = elapsed < limit
    line = (f"{'PASS' if ok and within else 'FAIL'} criterion {number}: {detail} "
            f"[{elapsed:.2f}s, limit {limit:g}s]")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def pkt(i, size, t):
    return Packet(i, "f", size, Protocol.UDP, t)


# 1 ---------------------------------------------------------------------------------

def test_criterion_01_slack_update_and_classifier():
    t0 = time.perf_counter()
    getcontext().prec = 50
    rng = random.Random(101)
    est = SlackEstimator(0.5)
    ref = Decimal(0)
    worst = 0.0
    for _ in range(10_000):
        a = rng.random()
        beta = rng.expovariate(1 / 0.02)
        pending = rng.expovariate(1 / 0.05) if rng.random() < 0.2 else 0.0
        est.alpha = a
        est.pending_drop_next_influence = pending
        est.update(beta)
        ref = (1 - Decimal(a)) * ref + Decimal(a) * (Decimal(beta) + Decimal(pending))
        if ref:
            worst = max(worst, abs(Decimal(est.gamma) - ref) / ref)
    grid = [classify(k / 100) for k in range(1, 1001)]
    decreasing = all(x > y for x, y in zip(grid, grid[1:]))
    bounded = all(0.0 <= e <= 1.0 for e in grid)
    ok = worst <= Decimal("1e-12") and classify(0.0) == 0.0 and decreasing and bounded
    verdict(1, ok, f"max rel err {float(worst):.2e} over 10,000 updates; classify(0)=0; "
                   f"grid strictly decreasing={decreasing}", time.perf_counter() - t0, 1)


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_fifo_degeneration():
    t0 = time.perf_counter()
    results = []
    for gamma in (0.0, 0.02):
        rng = random.Random(202)
        lstf, fifo = LSTFCoDel(), DropTail()
        lstf.slack.alpha = 0.0  # gamma stays constant for every arrival
        lstf.slack.gamma = gamma
        seq_lstf, seq_fifo = [], []
        now = 0
        for i in range(10_000):
            now += rng.randint(0, 20_000)
            size = rng.randint(40, 1500)
            va = lstf.enqueue(pkt(i, size, now), now)
            vb = fifo.enqueue(pkt(i, size, now), now)
            seq_lstf.append(("in", i, va.outcome))
            seq_fifo.append(("in", i, vb.outcome))
            while rng.random() < 0.5:
                a, b = lstf.dequeue(now), fifo.dequeue(now)
                seq_lstf.append(("out", a and a.packet.id, a and a.aqm_drops))
                seq_fifo.append(("out", b and b.packet.id, b and b.aqm_drops))
        while len(fifo):
            now += 1000
            seq_lstf.append(("out", lstf.dequeue(now).packet.id))
            seq_fifo.append(("out", fifo.dequeue(now).packet.id))
        results.append((gamma, seq_lstf == seq_fifo and len(lstf) == 0, fifo.occupancy().tail_drops))
    ok = all(same for _, same, _ in results)
    detail = "; ".join(f"gamma={g}: identical={same} (tail drops {td})" for g, same, td in results)
    verdict(2, ok, detail + " over 10,000 arrivals each", time.perf_counter() - t0, 5)


# 3 ---------------------------------------------------------------------------------

def _model_trace(seed, scripted_gamma):
    rng = random.Random(seed)
    q = LSTFCoDel(30_000, alpha=0.0 if scripted_gamma else 0.5)
    now = n = dequeues = drops = violations = 0
    for _ in range(15_000):
        now += rng.randint(0, 3 * MS)
        for _ in range(rng.choice((0, 1, 1, 2, 3))):
            if scripted_gamma:
                q.slack.gamma = rng.random()
            q.enqueue(pkt(n, rng.randint(40, 1500), now), now)
            n += 1
        model = {pid: (eps, seq) for eps, seq, pid in q.resident_keys()}
        keys = sorted(model.values())
        out = q.dequeue(now)
        if out is None:
            violations += bool(keys)
            continue
        dequeues += 1
        for victim in out.aqm_drops:
            drops += 1
            violations += model[victim.id] != keys[-1]
            keys.remove(model[victim.id])
        violations += model[out.packet.id] != keys[0]
    return dequeues, drops, violations


def test_criterion_03_priority_order_model():
    t0 = time.perf_counter()
    totals = [0, 0, 0]
    for seed in (301, 302):
        for scripted in (False, True):
            for i, v in enumerate(_model_trace(seed, scripted)):
                totals[i] += v
    dequeues, drops, violations = totals
    ok = violations == 0 and drops > 100
    verdict(3, ok, f"{dequeues} dequeues and {drops} AQM victims checked against the sorted model, "
                   f"{violations} violations", time.perf_counter() - t0, 10)


# 4 ---------------------------------------------------------------------------------

def _light_load_drops(overrides):
    s = load_scenario(None, {"qdisc.kind": "codel", **overrides})
    return run_scenario(s).aqm_drops


def test_criterion_04_codel_control_law():
    t0 = time.perf_counter()
    topo = StarTopology(load_scenario(None, {"qdisc.kind": "codel"}))
    topo.qdisc.drop_log = log = []
    topo.run()
    interval = topo.qdisc.state.interval
    max_slot = transmission_ns(1500, topo.scenario.link_server_bps)
    deviations, lateness = [], []
    for (t_a, c_a, next_a), (t_b, c_b, next_b) in zip(log, log[1:]):
        if next_a is None or c_b != c_a + 1:
            continue  # the later drop opens a new episode
        lateness.append(t_b - next_a)
        if next_b is not None and c_b >= 3:
            deviations.append(abs((next_b - next_a) / (interval / math.sqrt(c_b)) - 1))
    law_ok = len(deviations) > 1000 and max(deviations) <= 0.05
    timing_ok = 0 <= min(lateness) and max(lateness) <= max_slot

    limit_bps = 0.8 * topo.scenario.link_server_bps
    light = {
        "cbr only": {"ftp.enabled": False, "cbr.rate_bps": int(limit_bps), "cbr.start_s": 0},
        "ftp only": {"cbr.enabled": False, "link.client_a_bps": int(limit_bps)},
        "ftp + cbr": {"link.client_a_bps": int(limit_bps) - 560_000, "cbr.rate_bps": 560_000},
    }
    light_drops = {name: _light_load_drops(o) for name, o in light.items()}
    ok = law_ok and timing_ok and all(d == 0 for d in light_drops.values())
    verdict(4, ok, f"{len(deviations)} drop_next deltas with count>=3, max deviation from interval/sqrt(count) "
                   f"{max(deviations):.1e}; drops late by at most {max(lateness) / MS:.3f} ms "
                   f"(one slot {max_slot / MS:.3f} ms); AQM drops at 80% load {light_drops}",
            time.perf_counter() - t0, 120)


# 5 ---------------------------------------------------------------------------------

def test_criterion_05_lstfcodel_vs_codel_delay():
    t0 = time.perf_counter()
    per_seed = []
    for seed in SEEDS:
        res = {}
        for kind in ("codel", "lstfcodel"):
            s = load_scenario(None, {"qdisc.kind": kind, "sim.seed": seed, "lstfcodel.alpha": 0.5})
            d = run_scenario(s).stats.delay
            res[kind] = (d.mean, d.variance)
        per_seed.append(res)
    codel_mean = sum(r["codel"][0] for r in per_seed) / len(SEEDS)
    lstf_mean = sum(r["lstfcodel"][0] for r in per_seed) / len(SEEDS)
    codel_var = sum(r["codel"][1] for r in per_seed) / len(SEEDS)
    lstf_var = sum(r["lstfcodel"][1] for r in per_seed) / len(SEEDS)
    reductions = [1 - r["lstfcodel"][0] / r["codel"][0] for r in per_seed]
    var_higher = [r["lstfcodel"][1] > r["codel"][1] for r in per_seed]
    reduction = 1 - lstf_mean / codel_mean
    ok = reduction >= 0.30 and min(reductions) >= 0.30 and lstf_var > codel_var and all(var_higher)
    verdict(5, ok, f"mean delay CoDel {codel_mean:.5f}s vs LSTFCoDel {lstf_mean:.5f}s "
                   f"(reduction {reduction:.1%}, per seed {min(reductions):.1%}..{max(reductions):.1%}); "
                   f"variance {codel_var:.3e} vs {lstf_var:.3e} s^2 (higher on {sum(var_higher)}/5 seeds)",
            time.perf_counter() - t0, 600)


# 6 ---------------------------------------------------------------------------------

def test_criterion_06_hypothesis_tests_from_reference_moments():
    t0 = time.perf_counter()
    codel = clt_sample(CODEL_MEAN, CODEL_SD, 500, RngStream(6, "codel"))
    lstf = clt_sample(LSTF_MEAN, LSTF_SD, 500, RngStream(6, "lstfcodel"))
    t = welch_t_test(codel, lstf, "greater")
    f = f_test(codel, lstf)
    ok = 25 <= t.t_stat <= 40 and t.p_value < 1e-10 and 0.008 <= f.f_stat <= 0.025
    verdict(6, ok, f"t={t.t_stat:.3f} (df {t.df:.1f}), p={t.p_value:.2e}, F={f.f_stat:.5f}",
            time.perf_counter() - t0, 5)


# 7 ---------------------------------------------------------------------------------

def _two_pass(xs):
    mean = math.fsum(xs) / len(xs)
    return mean, math.fsum((x - mean) ** 2 for x in xs) / len(xs)


def test_criterion_07_welford_large_offset():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    streams = {
        "1e6 + N(0, 1e-3)": 1e6 + rng.normal(0.0, 1e-3, 10**6),
        "1e9 + N(0, 1)": 1e9 + rng.normal(0.0, 1.0, 10**6),
    }
    worst = 0.0
    for xs in streams.values():
        xs = xs.tolist()
        acc = RunningStats().extend(xs)
        mean, var = _two_pass(xs)
        worst = max(worst, abs(acc.mean - mean) / abs(mean), abs(acc.variance - var) / var)
    verdict(7, worst <= 1e-9, f"max rel err {worst:.2e} on {len(streams)} streams of 10^6 points",
            time.perf_counter() - t0, 5)


# 8 ---------------------------------------------------------------------------------

def test_criterion_08_red_pseudocode():
    t0 = time.perf_counter()
    slot = 10_000
    a = red_update_avg(RedState(w_q=0.002, avg=100.0), 50, 0, idle=False, typical_tx_time=slot)
    b = red_update_avg(RedState(avg=100.0, q_time=3 * slot), 0, 3 * slot, idle=True, typical_tx_time=slot)
    c = red_update_avg(RedState(w_q=0.5, avg=100.0, q_time=0), 0, 2 * slot, idle=True, typical_tx_time=slot)
    exact = (a, b, c) == (99.9, 100.0, 25.0)
    st = RedState()
    st.avg = st.max_th
    rng = RngStream(8, "red")
    forced = sum(red_mark_decision(st, rng) is Mark.FORCE for _ in range(10**5))
    ok = exact and forced == 10**5
    verdict(8, ok, f"avg updates {a!r}, {b!r}, {c!r}; force-marked {forced}/100000 at avg=max_th",
            time.perf_counter() - t0, 5)


# 9 ---------------------------------------------------------------------------------

def _trace_digest(path: Path, overrides):
    with path.open("w", newline="") as sink:
        run_scenario(load_scenario(None, overrides), sink)
    return hashlib.sha256(path.read_bytes()).hexdigest(), path.stat().st_size


def test_criterion_09_determinism(tmp_path):
    t0 = time.perf_counter()
    same = []
    for kind in ("codel", "lstfcodel"):
        first = _trace_digest(tmp_path / f"{kind}_1.csv", {"qdisc.kind": kind, "sim.seed": 9})
        second = _trace_digest(tmp_path / f"{kind}_2.csv", {"qdisc.kind": kind, "sim.seed": 9})
        same.append((kind, first == second, first[1]))
    ok = all(s for _, s, _ in same)
    verdict(9, ok, "; ".join(f"{k} 600 s trace byte-identical={s} ({n / 1e6:.1f} MB)" for k, s, n in same),
            time.perf_counter() - t0, 300)


# 10 --------------------------------------------------------------------------------

def test_criterion_10_rtt_estimator():
    t0 = time.perf_counter()
    rng = random.Random(10)
    fixed_ok = True
    for _ in range(10_000):
        s, alpha = rng.uniform(0, 2), rng.random()
        fixed_ok &= rtt_update(TcpRttEstimator(alpha, s), s).estimated_rtt == s
    worst_closed = worst_ratio = 0.0
    for alpha in (0.125, 0.25, 0.5, 0.875):
        e0, s = 1.0, 0.05
        est = TcpRttEstimator(alpha, e0)
        prev_gap = e0 - s
        for k in range(1, 400):
            rtt_update(est, s)
            closed = s + (1 - alpha) ** k * (e0 - s)
            worst_closed = max(worst_closed, abs(est.estimated_rtt - closed) / closed)
            gap = est.estimated_rtt - s
            if prev_gap > 1e-6:
                worst_ratio = max(worst_ratio, abs(gap / prev_gap - (1 - alpha)))
            prev_gap = gap
    ok = fixed_ok and worst_closed <= 1e-9 and worst_ratio <= 1e-9
    verdict(10, ok, f"fixed point exact={fixed_ok}; closed-form rel err {worst_closed:.1e}; "
                    f"contraction ratio err {worst_ratio:.1e}", time.perf_counter() - t0, 1)


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
