import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from v2x_alloc.power import PairChannel, capacity_no_interference
from v2x_alloc.queueing import busy_probability, mean_sojourn_time
from v2x_alloc.simulator import (
    QUEUEING,
    SimConfig,
    queue_lengths,
    run_pair,
    run_queue,
    simulate_due_queue,
    simulate_pair,
)

T = 2e-4


def naive_lengths(arrivals, success):
    q, out = 0, []
    for a, s in zip(arrivals, success):
        out.append(q)
        q = max(q - s, 0) + a
    return np.array(out), q


@given(st.lists(st.tuples(st.integers(0, 3), st.booleans()), min_size=1, max_size=200))
@settings(max_examples=200, deadline=None)
def test_lindley_vectorisation(slots):
    a = np.array([x for x, _ in slots])
    s = np.array([y for _, y in slots])
    q, end = queue_lengths(a, s)
    qn, endn = naive_lengths(a, s)
    assert np.array_equal(q, qn) and end == endn


def test_trace_invariants():
    rng = np.random.default_rng(0)
    fail = np.random.default_rng(1)
    tr = run_queue(2000, T, 50_000, lambda n: fail.random(n) >= 0.3, rng)
    dep = tr.departure_slots
    assert tr.served == len(tr.arrival_times)  # drained
    assert np.all(np.diff(dep) >= 1)  # at most one departure per slot
    soj = tr.sojourn_times()
    assert np.all(soj > T)  # at least the remainder of the arrival slot plus one slot
    assert np.all(tr.attempt_counts() >= 1)
    assert np.all(dep > tr.arrival_slots)  # sent no earlier than the next slot


def test_light_traffic_latency():
    st_ = simulate_due_queue(5.0, T, 0.0, SimConfig(slots=200_000, seeds=tuple(range(5)), measure_mode=QUEUEING))
    assert st_.mean_sojourn == pytest.approx(1.5 * T, rel=0.01)


def test_spot_value_and_littles_law():
    sim = SimConfig(slots=400_000, seeds=tuple(range(10)), measure_mode=QUEUEING, master_seed=4)
    s = simulate_due_queue(1000, T, 0.5, sim)
    assert s.mean_sojourn == pytest.approx(7e-4, rel=0.02)
    assert s.mean_in_system == pytest.approx(1000 * s.mean_sojourn, rel=0.03)
    assert s.empirical_busy == pytest.approx(busy_probability(1000, T, 0.5), rel=0.02)
    assert s.empirical_outage == pytest.approx(0.5, abs=0.005)
    assert s.packets_served <= s.packets_arrived
    assert abs(s.mean_sojourn - 7e-4) < 3 * s.sojourn_ci + 2e-6


def test_unstable_queue_flagged():
    sim = SimConfig(slots=100_000, seeds=(0, 1), measure_mode=QUEUEING)
    s = simulate_due_queue(1000, T, 0.85, sim)
    assert s.unstable
    tr = run_queue(1000, T, 100_000, lambda n, r=np.random.default_rng(2): r.random(n) >= 0.85,
                   np.random.default_rng(3))
    q = tr.queue[:100_000]
    # backlog grows roughly linearly at rate lambda T - (1 - q) per slot
    assert q[-1] == pytest.approx(100_000 * (0.2 - 0.15), rel=0.1)
    assert q[50_000] < q[-1]


def test_attempts_are_geometric():
    fail = np.random.default_rng(7)
    q = 0.4
    tr = run_queue(500, T, 400_000, lambda n: fail.random(n) >= q, np.random.default_rng(8))
    n = tr.attempt_counts()
    kmax = 8
    observed = np.array([np.sum(n == k) for k in range(1, kmax)] + [np.sum(n >= kmax)])
    pk = [(1 - q) * q ** (k - 1) for k in range(1, kmax)]
    expected = len(n) * np.array(pk + [q ** (kmax - 1)])
    assert stats.chisquare(observed, expected).pvalue > 0.01


@pytest.fixture
def pair():
    return PairChannel(cue_gain=2e-12, due_gain=5e-10, due_to_bs=1e-12, cue_to_due=5e-12,
                       noise=10 ** (-114 / 10) * 1e-3, sinr_threshold=10 ** 0.5)


def test_interference_gating(pair):
    rngs = [np.random.default_rng(i) for i in range(5)]
    tr = run_pair(0.01, 0.2, pair, 1000, T, 20_000, rngs)
    busy = tr.queue.busy[:20_000]
    assert np.all(tr.interference[~busy] == 0)
    assert np.all(tr.interference[busy] > 0)
    idle_rate = np.log2(1 + tr.cue_snr[~busy])
    assert np.allclose(tr.cue_rate[~busy], idle_rate)


def test_pair_outage_busy_latency(pair):
    sim = SimConfig(slots=200_000, seeds=tuple(range(10)), master_seed=2)
    pd, pc = 0.01, 0.2
    q = pair.outage(pd, pc)
    s = simulate_pair(pd, pc, pair, 2000, T, sim)
    se = math.sqrt(q * (1 - q) / sum(t.attempts for t in s.trials))
    assert abs(s.empirical_outage - q) < 3 * se
    assert s.empirical_busy == pytest.approx(busy_probability(2000, T, q), rel=0.02)
    assert s.mean_sojourn == pytest.approx(mean_sojourn_time(2000, T, q), rel=0.03)


def test_idle_due_gives_clean_capacity(pair):
    sim = SimConfig(slots=200_000, seeds=tuple(range(5)))
    s = simulate_pair(0.01, 0.2, pair, 0.0, T, sim)
    ref = capacity_no_interference(0.2, pair.cue_gain, pair.noise)
    assert abs(s.empirical_capacity - ref) < 4 * s.capacity_ci + 1e-3
    assert s.empirical_busy == 0.0


def test_deterministic_replay(pair):
    sim = SimConfig(slots=5_000, seeds=(3, 4), master_seed=9)
    a = simulate_pair(0.01, 0.2, pair, 2000, T, sim)
    b = simulate_pair(0.01, 0.2, pair, 2000, T, sim)
    assert a == b
    c = simulate_pair(0.01, 0.2, pair, 2000, T, SimConfig(slots=5_000, seeds=(3, 4), master_seed=10))
    assert c.mean_sojourn != a.mean_sojourn


def test_sim_config_checks():
    with pytest.raises(ValueError):
        SimConfig(slots=0)
    with pytest.raises(ValueError):
        SimConfig(slots=10, warmup_slots=10)
    with pytest.raises(ValueError):
        SimConfig(seeds=())
    assert SimConfig(slots=20_000).warmup_slots == 1000
