import itertools
import math

import numpy as np
import pytest

from v2x_alloc.allocator import Status, allocate, pair_channel, total_objective
from v2x_alloc.channel import LinkGains, generate_scenario
from v2x_alloc.power import capacity_no_interference, optimal_pair_powers
from v2x_alloc.queueing import latency_to_outage_budget, mean_sojourn_time
from v2x_alloc.simulator import SimConfig, simulate_system


def _small(highway, M, K, seed, **kw):
    cfg = highway.replace(num_cues=M, num_dues=K, arrival_rates=(2000.0,) * K, rng_seed=seed, **kw)
    return cfg, generate_scenario(cfg)


def _exhaustive(cfg, gains):
    """Best sum over every partial one-to-one pattern, pair powers from the closed form."""
    M, K = cfg.num_cues, cfg.num_dues
    qb = latency_to_outage_budget(2000.0, cfg.slot_length, cfg.latency_bound)
    cap = np.full((M, K), -math.inf)
    for m, k in itertools.product(range(M), range(K)):
        s = optimal_pair_powers(pair_channel(gains, cfg, m, k), qb, cfg.max_power_due, cfg.max_power_cue,
                                2000.0, cfg.slot_length)
        if s.feasible and s.capacity >= cfg.capacity_floor:
            cap[m, k] = s.capacity
    best = 0.0
    for j in range(K + 1):
        for dues in itertools.combinations(range(K), j):
            for cues in itertools.permutations(range(M), j):
                v = sum(cap[m, k] for m, k in zip(cues, dues))
                best = max(best, v)
    return best


def test_single_pair(highway):
    cfg, gains = _small(highway, 1, 1, 0)
    gains = LinkGains(cue_to_bs=np.array([1e-9]), due_direct=np.array([1e-7]),
                      due_to_bs=np.array([1e-12]), cue_to_due=np.array([[1e-13]]))
    r = allocate(cfg, gains)
    assert r.status is Status.COMPLETE and r.assignment.pairs == ((0, 0),)
    s = r.solution(0, 0)
    assert mean_sojourn_time(2000.0, cfg.slot_length, s.outage) <= cfg.latency_bound + 1e-12
    assert s.capacity >= cfg.capacity_floor
    assert r.per_due_latency[0] == pytest.approx(cfg.latency_bound, rel=1e-8)


def test_unattainable_latency_is_infeasible(highway):
    cfg, gains = _small(highway, 4, 3, 1)
    # DUE 2 gets a rate whose error-free latency already exceeds the bound
    cfg = cfg.replace(arrival_rates=(2000.0, 2000.0, 4900.0))
    r = allocate(cfg, gains)
    assert r.status is Status.INFEASIBLE
    assert r.infeasible_dues == (2,) and 2 in r.unmatched_dues
    assert r.outage_budget[2] is None and math.isnan(r.per_due_latency[2])


def test_unreachable_floor_is_partial(highway):
    cfg, gains = _small(highway, 3, 2, 2, capacity_floor=1e3)
    r = allocate(cfg, gains)
    assert r.status is Status.PARTIAL and r.assignment.pairs == ()
    alone = sum(capacity_no_interference(cfg.max_power_cue, g, cfg.noise_power) for g in gains.cue_to_bs)
    assert total_objective(r, gains, cfg) == pytest.approx(alone)
    assert r.total_capacity == pytest.approx(alone)


@pytest.mark.parametrize("M,K,seed", [(4, 4, 3), (4, 4, 4), (5, 3, 5), (5, 5, 6), (3, 2, 7)])
def test_matches_exhaustive_pipeline(highway, M, K, seed):
    cfg, gains = _small(highway, M, K, seed)
    r = allocate(cfg, gains)
    assert r.sum_capacity == pytest.approx(_exhaustive(cfg, gains), abs=1e-9)


def test_qos_and_filter(highway, highway_gains):
    r = allocate(highway, highway_gains)
    assert r.status is Status.COMPLETE
    for m, k in r.assignment.pairs:
        s = r.solution(m, k)
        assert mean_sojourn_time(highway.arrival_rates[k], highway.slot_length, s.outage) \
            <= highway.latency_bound + 1e-12
        assert s.capacity >= highway.capacity_floor
    assert total_objective(r, highway_gains, highway) == pytest.approx(r.sum_capacity, rel=1e-9)


def test_capacity_decreases_with_load(highway, highway_gains):
    caps = [allocate(highway.replace(arrival_rates=lam), highway_gains).sum_capacity
            for lam in (500.0, 1000.0, 2000.0, 3000.0, 4000.0)]
    assert all(b <= a + 1e-9 for a, b in zip(caps, caps[1:]))


def test_fixed_outage_baseline(highway, highway_gains):
    r = allocate(highway, highway_gains, outage_target=0.1)
    assert r.outage_target == 0.1
    for m, k in r.assignment.pairs:
        assert r.solution(m, k).outage == pytest.approx(0.1, rel=1e-8)
    with pytest.raises(ValueError):
        allocate(highway, highway_gains, outage_target=1.5)


def test_search_mode_dominates(highway, highway_gains):
    cf = allocate(highway, highway_gains)
    sr = allocate(highway, highway_gains, power_method="search")
    assert sr.sum_capacity >= cf.sum_capacity - 1e-9
    with pytest.raises(ValueError):
        allocate(highway, highway_gains, power_method="magic")


def test_objective_matches_simulation(highway, highway_gains):
    r = allocate(highway, highway_gains)
    st = simulate_system(r, highway_gains, highway, SimConfig(slots=20_000, seeds=tuple(range(10))))
    assert st.sum_capacity == pytest.approx(total_objective(r, highway_gains, highway), rel=0.02)
