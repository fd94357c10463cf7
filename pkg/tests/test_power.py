import math

import numpy as np
import pytest
from scipy import integrate

from v2x_alloc.power import (
    LN2,
    PairChannel,
    _interfered,
    capacity_no_interference,
    coupling_f,
    coupling_f_inverse,
    min_due_power,
    optimal_pair_powers,
    pair_capacity,
    search_pair_powers,
)
from v2x_alloc.queueing import latency_to_outage_budget

PMAX = 10 ** (23 / 10) * 1e-3
T = 2e-4


def _interfered_quad(a, b):
    """E[log2(1 + a X / (1 + b Y))] by 2-D quadrature."""
    f = lambda x, y: math.log2(1 + a * x / (1 + b * y)) * math.exp(-x - y)
    return integrate.dblquad(f, 0, 60, 0, 60, epsabs=1e-12, epsrel=1e-11)[0]


def test_clean_capacity_oracle():
    # e E1(1) / ln 2, quadrature-frozen
    assert capacity_no_interference(1.0, 1.0, 1.0) == pytest.approx(0.8603473822708868, rel=1e-13)
    f = lambda x: math.log2(1 + 37.0 * x) * math.exp(-x)
    assert capacity_no_interference(37.0, 1.0, 1.0) == pytest.approx(integrate.quad(f, 0, math.inf)[0], rel=1e-10)


@pytest.mark.parametrize("a,b", [(5.0, 0.5), (0.3, 8.0), (120.0, 40.0), (3.0, 3.0), (3.0, 3.0 * (1 + 1e-8))])
def test_interfered_capacity_vs_quadrature(a, b):
    assert float(_interfered(a, b)) == pytest.approx(_interfered_quad(a, b), rel=1e-8)


def test_equal_snr_limit():
    # a = b: 1 - e^{1/a} E1(1/a) / a, in nats; quadrature-frozen at a = 3
    assert float(_interfered(3.0, 3.0)) * LN2 == pytest.approx(0.614397987863306, rel=1e-12)


def test_no_jump_at_degenerate_switch():
    # evenly spaced b straddling both switch points: the curve stays smooth
    a = 7.0
    bs = a * (1 + np.linspace(-3e-6, 3e-6, 61))
    v = _interfered(a, bs)
    assert np.all(np.diff(v) < 0)
    assert np.max(np.abs(np.diff(v, 2))) < 1e-11


def test_pair_capacity_mixes_branches(highway_pairs):
    ch = highway_pairs[0]
    alone = capacity_no_interference(PMAX, ch.cue_gain, ch.noise)
    assert pair_capacity(PMAX, PMAX, ch, 0.0) == pytest.approx(alone, rel=1e-14)
    full = pair_capacity(PMAX, PMAX, ch, 1.0)
    assert pair_capacity(PMAX, PMAX, ch, 0.25) == pytest.approx(0.75 * alone + 0.25 * full, rel=1e-14)
    with pytest.raises(ValueError):
        pair_capacity(PMAX, PMAX, ch, 1.5)


def test_coupling_function_hits_budget(highway_pairs):
    qb = 0.42
    for ch in highway_pairs:
        p0 = min_due_power(ch, qb)
        assert coupling_f(p0, ch, qb) == pytest.approx(0.0, abs=1e-18)
        ps = p0 * np.array([1.5, 3.0, 10.0, 100.0])
        pc = coupling_f(ps, ch, qb)
        assert np.all(pc > 0)
        assert np.allclose(ch.outage(ps, pc), qb, rtol=1e-10)


def test_inverse_round_trip(highway_pairs):
    qb = 0.3
    for ch in highway_pairs:
        target = 0.05
        p = coupling_f_inverse(target, ch, qb)
        assert coupling_f(p, ch, qb) == pytest.approx(target, rel=1e-8)
        assert ch.outage(p, target) <= qb
        assert coupling_f_inverse(target, ch, qb, upper=min_due_power(ch, qb) * 1.0001) is None


def test_closed_form_rule_structure(highway_pairs):
    lam = 2000.0
    qb = latency_to_outage_budget(lam, T, 1e-3)
    for ch in highway_pairs:
        s = optimal_pair_powers(ch, qb, PMAX, PMAX, lam, T)
        if not s.feasible:
            continue
        assert max(s.p_due / PMAX, s.p_cue / PMAX) == pytest.approx(1.0, rel=1e-12)
        assert s.p_due <= PMAX and s.p_cue <= PMAX
        assert s.outage == pytest.approx(qb, rel=1e-8) and s.outage <= qb + 1e-12
        assert s.busy == pytest.approx(lam * T / (1 - s.outage))


def test_closed_form_optimal_when_busy_fixed(highway_pairs):
    """With the busy probability frozen the rule beats every feasible grid point."""
    lam = 3000.0
    qb = latency_to_outage_budget(lam, T, 1e-3)
    rho = lam * T / (1 - qb)
    pd, pc = np.meshgrid(np.linspace(PMAX / 300, PMAX, 300), np.linspace(PMAX / 300, PMAX, 300))
    for ch in highway_pairs:
        s = optimal_pair_powers(ch, qb, PMAX, PMAX, lam, T)
        if not s.feasible:
            continue
        ok = ch.outage(pd, pc) <= qb
        best = pair_capacity(pd[ok], pc[ok], ch, rho).max()
        assert pair_capacity(s.p_due, s.p_cue, ch, rho) >= best - 1e-9


def test_infeasible_pair():
    ch = PairChannel(1e-10, 1e-14, 1e-10, 1e-8, 1e-14, 3.0)
    assert not optimal_pair_powers(ch, 0.1, PMAX, PMAX, 1000, T).feasible
    assert not search_pair_powers(ch, 0.1, PMAX, PMAX, 1000, T).feasible


def test_search_never_loses(highway_pairs):
    lam = 1000.0
    qb = latency_to_outage_budget(lam, T, 1e-3)
    pd, pc = np.meshgrid(np.linspace(PMAX / 200, PMAX, 200), np.linspace(PMAX / 200, PMAX, 200))
    for ch in highway_pairs:
        cf = optimal_pair_powers(ch, qb, PMAX, PMAX, lam, T)
        if not cf.feasible:
            continue
        sr = search_pair_powers(ch, qb, PMAX, PMAX, lam, T)
        assert sr.outage <= qb + 1e-12
        assert sr.capacity >= cf.capacity - 1e-9
        q = ch.outage(pd, pc)
        ok = q <= qb
        grid = pair_capacity(pd[ok], pc[ok], ch, np.minimum(lam * T / (1 - q[ok]), 1)).max()
        assert sr.capacity >= grid - 1e-6


def test_capacity_monte_carlo(highway_pairs):
    rng = np.random.default_rng(3)
    ch = highway_pairs[1]
    n, rho = 1_000_000, 0.4
    a, b = PMAX * ch.cue_gain / ch.noise, 0.2 * PMAX * ch.due_to_bs / ch.noise
    busy = rng.random(n) < rho
    x = np.log2(1 + a * rng.exponential(size=n) / (1 + busy * b * rng.exponential(size=n)))
    se = x.std() / math.sqrt(n)
    assert abs(x.mean() - pair_capacity(0.2 * PMAX, PMAX, ch, rho)) < 4 * se


def test_joint_scaling_improves(highway_pairs):
    rng = np.random.default_rng(8)
    for ch in highway_pairs:
        for _ in range(20):
            pd, pc = PMAX * rng.uniform(0.01, 0.9, 2)
            th = rng.uniform(1.001, min(PMAX / pd, PMAX / pc))
            q0, q1 = ch.outage(pd, pc), ch.outage(th * pd, th * pc)
            assert q1 < q0
            r0, r1 = min(2000 * T / (1 - q0), 1), min(2000 * T / (1 - q1), 1)
            assert pair_capacity(th * pd, th * pc, ch, r1) > pair_capacity(pd, pc, ch, r0)


def test_channel_validation():
    with pytest.raises(ValueError):
        PairChannel(0.0, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        coupling_f(1.0, PairChannel(1, 1, 1, 1, 1, 1), 1.0)
