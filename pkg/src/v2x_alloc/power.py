"""Optimal transmit powers for one CUE-DUE spectrum-sharing pair.

The CUE's ergodic capacity is maximised subject to the DUE's per-slot outage
staying within its latency-derived budget. The closed-form rule puts the pair
on the outage level set ``p_cue = f(p_due)`` with at least one transmitter at
full power; ``search_pair_powers`` scans the full-power faces numerically.
Capacities are spectral efficiencies in bits/s/Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .queueing import outage_probability
from .specfun import scaled_e1

LN2 = math.log(2.0)

# below this relative gap between the two SNRs the difference quotient in the
# closed form cancels badly; its Taylor expansion about the midpoint is used
_DEGENERATE_RTOL = 1e-4


@dataclass(frozen=True)
class PairChannel:
    """Large-scale gains of one candidate reuse pair plus noise and SINR threshold."""

    cue_gain: float  # CUE -> BS
    due_gain: float  # DUE Tx -> DUE Rx
    due_to_bs: float  # DUE Tx -> BS
    cue_to_due: float  # CUE -> DUE Rx
    noise: float
    sinr_threshold: float

    def __post_init__(self):
        for name in ("cue_gain", "due_gain", "due_to_bs", "cue_to_due", "noise", "sinr_threshold"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")

    def outage(self, p_due, p_cue):
        return outage_probability(
            p_due, p_cue, self.due_gain, self.cue_to_due, self.noise, self.sinr_threshold
        )


@dataclass(frozen=True)
class PairSolution:
    p_due: float
    p_cue: float
    outage: float
    capacity: float
    busy: float
    feasible: bool

    @classmethod
    def infeasible(cls):
        return cls(0.0, 0.0, 1.0, -math.inf, 0.0, False)


def _check_budget(q_budget):
    if not 0.0 < q_budget < 1.0:
        raise ValueError(f"outage budget must lie in (0, 1), got {q_budget}")


def coupling_f(p_due, ch: PairChannel, q_budget):
    """Largest CUE power that keeps the DUE outage at exactly ``q_budget``.

    Negative where the DUE power is too low to meet the budget even without
    interference.
    """
    _check_budget(q_budget)
    p = np.asarray(p_due, dtype=float)
    if np.any(p <= 0):
        raise ValueError("DUE power must be positive")
    s = ch.due_gain * p
    val = s / (ch.sinr_threshold * ch.cue_to_due) * (
        np.exp(-ch.sinr_threshold * ch.noise / s) / (1.0 - q_budget) - 1.0
    )
    return float(val) if val.ndim == 0 else val


def min_due_power(ch: PairChannel, q_budget):
    """DUE power at which the budget is met exactly with no interference (f = 0)."""
    _check_budget(q_budget)
    return ch.sinr_threshold * ch.noise / (-ch.due_gain * math.log1p(-q_budget))


def coupling_f_inverse(p_cue_target, ch: PairChannel, q_budget, upper=None, rtol=1e-10):
    """Solve ``f(p_due) = p_cue_target`` by bisection on the increasing branch of f.

    The bracket starts at the zero of f and doubles until it straddles the
    target; with ``upper`` given the bracket is capped there and None is
    returned if ``f(upper)`` is still short of the target. The returned power
    is the upper bracket end, so the outage at (result, target) never exceeds
    the budget.
    """
    if p_cue_target <= 0:
        raise ValueError("target CUE power must be positive")
    lo = min_due_power(ch, q_budget)
    if upper is not None:
        if upper <= lo or coupling_f(upper, ch, q_budget) < p_cue_target:
            return None
        hi = upper
    else:
        hi = 2.0 * lo
        for _ in range(2000):
            if coupling_f(hi, ch, q_budget) >= p_cue_target:
                break
            lo, hi = hi, 2.0 * hi
        else:
            return None
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if coupling_f(mid, ch, q_budget) >= p_cue_target:
            hi = mid
        else:
            lo = mid
    return hi


def _clean(a):
    """E[log2(1 + a g)] for unit exponential g, as a function of the mean SNR."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = scaled_e1(1.0 / a[pos]) / LN2
    return out


def _interfered(a, b):
    """E[log2(1 + a g1 / (1 + b g2))] for independent unit exponentials g1, g2."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.zeros(a.shape)
    no_int = (b <= 0) & (a > 0)
    out[no_int] = _clean(a[no_int])
    both = (a > 0) & (b > 0)
    aa, bb = a[both], b[both]
    near = np.abs(aa - bb) < _DEGENERATE_RTOL * np.maximum(aa, bb)
    res = np.empty_like(aa)

    # generic closed form a [h(a) - h(b)] / (a - b) with h(x) = e^{1/x} E1(1/x)
    ga, gb = aa[~near], bb[~near]
    res[~near] = ga * (scaled_e1(1.0 / ga) - scaled_e1(1.0 / gb)) / (ga - gb)

    # a ~ b: [h(a) - h(b)] / (a - b) = h1(m) + h3(m) (a - b)^2 / 24 + O(gap^4),
    # hn the n-th derivative; h1 = (x - h) / x^2 and the rest follow from it
    if near.any():
        na, nb = aa[near], bb[near]
        m = 0.5 * (na + nb)
        h = scaled_e1(1.0 / m)
        h1 = (m - h) / m**2
        h2 = (1.0 - h1) / m**2 - 2.0 * (m - h) / m**3
        h3 = -h2 / m**2 - 4.0 * (1.0 - h1) / m**3 + 6.0 * (m - h) / m**4
        res[near] = na * (h1 + h3 * (na - nb) ** 2 / 24.0)
    out[both] = res / LN2
    return out


def capacity_no_interference(p_cue, cue_gain, noise):
    """Ergodic capacity of the CUE uplink when no DUE shares its band."""
    if np.any(np.asarray(p_cue) <= 0) or cue_gain <= 0 or noise <= 0:
        raise ValueError("capacity_no_interference needs positive inputs")
    val = _clean(np.asarray(p_cue, dtype=float) * cue_gain / noise)
    return float(val) if val.ndim == 0 else val


def pair_capacity(p_due, p_cue, ch: PairChannel, busy):
    """CUE ergodic capacity mixing DUE-idle and DUE-busy slots by ``busy``."""
    busy = np.asarray(busy, dtype=float)
    if np.any(busy < 0) or np.any(busy > 1):
        raise ValueError("busy probability must lie in [0, 1]")
    a = np.asarray(p_cue, dtype=float) * ch.cue_gain / ch.noise
    b = np.asarray(p_due, dtype=float) * ch.due_to_bs / ch.noise
    val = (1.0 - busy) * _clean(a) + busy * _interfered(a, b)
    return float(val) if val.ndim == 0 else val


def optimal_pair_powers(ch: PairChannel, q_budget, pmax_due, pmax_cue, arrival_rate, slot):
    """Closed-form power rule for one pair, plus the resulting outage and capacity.

    ``p_due = min(pmax_due, f^-1(pmax_cue))``, ``p_cue = min(pmax_cue, f(pmax_due))``.
    The outage budget is always met with equality. This is the exact optimum
    when the DUE's busy probability is held fixed; since that probability
    shrinks with the outage, a point inside the budget can do better (see
    ``search_pair_powers``). The pair is infeasible when the budget cannot be
    met at full DUE power with a strictly positive CUE power.
    """
    _check_budget(q_budget)
    f_at_max = coupling_f(pmax_due, ch, q_budget)
    if f_at_max <= 0.0:
        return PairSolution.infeasible()
    if f_at_max >= pmax_cue:
        p_cue = pmax_cue
        p_due = coupling_f_inverse(pmax_cue, ch, q_budget, upper=pmax_due)
    else:
        p_due, p_cue = pmax_due, f_at_max
    q = ch.outage(p_due, p_cue)
    load = arrival_rate * slot
    # an unstable queue (possible only with an imposed outage target) transmits every slot
    rho = min(load / (1.0 - q), 1.0)
    cap = pair_capacity(p_due, p_cue, ch, rho)
    return PairSolution(p_due=p_due, p_cue=p_cue, outage=q, capacity=cap, busy=rho, feasible=True)


def _objective_on(p_due, p_cue, ch, load):
    q = ch.outage(p_due, p_cue)
    rho = np.minimum(load / (1.0 - q), 1.0)
    return pair_capacity(p_due, p_cue, ch, rho)


def search_pair_powers(ch: PairChannel, q_budget, pmax_due, pmax_cue, arrival_rate, slot, grid=256):
    """Numerical optimum of the pair problem over the two full-power box faces.

    Scaling both powers up never hurts, so the optimum has one transmitter at
    full power. Each face is scanned on a log grid and the best cell refined
    with a bounded scalar search. Unlike ``optimal_pair_powers`` this accounts
    for the busy probability falling as the DUE outage drops, which can make a
    point strictly inside the outage budget better than the budget boundary.
    """
    _check_budget(q_budget)
    f_at_max = coupling_f(pmax_due, ch, q_budget)
    if f_at_max <= 0.0:
        return PairSolution.infeasible()
    load = arrival_rate * slot
    faces = []  # (lower, upper, make_powers)
    cue_top = min(pmax_cue, f_at_max)
    faces.append((cue_top * 1e-9, cue_top, lambda x: (pmax_due, x)))
    if f_at_max >= pmax_cue:
        lo = coupling_f_inverse(pmax_cue, ch, q_budget, upper=pmax_due)
        if lo < pmax_due:
            faces.append((lo, pmax_due, lambda x: (x, pmax_cue)))

    best = None
    for lower, upper, powers in faces:
        xs = np.geomspace(lower, upper, grid)
        pd, pc = powers(xs)
        vals = _objective_on(np.broadcast_to(pd, xs.shape), np.broadcast_to(pc, xs.shape), ch, load)
        i = int(np.argmax(vals))
        cand = [(vals[i], xs[i])]
        lo_i, hi_i = max(i - 1, 0), min(i + 1, grid - 1)
        if hi_i > lo_i:
            res = minimize_scalar(
                lambda lx: -_objective_on(*powers(math.exp(lx)), ch, load),
                bounds=(math.log(xs[lo_i]), math.log(xs[hi_i])),
                method="bounded",
                options={"xatol": 1e-12},
            )
            cand.append((-res.fun, math.exp(res.x)))
        for val, x in cand:
            if best is None or val > best[0]:
                best = (val, *powers(x))
    _, p_due, p_cue = best
    p_due, p_cue = float(p_due), float(p_cue)
    q = ch.outage(p_due, p_cue)
    rho = min(load / (1.0 - q), 1.0)
    return PairSolution(
        p_due=p_due, p_cue=p_cue, outage=q,
        capacity=pair_capacity(p_due, p_cue, ch, rho), busy=rho, feasible=True,
    )
