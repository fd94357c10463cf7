"""Numerical self-checks: each closed form against an independent oracle.

Every check returns a ``CheckResult`` holding table rows of
(metric, expected, observed, tolerance, passed). ``size="quick"`` shrinks
sample counts for smoke runs; tolerances never change with size.

``mutate="vacation-term"`` replaces the T/2 vacation term of the mean
sojourn formula by T in the analytic side of the sojourn checks. The
simulator is untouched, so a healthy harness must then report a failure.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .allocator import allocate, pair_channel
from .channel import generate_scenario
from .matching import max_weight_matching
from .power import _clean, _interfered, optimal_pair_powers, pair_capacity
from .queueing import (
    is_stable,
    latency_to_outage_budget,
    mean_sojourn_time,
    min_sojourn_time,
    outage_probability,
)
from .scenario_file import default_scenario_path, load_scenario
from .simulator import QUEUEING, SimConfig, simulate_due_queue, simulate_system
from .specfun import exp_integral_e1

MUTATIONS = ("vacation-term",)
SLOT = 2e-4
GRID_RATES = (1000.0, 2000.0, 3000.0, 4000.0)
GRID_OUTAGES = (0.1, 0.3, 0.5)


@dataclass
class Row:
    metric: str
    expected: str
    observed: str
    tolerance: str
    passed: bool


@dataclass
class CheckResult:
    name: str
    title: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def add(self, metric, expected, observed, tolerance, passed):
        self.rows.append(Row(metric, str(expected), str(observed), str(tolerance), bool(passed)))


def _sojourn_model(mutate):
    if mutate is None:
        return mean_sojourn_time
    if mutate == "vacation-term":
        return lambda lam, T, q: mean_sojourn_time(lam, T, q) + T / 2.0
    raise ValueError(f"unknown mutation {mutate!r}; choose from {MUTATIONS}")


def _scale(size, full, quick):
    if size not in ("full", "quick"):
        raise ValueError("size must be 'full' or 'quick'")
    return full if size == "full" else quick


def _reference_config():
    return load_scenario(default_scenario_path())


def _random_pairs(n, rng):
    """(PairChannel, arrival rate, budget) drawn from random highway drops."""
    base = _reference_config()
    out = []
    while len(out) < n:
        cfg = base.replace(rng_seed=int(rng.integers(1 << 31)))
        gains = generate_scenario(cfg)
        m, k = int(rng.integers(cfg.num_cues)), int(rng.integers(cfg.num_dues))
        lam = float(rng.uniform(500.0, 4000.0))
        budget = latency_to_outage_budget(lam, cfg.slot_length, cfg.latency_bound)
        ch = pair_channel(gains, cfg, m, k)
        if budget is None or not optimal_pair_powers(
            ch, budget, cfg.max_power_due, cfg.max_power_cue, lam, cfg.slot_length
        ).feasible:
            continue
        out.append((ch, lam, budget, cfg))
    return out


# --------------------------------------------------------------------------
# queueing


def check_sojourn(size="full", mutate=None):
    """Mean sojourn: closed form vs slot simulation on the 4 x 3 rate/outage grid."""
    res = CheckResult("sojourn", "queueing closed form vs simulation")
    model = _sojourn_model(mutate)
    sim = SimConfig(slots=_scale(size, 2_000_000, 200_000), seeds=tuple(range(20)),
                    master_seed=11, measure_mode=QUEUEING)
    worst = 0.0
    for i, (lam, q) in enumerate(itertools.product(GRID_RATES, GRID_OUTAGES)):
        st = simulate_due_queue(lam, SLOT, q, sim, link_id=i)
        tag = f"lambda={lam:g} q={q:g}"
        if not is_stable(lam, SLOT, q):
            res.add(f"{tag} flagged unstable", "unstable", "unstable" if st.unstable else "stable",
                    "-", st.unstable)
            continue
        mu = model(lam, SLOT, q)
        err = abs(st.mean_sojourn - mu) / mu
        worst = max(worst, err)
        res.add(f"{tag} mean sojourn [ms]", f"{mu * 1e3:.5f}", f"{st.mean_sojourn * 1e3:.5f}",
                "2% rel", err <= 0.02 and not st.unstable)
    res.add("max rel error over stable points", "<= 0.02", f"{worst:.4f}", "2% rel", worst <= 0.02)
    return res


def check_spot_values(size="full", mutate=None):
    res = CheckResult("spot", "closed-form spot values")
    model = _sojourn_model(mutate)
    mu = model(1000.0, SLOT, 0.5)
    res.add("mu(1000/s, 0.2 ms, q=0.5) [ms]", "0.7", f"{mu * 1e3:.12g}", "1e-12 rel",
            abs(mu - 7e-4) <= 1e-12 * 7e-4)
    mu0 = model(1e-12, SLOT, 0.0)
    res.add("mu(lambda->0, q=0) / T", "1.5", f"{mu0 / SLOT:.12g}", "1e-9 rel",
            abs(mu0 / SLOT - 1.5) <= 1.5e-9)
    return res


def _bisect_budget(lam, T, mu0, model):
    lo, hi = 0.0, 1.0 - lam * T
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if model(lam, T, mid) <= mu0:
            lo = mid
        else:
            hi = mid
    return lo


def check_budget_inversion(size="full", mutate=None):
    res = CheckResult("budget", "outage budget closed form vs bisection")
    model = _sojourn_model(mutate)
    rng = np.random.default_rng(13)
    n = _scale(size, 1000, 200)
    worst, done = 0.0, 0
    while done < n:
        T = 10 ** rng.uniform(-4.5, -2.5)
        lam = rng.uniform(0.01, 0.95) / T
        mu0 = min_sojourn_time(lam, T) * (1.0 + 10 ** rng.uniform(-3, 2))
        q_closed = latency_to_outage_budget(lam, T, mu0)
        if q_closed is None:
            continue
        worst = max(worst, abs(q_closed - _bisect_budget(lam, T, mu0, model)))
        done += 1
    res.add(f"max |q_closed - q_bisect| over {n} triples", "0", f"{worst:.3e}", "1e-9 abs", worst <= 1e-9)
    q = latency_to_outage_budget(1000.0, SLOT, 1e-3)
    qb = _bisect_budget(1000.0, SLOT, 1e-3, model)
    res.add("budget at lambda=1000/s, mu0=1 ms", "0.6", f"{q:.12g} (bisection {qb:.12g})", "1e-9 abs",
            abs(q - 0.6) <= 1e-9 and abs(qb - 0.6) <= 1e-9)
    return res


# --------------------------------------------------------------------------
# channel and capacity


def _mc_chunks(rng, n, draw, chunk=1_000_000):
    """Sum and sum of squares of draw(rng, size) over n samples."""
    s = s2 = 0.0
    left = n
    while left > 0:
        m = min(chunk, left)
        x = draw(rng, m)
        s += float(x.sum())
        s2 += float(np.dot(x, x))
        left -= m
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def check_outage(size="full", mutate=None):
    res = CheckResult("outage", "outage closed form vs Monte Carlo")
    rng = np.random.default_rng(17)
    n = _scale(size, 10_000_000, 1_000_000)
    worst = 0.0
    for i in range(20):
        a_d = 10 ** rng.uniform(0.0, 3.0)  # mean DUE SNR, noise = 1
        a_x = 10 ** rng.uniform(-1.0, 2.0)  # mean interference-to-noise
        gamma0 = 10 ** rng.uniform(-0.5, 1.5)
        q = float(outage_probability(1.0, 1.0, a_d, a_x, 1.0, gamma0))

        def draw(r, m):
            sinr = a_d * r.exponential(size=m) / (1.0 + a_x * r.exponential(size=m))
            return (sinr < gamma0).astype(float)

        est, _ = _mc_chunks(rng, n, draw)
        se = math.sqrt(q * (1.0 - q) / n)
        z = abs(est - q) / se
        worst = max(worst, z)
        res.add(f"instance {i}", f"{q:.6f}", f"{est:.6f}", "3 SE", z <= 3.0)
    res.add("max |z| over 20 instances", "<= 3", f"{worst:.2f}", "3 SE", worst <= 3.0)
    return res


def check_capacity(size="full", mutate=None):
    res = CheckResult("capacity", "ergodic capacity closed forms vs Monte Carlo")
    rng = np.random.default_rng(19)
    n = _scale(size, 10_000_000, 1_000_000)
    worst = 0.0
    for i in range(50):
        a = 10 ** rng.uniform(-1.0, 3.0)
        if i == 0:
            b, rho = a * (1.0 + 1e-9), 1.0  # degenerate a ~ b
        elif i % 5 == 1:
            b, rho = 10 ** rng.uniform(-1.0, 3.0), 0.0  # interference-free form
        else:
            b, rho = 10 ** rng.uniform(-1.0, 3.0), float(rng.uniform(0.05, 1.0))
        closed = float((1.0 - rho) * _clean(a) + rho * _interfered(a, b))

        def draw(r, m):
            busy = r.random(m) < rho
            return np.log2(1.0 + a * r.exponential(size=m) / (1.0 + busy * b * r.exponential(size=m)))

        est, se = _mc_chunks(rng, n, draw)
        z = abs(est - closed) / se
        worst = max(worst, z)
        kind = "a~b" if i == 0 else ("rho=0" if rho == 0.0 else f"rho={rho:.2f}")
        res.add(f"instance {i} ({kind})", f"{closed:.6f}", f"{est:.6f}", "3 SE", z <= 3.0)
    res.add("max |z| over 50 instances", "<= 3", f"{worst:.2f}", "3 SE", worst <= 3.0)
    return res


# --------------------------------------------------------------------------
# power


def _grid_objective(ch, lam, T, pd, pc):
    q = ch.outage(pd, pc)
    rho = np.minimum(lam * T / (1.0 - q), 1.0)
    return pair_capacity(pd, pc, ch, rho), q


def check_pair_optimum(size="full", mutate=None):
    """Closed-form pair powers vs a 200 x 200 grid over the power box."""
    res = CheckResult("pair_optimum", "closed-form pair powers vs power grid")
    rng = np.random.default_rng(23)
    n = _scale(size, 50, 10)
    beaten, worst_gap, budget_ok = 0, 0.0, True
    for i, (ch, lam, qb, cfg) in enumerate(_random_pairs(n, rng)):
        T = cfg.slot_length
        sol = optimal_pair_powers(ch, qb, cfg.max_power_due, cfg.max_power_cue, lam, T)
        budget_ok &= sol.outage <= qb + 1e-12
        pd, pc = np.meshgrid(np.linspace(cfg.max_power_due / 200, cfg.max_power_due, 200),
                             np.linspace(cfg.max_power_cue / 200, cfg.max_power_cue, 200))
        cap, q = _grid_objective(ch, lam, T, pd, pc)
        feasible = q <= qb
        best = float(cap[feasible].max()) if feasible.any() else -math.inf
        gap = best - sol.capacity
        worst_gap = max(worst_gap, gap)
        if gap > 1e-6:
            beaten += 1
    res.add("closed-form outage within budget", "all", "all" if budget_ok else "violated", "1e-12",
            budget_ok)
    res.add(f"pairs beaten by a feasible grid point (of {n})", "0", str(beaten), "1e-6", beaten == 0)
    res.add("max grid capacity minus closed-form capacity", "<= 1e-6", f"{worst_gap:.4g}", "1e-6",
            worst_gap <= 1e-6)
    return res


def check_scaling(size="full", mutate=None):
    """Scaling both powers by theta > 1 raises capacity and lowers outage."""
    res = CheckResult("scaling", "joint power scaling monotonicity")
    rng = np.random.default_rng(29)
    n = _scale(size, 1000, 200)
    pairs = _random_pairs(40, rng)
    cap_bad = q_bad = done = 0
    while done < n:
        ch, lam, qb, cfg = pairs[done % len(pairs)]
        T = cfg.slot_length
        pd = cfg.max_power_due * rng.uniform(1e-3, 1.0)
        pc = cfg.max_power_cue * rng.uniform(1e-3, 1.0)
        c0, q0 = _grid_objective(ch, lam, T, pd, pc)
        if q0 > qb:
            continue
        theta_max = min(cfg.max_power_due / pd, cfg.max_power_cue / pc)
        theta = 1.0 + (theta_max - 1.0) * (1.0 - rng.random())  # (1, theta_max]
        c1, q1 = _grid_objective(ch, lam, T, theta * pd, theta * pc)
        cap_bad += not c1 > c0
        q_bad += not q1 < q0
        done += 1
    res.add(f"capacity strictly increases ({n} points)", "all", f"{n - cap_bad}/{n}", "strict",
            cap_bad == 0)
    res.add(f"outage strictly decreases ({n} points)", "all", f"{n - q_bad}/{n}", "strict", q_bad == 0)
    return res


# --------------------------------------------------------------------------
# matching


def brute_force_matching(w):
    """Exhaustive optimum: every injective DUE -> CUE map, dropping non-positive pairs."""
    M, K = w.shape
    perms = np.array(list(itertools.permutations(range(M), K)))
    vals = w[perms, np.arange(K)]
    vals = np.where(vals > 0, vals, 0.0)
    return float(vals.sum(axis=1).max())


def check_matching(size="full", mutate=None):
    res = CheckResult("matching", "Hungarian vs exhaustive enumeration")
    rng = np.random.default_rng(31)
    n = _scale(size, 100, 30)
    bad, with_inf = 0, 0
    for _ in range(n):
        M = int(rng.integers(1, 9))
        K = int(rng.integers(1, M + 1))
        w = rng.uniform(-2.0, 10.0, size=(M, K))
        mask = rng.random((M, K)) < rng.uniform(0.0, 0.6)
        w[mask] = -math.inf
        with_inf += bool(mask.any())
        got = max_weight_matching(w).objective
        bad += not abs(got - brute_force_matching(w)) <= 1e-9
    res.add(f"objective mismatches ({n} instances, {with_inf} with -inf)", "0", str(bad), "1e-9 abs",
            bad == 0)
    return res


# --------------------------------------------------------------------------
# end to end


def check_end_to_end(size="full", mutate=None):
    """Allocate then simulate on random highway drops."""
    res = CheckResult("e2e", "latency and capacity guarantees under simulation")
    base = _reference_config()
    slots = _scale(size, 100_000, 20_000)
    n = _scale(size, 10, 3)
    worst_mu, worst_r = 0.0, math.inf
    for s in range(n):
        cfg = base.replace(rng_seed=1000 + s)
        gains = generate_scenario(cfg)
        result = allocate(cfg, gains)
        # a fresh master seed per drop keeps the drops' fading streams independent
        sim = SimConfig(slots=slots, seeds=tuple(range(20)), master_seed=37 + s)
        st = simulate_system(result, gains, cfg, sim)
        mu = max(v.mean_sojourn for v in st.per_due.values()) / cfg.latency_bound
        r = min(st.per_cue[m].empirical_capacity for m, _ in result.assignment.pairs) / cfg.capacity_floor
        worst_mu, worst_r = max(worst_mu, mu), min(worst_r, r)
        res.add(f"drop {s}: worst matched DUE sojourn / mu0 ({result.status.value})", "<= 1.03",
                f"{mu:.4f}", "3%", mu <= 1.03)
        res.add(f"drop {s}: worst matched CUE capacity / R0", ">= 0.98", f"{r:.3f}", "2%", r >= 0.98)
    res.add("worst sojourn ratio", "<= 1.03", f"{worst_mu:.4f}", "3%", worst_mu <= 1.03)
    res.add("worst capacity ratio", ">= 0.98", f"{worst_r:.3f}", "2%", worst_r >= 0.98)

    # load trends on the reference drop: capacity falls with lambda; the
    # fixed p0 = 0.1 baseline stops meeting the latency bound at high load
    gains = generate_scenario(base)
    rates = (1000.0, 2000.0, 3000.0, 4000.0)
    caps, p0_lat = [], []
    for lam in rates:
        cfg = base.replace(arrival_rates=lam)
        caps.append(allocate(cfg, gains).sum_capacity)
        r = allocate(cfg, gains, outage_target=0.1)
        st = simulate_system(r, gains, cfg, SimConfig(slots=slots, seeds=tuple(range(20)), master_seed=41))
        p0_lat.append(max(v.mean_sojourn for v in st.per_due.values()) / cfg.latency_bound)
    mono = all(b <= a + 1e-9 for a, b in zip(caps, caps[1:]))
    res.add("sum capacity vs lambda 1000..4000", "non-increasing", " > ".join(f"{c:.1f}" for c in caps),
            "-", mono)
    res.add("p0=0.1 worst simulated sojourn / mu0 at 1000..3000", "<= 1.03",
            f"{max(p0_lat[:-1]):.3f}", "3%", max(p0_lat[:-1]) <= 1.03)
    res.add("p0=0.1 worst simulated sojourn / mu0 at 4000", "> 1.03", f"{p0_lat[-1]:.3f}", "3%",
            p0_lat[-1] > 1.03)
    return res


# --------------------------------------------------------------------------
# special functions


def e1_quadrature(x, dps=30):
    """E1(x) = e^-x int_0^inf e^-t / (x + t) dt, with cuts where the integrand bends."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        cuts = sorted({x, 10 * x, mpmath.mpf(1), mpmath.mpf(10), mpmath.mpf(50)})
        pts = [mpmath.mpf(0)] + cuts + [mpmath.inf]
        return float(mpmath.exp(-x) * mpmath.quad(lambda t: mpmath.exp(-t) / (x + t), pts))


def check_e1(size="full", mutate=None):
    res = CheckResult("e1", "exponential integral vs quadrature")
    xs = np.geomspace(1e-6, 500.0, _scale(size, 1000, 100))
    ref = np.array([e1_quadrature(x) for x in xs])
    err = np.abs(exp_integral_e1(xs) - ref) / ref
    i = int(np.argmax(err))
    res.add(f"max rel error on {len(xs)} points in [1e-6, 500]", "<= 1e-10",
            f"{err[i]:.2e} at x={xs[i]:.4g}", "1e-10 rel", err[i] <= 1e-10)
    return res


CHECKS = {
    "sojourn": check_sojourn,
    "spot": check_spot_values,
    "outage": check_outage,
    "budget": check_budget_inversion,
    "pair_optimum": check_pair_optimum,
    "capacity": check_capacity,
    "matching": check_matching,
    "e2e": check_end_to_end,
    "scaling": check_scaling,
    "e1": check_e1,
}


def run_check(name, size="full", mutate=None):
    t0 = time.perf_counter()
    res = CHECKS[name](size=size, mutate=mutate)
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(names=None, size="full", mutate=None):
    return [run_check(n, size, mutate) for n in (names or CHECKS)]


def format_table(results):
    head = ("check", "metric", "expected", "observed", "tolerance", "ok")
    lines = [head]
    for r in results:
        for row in r.rows:
            lines.append((r.name, row.metric, row.expected, row.observed, row.tolerance,
                          "PASS" if row.passed else "FAIL"))
    widths = [max(len(l[i]) for l in lines) for i in range(len(head))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(l, widths)).rstrip() for l in lines)
