"""Slot-level Monte-Carlo simulation of DUE queues and CUE capacities.

One queue engine serves both failure drivers: a per-slot success mask drawn
either as Bernoulli(1 - q) or from the SINR of fresh Rayleigh draws. Queue
lengths at slot starts follow the integer Lindley recursion

    Q[s+1] = max(Q[s] - success[s], 0) + A[s]

which is evaluated in closed form with a running minimum, so no Python loop
runs over slots. Packets arriving during slot s can be sent from slot s+1 on;
departures happen at slot ends and are matched to arrivals in FCFS order.

Sojourn times are measured for every packet arriving in the block
``[0, slots * T)``; after the block the queue keeps running without new
arrivals until it drains. Busy, outage and capacity statistics skip the
first ``warmup_slots`` slots and ignore the drain phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .allocator import pair_channel
from .power import PairChannel

QUEUEING = "queueing"
CAPACITY = "capacity"
FULL = "full"


@dataclass(frozen=True)
class SimConfig:
    slots: int = 20_000
    warmup_slots: int | None = None  # default: 5% of slots
    seeds: tuple = tuple(range(20))
    master_seed: int = 0
    measure_mode: str = FULL
    confidence: float = 0.95

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if self.warmup_slots is None:
            object.__setattr__(self, "warmup_slots", self.slots // 20)
        if not 0 <= self.warmup_slots < self.slots:
            raise ValueError("need 0 <= warmup_slots < slots")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")
        if self.measure_mode not in (QUEUEING, CAPACITY, FULL):
            raise ValueError(f"unknown measure_mode {self.measure_mode!r}")


@dataclass
class TrialRecord:
    seed: int
    arrived: int
    served: int
    mean_sojourn: float
    busy: float
    outage: float
    attempts: int
    capacity: float
    mean_in_system: float
    backlog_end: int
    unstable: bool


@dataclass
class SimStats:
    mean_sojourn: float
    sojourn_ci: float
    empirical_outage: float
    outage_ci: float
    empirical_busy: float
    busy_ci: float
    empirical_capacity: float
    capacity_ci: float
    mean_in_system: float
    packets_arrived: int
    packets_served: int
    unstable: bool
    seed_count: int
    trials: list = field(default_factory=list, repr=False)


@dataclass
class QueueTrace:
    """Raw output of one queue run (block plus drain)."""

    arrival_times: np.ndarray  # s, sorted
    arrival_slots: np.ndarray
    queue: np.ndarray  # packets present at the start of each slot
    success: np.ndarray  # per-slot transmission success indicator
    departure_slots: np.ndarray  # slot at whose end each served packet leaves
    block_slots: int
    slot: float
    unstable: bool

    @property
    def busy(self):
        return self.queue > 0

    @property
    def served(self):
        return len(self.departure_slots)

    def sojourn_times(self):
        n = self.served
        return (self.departure_slots + 1) * self.slot - self.arrival_times[:n]

    def attempt_counts(self):
        """Transmission attempts per served packet (1 = first try succeeded)."""
        dep = self.departure_slots
        n = len(dep)
        prev_end = np.concatenate([[-1], dep[:-1]])
        start = np.maximum(self.arrival_slots[:n] + 1, prev_end + 1)
        return dep - start + 1


def queue_lengths(arrivals, success, q0=0):
    """Start-of-slot queue lengths for each slot, plus the length after the last slot."""
    a = np.asarray(arrivals, dtype=np.int64)
    s = np.asarray(success, dtype=np.int64)
    n = len(a)
    if n == 0:
        return np.zeros(0, dtype=np.int64), int(q0)
    x = np.empty(n, dtype=np.int64)
    x[0] = -s[0]
    x[1:] = a[:-1] - s[1:]
    walk = np.concatenate([[0], np.cumsum(x)])
    floor = walk.copy()
    floor[0] = -q0
    z = walk - np.minimum.accumulate(floor)
    q = z[:n].copy()
    q[1:] += a[:-1]
    return q, int(z[n] + a[-1])


def poisson_arrivals(rng, rate, slot, slots):
    """Sorted Poisson arrival instants in [0, slots*slot) and per-slot counts."""
    horizon = slots * slot
    mean = rate * horizon
    if mean <= 0:
        return np.zeros(0), np.zeros(slots, dtype=np.int64)
    chunk = int(mean + 10.0 * math.sqrt(mean) + 10)
    times = np.cumsum(rng.exponential(1.0 / rate, chunk))
    while times[-1] < horizon:
        more = np.cumsum(rng.exponential(1.0 / rate, chunk)) + times[-1]
        times = np.concatenate([times, more])
    times = times[times < horizon]
    slots_of = np.minimum((times / slot).astype(np.int64), slots - 1)
    counts = np.bincount(slots_of, minlength=slots)
    return times, counts


def run_queue(rate, slot, slots, success_draw, rng, drain=True, max_drain=None):
    """Drive one FCFS queue over a block; ``success_draw(n)`` yields per-slot success.

    The queue is flagged unstable when more than 1% of the block's arrivals
    (and at least 100 packets) are still queued at the block end; it is not
    drained in that case.
    """
    times, counts = poisson_arrivals(rng, rate, slot, slots)
    success = np.asarray(success_draw(slots), dtype=bool)
    q, q_end = queue_lengths(counts, success)
    arrived = len(times)
    unstable = q_end > max(100, 0.01 * arrived)
    parts_q, parts_s = [q], [success]
    if drain and not unstable:
        cap = slots if max_drain is None else max_drain
        used = 0
        while q_end > 0 and used < cap:
            n = int(min(cap - used, max(1024, 8 * q_end)))
            s_more = np.asarray(success_draw(n), dtype=bool)
            q_more, q_end = queue_lengths(np.zeros(n, dtype=np.int64), s_more, q0=q_end)
            parts_q.append(q_more)
            parts_s.append(s_more)
            used += n
        unstable = q_end > 0
    q_all = np.concatenate(parts_q)
    s_all = np.concatenate(parts_s)
    dep = np.flatnonzero((q_all > 0) & s_all)
    return QueueTrace(
        arrival_times=times,
        arrival_slots=np.minimum((times / slot).astype(np.int64), slots - 1),
        queue=q_all,
        success=s_all,
        departure_slots=dep,
        block_slots=slots,
        slot=slot,
        unstable=bool(unstable),
    )


def _trial_rngs(sim: SimConfig, link_id, trial_seed, n):
    ss = np.random.SeedSequence([sim.master_seed, int(link_id), int(trial_seed)])
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _record(trace: QueueTrace, sim: SimConfig, rate, seed, capacity=math.nan):
    w, L, T = sim.warmup_slots, trace.block_slots, trace.slot
    busy = trace.busy[w:L]
    attempts = int(busy.sum())
    fails = int((busy & ~trace.success[w:L]).sum())
    # time-average number in system over the window: start-of-slot backlog plus
    # the in-slot residence of packets arriving during the slot
    t = trace.arrival_times
    in_win = (trace.arrival_slots >= w)
    partial = np.sum((trace.arrival_slots[in_win] + 1) - t[in_win] / T)
    n_sys = (trace.queue[w:L].sum() + partial) / (L - w)
    soj = trace.sojourn_times() if sim.measure_mode != CAPACITY else np.zeros(0)
    return TrialRecord(
        seed=seed,
        arrived=len(t),
        served=trace.served,
        mean_sojourn=float(soj.mean()) if len(soj) else math.nan,
        busy=float(busy.mean()),
        outage=fails / attempts if attempts else math.nan,
        attempts=attempts,
        capacity=capacity,
        mean_in_system=float(n_sys),
        backlog_end=int(trace.queue[L] if len(trace.queue) > L else 0),
        unstable=trace.unstable,
    )


def _half_width(values, confidence):
    v = np.asarray([x for x in values if np.isfinite(x)])
    if len(v) < 2:
        return math.nan
    return float(stats.t.ppf(0.5 + confidence / 2.0, len(v) - 1) * v.std(ddof=1) / math.sqrt(len(v)))


def _mean(values):
    v = np.asarray([x for x in values if np.isfinite(x)])
    return float(v.mean()) if len(v) else math.nan


def aggregate(trials, confidence=0.95) -> SimStats:
    def col(name):
        return [getattr(t, name) for t in trials]

    attempts = sum(t.attempts for t in trials)
    fails = sum(t.outage * t.attempts for t in trials if t.attempts)
    return SimStats(
        mean_sojourn=_mean(col("mean_sojourn")),
        sojourn_ci=_half_width(col("mean_sojourn"), confidence),
        empirical_outage=fails / attempts if attempts else math.nan,
        outage_ci=_half_width(col("outage"), confidence),
        empirical_busy=_mean(col("busy")),
        busy_ci=_half_width(col("busy"), confidence),
        empirical_capacity=_mean(col("capacity")),
        capacity_ci=_half_width(col("capacity"), confidence),
        mean_in_system=_mean(col("mean_in_system")),
        packets_arrived=sum(col("arrived")),
        packets_served=sum(col("served")),
        unstable=any(col("unstable")),
        seed_count=len(trials),
        trials=list(trials),
    )


def simulate_due_queue(rate, slot, q, sim: SimConfig, link_id=0) -> SimStats:
    """Single DUE queue with i.i.d. Bernoulli(q) transmission failures."""
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")
    if not rate * slot < 1.0:
        raise ValueError("need lambda*T < 1")
    trials = []
    for seed in sim.seeds:
        arr_rng, fail_rng = _trial_rngs(sim, link_id, seed, 2)
        trace = run_queue(
            rate, slot, sim.slots,
            lambda n: fail_rng.random(n) >= q,
            arr_rng,
            drain=sim.measure_mode != CAPACITY,
        )
        trials.append(_record(trace, sim, rate, seed))
    return aggregate(trials, sim.confidence)


@dataclass
class PairTrace:
    queue: QueueTrace
    cue_rate: np.ndarray  # log2(1 + SINR) of the CUE for each block slot
    cue_snr: np.ndarray
    interference: np.ndarray  # DUE power received at the BS (0 when idle)


def run_pair(p_due, p_cue, ch: PairChannel, rate, slot, slots, rngs, drain=True):
    """One block of a CUE-DUE pair driven by per-slot Rayleigh draws.

    ``rngs`` holds independent generators for arrivals and for the
    DUE-direct, CUE-to-DUE, CUE-to-BS and DUE-to-BS fades.
    """
    arr_rng, g_d_rng, g_x_rng, g_c_rng, g_b_rng = rngs
    thr = ch.sinr_threshold

    def success(n):
        sig = p_due * ch.due_gain * g_d_rng.standard_exponential(n)
        intf = p_cue * ch.cue_to_due * g_x_rng.standard_exponential(n)
        return sig >= thr * (ch.noise + intf)

    if rate > 0:
        trace = run_queue(rate, slot, slots, success, arr_rng, drain=drain)
    else:
        trace = QueueTrace(np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(slots, dtype=np.int64),
                           success(slots), np.zeros(0, dtype=np.int64), slots, slot, False)
    busy = trace.busy[:slots]
    cue_sig = p_cue * ch.cue_gain * g_c_rng.standard_exponential(slots)
    intf = np.where(busy, p_due * ch.due_to_bs * g_b_rng.standard_exponential(slots), 0.0)
    rate_slot = np.log2(1.0 + cue_sig / (ch.noise + intf))
    return PairTrace(queue=trace, cue_rate=rate_slot, cue_snr=cue_sig / ch.noise, interference=intf)


def simulate_pair(p_due, p_cue, ch: PairChannel, rate, slot, sim: SimConfig, link_id=0) -> SimStats:
    trials = []
    for seed in sim.seeds:
        rngs = _trial_rngs(sim, link_id, seed, 5)
        tr = run_pair(p_due, p_cue, ch, rate, slot, sim.slots, rngs, drain=sim.measure_mode != CAPACITY)
        cap = float(tr.cue_rate[sim.warmup_slots:].mean())
        trials.append(_record(tr.queue, sim, rate, seed, capacity=cap))
    return aggregate(trials, sim.confidence)


def simulate_cue_alone(p_cue, cue_gain, noise, sim: SimConfig, link_id=0) -> SimStats:
    trials = []
    for seed in sim.seeds:
        (rng,) = _trial_rngs(sim, link_id, seed, 1)
        g = rng.standard_exponential(sim.slots - sim.warmup_slots)
        cap = float(np.log2(1.0 + p_cue * cue_gain * g / noise).mean())
        trials.append(TrialRecord(seed, 0, 0, math.nan, 0.0, math.nan, 0, cap, 0.0, 0, False))
    return aggregate(trials, sim.confidence)


@dataclass
class SystemStats:
    per_due: dict  # DUE k -> SimStats of its pair
    per_cue: dict  # CUE m -> SimStats (capacity fields)
    sum_capacity: float
    sum_capacity_ci: float


def simulate_system(result, gains, config, sim: SimConfig) -> SystemStats:
    """Simulate every matched pair and every unmatched CUE of an allocation.

    Pairs sit on orthogonal bands, so each link gets its own random streams
    keyed by its CUE index.
    """
    per_due, per_cue = {}, {}
    for m in range(gains.num_cues):
        k = result.assignment.due_of(m)
        if k is None:
            per_cue[m] = simulate_cue_alone(
                config.max_power_cue, float(gains.cue_to_bs[m]), config.noise_power, sim, link_id=m
            )
            continue
        sol = result.per_pair[m][k]
        st = simulate_pair(
            sol.p_due, sol.p_cue, pair_channel(gains, config, m, k),
            config.arrival_rates[k], config.slot_length, sim, link_id=m,
        )
        per_due[k] = st
        per_cue[m] = st
    per_seed = np.sum([[t.capacity for t in per_cue[m].trials] for m in sorted(per_cue)], axis=0)
    return SystemStats(
        per_due=per_due,
        per_cue=per_cue,
        sum_capacity=float(per_seed.mean()),
        sum_capacity_ci=_half_width(per_seed, sim.confidence),
    )
