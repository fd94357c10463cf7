"""End-to-end spectrum and power allocation for one block.

1. each DUE's latency bound becomes a per-slot outage budget;
2. every CUE-DUE pair gets its optimal powers under that budget;
3. pairs whose CUE capacity misses the floor are removed (weight -inf);
4. a maximum-weight matching picks the reuse pattern.

``outage_target`` switches to the fixed-outage baseline: every DUE gets the
same per-slot outage budget p0 regardless of its traffic, so latency is not
guaranteed. ``power_method="search"`` swaps the closed-form pair rule for
the numerical face search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import LinkGains, ScenarioConfig
from .matching import Assignment, max_weight_matching
from .power import (
    PairChannel,
    PairSolution,
    capacity_no_interference,
    optimal_pair_powers,
    pair_capacity,
    search_pair_powers,
)
from .queueing import analyze_queue, latency_to_outage_budget


POWER_METHODS = {"closed-form": optimal_pair_powers, "search": search_pair_powers}


class Status(str, Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class AllocationResult:
    assignment: Assignment
    per_pair: tuple  # M x K nested tuples of PairSolution
    outage_budget: tuple  # per DUE; None where the latency bound is unattainable
    unmatched_dues: tuple
    infeasible_dues: tuple
    sum_capacity: float  # sum of matched pair capacities
    per_due_latency: tuple  # s; nan for unmatched DUEs
    per_cue_capacity: tuple  # bits/s/Hz; unmatched CUEs at full power, no interference
    status: Status
    outage_target: float | None = None
    power_method: str = "closed-form"
    notes: tuple = field(default=())

    def solution(self, m, k) -> PairSolution:
        return self.per_pair[m][k]

    @property
    def total_capacity(self):
        return float(sum(self.per_cue_capacity))


def pair_channel(gains: LinkGains, config: ScenarioConfig, m, k) -> PairChannel:
    return PairChannel(
        cue_gain=float(gains.cue_to_bs[m]),
        due_gain=float(gains.due_direct[k]),
        due_to_bs=float(gains.due_to_bs[k]),
        cue_to_due=float(gains.cue_to_due[m, k]),
        noise=config.noise_power,
        sinr_threshold=config.sinr_threshold,
    )


def outage_budgets(config: ScenarioConfig, outage_target=None):
    T = config.slot_length
    if outage_target is not None:
        if not 0.0 < outage_target < 1.0:
            raise ValueError("outage_target must lie in (0, 1)")
        return tuple(outage_target for _ in config.arrival_rates)
    return tuple(latency_to_outage_budget(lam, T, config.latency_bound) for lam in config.arrival_rates)


def solve_pairs(config: ScenarioConfig, gains: LinkGains, budgets, power_method="closed-form"):
    solver = POWER_METHODS[power_method]
    table = []
    for m in range(gains.num_cues):
        row = []
        for k in range(gains.num_dues):
            if budgets[k] is None:
                row.append(PairSolution.infeasible())
                continue
            row.append(
                solver(
                    pair_channel(gains, config, m, k),
                    budgets[k],
                    config.max_power_due,
                    config.max_power_cue,
                    config.arrival_rates[k],
                    config.slot_length,
                )
            )
        table.append(tuple(row))
    return tuple(table)


def weight_matrix(per_pair, capacity_floor):
    """Pair capacities, with -inf for infeasible pairs or those below the floor."""
    w = np.array([[s.capacity if s.feasible else -math.inf for s in row] for row in per_pair])
    w[w < capacity_floor] = -math.inf
    return w


def cue_capacity_alone(config: ScenarioConfig, gains: LinkGains):
    return np.array(
        [capacity_no_interference(config.max_power_cue, g, config.noise_power) for g in gains.cue_to_bs]
    )


def allocate(config: ScenarioConfig, gains: LinkGains, outage_target=None,
             power_method="closed-form") -> AllocationResult:
    if power_method not in POWER_METHODS:
        raise ValueError(f"unknown power_method {power_method!r}")
    if (gains.num_cues, gains.num_dues) != (config.num_cues, config.num_dues):
        raise ValueError("gains do not match the scenario dimensions")
    budgets = outage_budgets(config, outage_target)
    infeasible_dues = tuple(k for k, qb in enumerate(budgets) if qb is None)

    per_pair = solve_pairs(config, gains, budgets, power_method)
    weights = weight_matrix(per_pair, config.capacity_floor)
    assignment = max_weight_matching(weights)

    T = config.slot_length
    latency = [math.nan] * config.num_dues
    cue_cap = list(cue_capacity_alone(config, gains))
    for m, k in assignment.pairs:
        sol = per_pair[m][k]
        latency[k] = analyze_queue(config.arrival_rates[k], T, sol.outage).mean_sojourn
        cue_cap[m] = sol.capacity
    unmatched = tuple(k for k in range(config.num_dues) if k not in assignment.matched_dues)

    notes = []
    if infeasible_dues:
        status = Status.INFEASIBLE
        notes.append(f"latency bound unattainable for DUEs {list(infeasible_dues)}")
    elif unmatched:
        status = Status.PARTIAL
        notes.append(f"no feasible band for DUEs {list(unmatched)}")
    else:
        status = Status.COMPLETE

    return AllocationResult(
        assignment=assignment,
        per_pair=per_pair,
        outage_budget=budgets,
        unmatched_dues=unmatched,
        infeasible_dues=infeasible_dues,
        sum_capacity=assignment.objective,
        per_due_latency=tuple(latency),
        per_cue_capacity=tuple(float(c) for c in cue_cap),
        status=status,
        outage_target=outage_target,
        power_method=power_method,
        notes=tuple(notes),
    )


def total_objective(result: AllocationResult, gains: LinkGains, config: ScenarioConfig):
    """Sum ergodic capacity over all CUEs, re-evaluated from the allocated powers.

    Matched CUEs use the busy-weighted two-term capacity; unmatched CUEs
    transmit at full power without interference.
    """
    total = 0.0
    for m in range(gains.num_cues):
        k = result.assignment.due_of(m)
        if k is None:
            total += capacity_no_interference(config.max_power_cue, gains.cue_to_bs[m], config.noise_power)
            continue
        sol = result.per_pair[m][k]
        ch = pair_channel(gains, config, m, k)
        q = ch.outage(sol.p_due, sol.p_cue)
        rho = min(config.arrival_rates[k] * config.slot_length / (1.0 - q), 1.0)
        total += pair_capacity(sol.p_due, sol.p_cue, ch, rho)
    return float(total)
