"""Latency-aware spectrum sharing and power allocation for vehicular links.

V2V pairs (DUEs) reuse the uplink bands of V2I users (CUEs). Each DUE's mean
packet latency bound is turned into a per-slot outage budget, each candidate
pair gets its powers in closed form, and a maximum-weight matching picks the
reuse pattern.
"""
from .allocator import AllocationResult, Status, allocate, total_objective
from .channel import LinkGains, ScenarioConfig, generate_scenario
from .matching import Assignment, max_weight_matching
from .power import (
    PairChannel,
    PairSolution,
    capacity_no_interference,
    coupling_f,
    coupling_f_inverse,
    optimal_pair_powers,
    pair_capacity,
    search_pair_powers,
)
from .queueing import (
    UnstableQueueError,
    analyze_queue,
    busy_probability,
    latency_to_outage_budget,
    mean_sojourn_time,
    min_sojourn_time,
    outage_probability,
)
from .scenario_file import ScenarioFileError, load_scenario, parse_scenario
from .simulator import SimConfig, SimStats, simulate_due_queue, simulate_pair, simulate_system
from .specfun import exp_integral_e1, scaled_e1

__version__ = "0.1.0"
