"""Scenario parameters, vehicle drop on a highway crossing one cell, and fading.

Large-scale gains follow ``alpha = G * beta * d**(-phi)`` with log-normal
shadowing ``beta``; they stay fixed over a block. Small-scale power gains are
unit-mean exponentials (Rayleigh amplitudes), i.i.d. per slot.

Layout: the BS sits at the origin at height ``bs_height``. ``num_lanes``
straight lanes of width ``lane_width`` run parallel to the x-axis, their
centre line ``road_offset`` metres from the BS. Vehicles are dropped
uniformly on the part of each lane inside the cell disc. A DUE receiver
trails its transmitter in the same lane by ``vehicle_speed * headway``
metres (lanes in the upper half drive towards +x, the others towards -x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

FAMILIES = ("cue_to_bs", "due_direct", "due_to_bs", "cue_to_due")
_OVERRIDABLE = ("pathloss_constant", "decay_exponent", "shadow_std_db")


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical, protocol and QoS parameters of one network block (SI units, linear)."""

    num_cues: int
    num_dues: int
    slot_length: float  # s
    pathloss_constant: float  # G, linear, distance in metres
    decay_exponent: float  # phi
    shadow_std_db: float  # xi
    noise_power: float  # W
    sinr_threshold: float  # gamma_0, linear
    latency_bound: float  # mu_0, s
    capacity_floor: float  # R_0, bits/s/Hz
    max_power_cue: float  # W
    max_power_due: float  # W
    arrival_rates: tuple  # packets/s, one per DUE
    slots_per_block: int = 20_000
    bandwidth: float = 1e6  # Hz; converts bits/s/Hz to bits/s
    cell_radius: float = 500.0
    num_lanes: int = 6
    lane_width: float = 4.0
    road_offset: float = 35.0
    bs_height: float = 25.0
    vehicle_height: float = 1.5
    vehicle_speed: float = 60.0 / 3.6  # m/s
    headway: float = 2.5  # s
    rng_seed: int = 0
    # per-family overrides of pathloss_constant / decay_exponent / shadow_std_db
    family_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        rates = self.arrival_rates
        if np.ndim(rates) == 0:
            rates = (float(rates),) * int(self.num_dues)
        object.__setattr__(self, "arrival_rates", tuple(float(r) for r in rates))
        self.validate()

    def validate(self):
        errs = []
        if not (self.num_cues >= self.num_dues >= 1):
            errs.append(f"num_dues: need num_cues >= num_dues >= 1 (got M={self.num_cues}, K={self.num_dues})")
        if not self.slot_length > 0:
            errs.append("slot_length: must be positive")
        if self.slots_per_block < 1:
            errs.append("slots_per_block: must be >= 1")
        if len(self.arrival_rates) != self.num_dues:
            errs.append(f"arrival_rates: expected {self.num_dues} values, got {len(self.arrival_rates)}")
        bad = [k for k, lam in enumerate(self.arrival_rates) if not (lam >= 0 and lam * self.slot_length < 1)]
        if bad:
            lam = self.arrival_rates[bad[0]]
            errs.append(f"arrival_rates: need 0 <= lambda*T < 1 for every DUE "
                        f"(DUE {bad[0]} has lambda*T = {lam * self.slot_length:g}; {len(bad)} DUEs affected)")
        for name in ("sinr_threshold", "noise_power", "max_power_cue", "max_power_due",
                     "pathloss_constant", "decay_exponent", "bandwidth", "cell_radius",
                     "lane_width", "vehicle_speed", "headway"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                errs.append(f"{name}: must be positive and finite, got {v}")
        if self.shadow_std_db < 0:
            errs.append("shadow_std_db: must be >= 0")
        if self.capacity_floor < 0:
            errs.append("capacity_floor: must be >= 0")
        if not self.latency_bound > self.slot_length:
            errs.append("latency_bound: must exceed slot_length")
        if self.num_lanes < 1:
            errs.append("num_lanes: must be >= 1")
        for fam, over in self.family_overrides.items():
            if fam not in FAMILIES:
                errs.append(f"unknown link family {fam!r}")
            for key, v in over.items():
                if key not in _OVERRIDABLE:
                    errs.append(f"{fam}: cannot override {key!r}")
                elif key == "shadow_std_db" and v < 0:
                    errs.append(f"{fam}.{key}: must be >= 0")
                elif key != "shadow_std_db" and not (math.isfinite(v) and v > 0):
                    errs.append(f"{fam}.{key}: must be positive and finite, got {v}")
        if errs:
            raise ValueError("; ".join(errs))

    def family_param(self, family, name):
        return self.family_overrides.get(family, {}).get(name, getattr(self, name))

    @property
    def due_gap(self):
        return self.vehicle_speed * self.headway

    def replace(self, **changes):
        if "arrival_rates" not in changes and "num_dues" in changes:
            changes["arrival_rates"] = self.arrival_rates[0]
        return replace(self, **changes)


@dataclass(frozen=True)
class Layout:
    cue: np.ndarray  # (M, 2)
    due_tx: np.ndarray  # (K, 2)
    due_rx: np.ndarray  # (K, 2)


@dataclass(frozen=True)
class LinkGains:
    cue_to_bs: np.ndarray  # (M,)
    due_direct: np.ndarray  # (K,)
    due_to_bs: np.ndarray  # (K,)
    cue_to_due: np.ndarray  # (M, K)

    def __post_init__(self):
        for fam in FAMILIES:
            arr = np.array(getattr(self, fam), dtype=float)
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ValueError(f"{fam} gains must be positive and finite")
            arr.setflags(write=False)
            object.__setattr__(self, fam, arr)
        m, k = self.cue_to_due.shape
        if self.cue_to_bs.shape != (m,) or self.due_direct.shape != (k,) or self.due_to_bs.shape != (k,):
            raise ValueError("gain arrays have inconsistent shapes")

    @property
    def num_cues(self):
        return self.cue_to_bs.shape[0]

    @property
    def num_dues(self):
        return self.due_direct.shape[0]


def large_scale_gain(distance, pathloss_constant, decay_exponent, shadow_db=0.0):
    """G * beta * d^-phi with beta = 10^(shadow_db/10)."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("zero or negative link distance (colocated transmitter and receiver)")
    return pathloss_constant * db_to_linear(shadow_db) * d ** (-decay_exponent)


def shadowing_db(rng, std_db, size):
    """Log-normal shadowing expressed in dB: N(0, std_db^2) draws."""
    return rng.normal(0.0, std_db, size) if std_db > 0 else np.zeros(size)


def fading_draw(rng, count):
    """``count`` i.i.d. unit-mean exponential small-scale power gains."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return rng.standard_exponential(count)


def lane_offsets(config: ScenarioConfig):
    n = config.num_lanes
    return config.road_offset + (np.arange(n) - (n - 1) / 2.0) * config.lane_width


def _drop(config, rng, count):
    ys = lane_offsets(config)
    if np.any(np.abs(ys) >= config.cell_radius):
        raise ValueError("road lies outside the cell")
    lanes = rng.integers(0, len(ys), count)
    half = np.sqrt(config.cell_radius**2 - ys[lanes] ** 2)
    xs = rng.uniform(-half, half)
    direction = np.where(lanes >= len(ys) / 2.0, 1.0, -1.0)
    return np.column_stack([xs, ys[lanes]]), direction


def place_vehicles(config: ScenarioConfig, rng) -> Layout:
    cue, _ = _drop(config, rng, config.num_cues)
    tx, direction = _drop(config, rng, config.num_dues)
    rx = tx.copy()
    rx[:, 0] -= direction * config.due_gap
    return Layout(cue=cue, due_tx=tx, due_rx=rx)


def link_distances(config: ScenarioConfig, layout: Layout):
    dh = config.bs_height - config.vehicle_height
    d_cue_bs = np.sqrt(np.sum(layout.cue**2, axis=1) + dh**2)
    d_due = np.linalg.norm(layout.due_tx - layout.due_rx, axis=1)
    d_due_bs = np.sqrt(np.sum(layout.due_tx**2, axis=1) + dh**2)
    d_cross = np.linalg.norm(layout.cue[:, None, :] - layout.due_rx[None, :, :], axis=2)
    return {"cue_to_bs": d_cue_bs, "due_direct": d_due, "due_to_bs": d_due_bs, "cue_to_due": d_cross}


def gains_from_layout(config: ScenarioConfig, layout: Layout, rng) -> LinkGains:
    dist = link_distances(config, layout)
    out = {}
    for fam in FAMILIES:
        d = dist[fam]
        shadow = shadowing_db(rng, config.family_param(fam, "shadow_std_db"), d.shape)
        out[fam] = large_scale_gain(
            d,
            config.family_param(fam, "pathloss_constant"),
            config.family_param(fam, "decay_exponent"),
            shadow,
        )
    return LinkGains(**out)


def generate_scenario(config: ScenarioConfig, with_layout=False):
    """Drop vehicles and compute all large-scale gains; deterministic in ``rng_seed``."""
    config.validate()
    place_ss, shadow_ss = np.random.SeedSequence(config.rng_seed).spawn(2)
    layout = place_vehicles(config, np.random.default_rng(place_ss))
    gains = gains_from_layout(config, layout, np.random.default_rng(shadow_ss))
    return (gains, layout) if with_layout else gains
