"""Slotted ARQ transmit queue of a V2V link as an M/G/1 queue with vacations.

Packets arrive as a Poisson stream, one packet fits one slot, and the
head-of-line packet is retransmitted every slot until its SINR clears the
threshold. An empty queue idles for a whole slot (a vacation of length T),
so the service time is geometric in slots and the residual vacation seen by
an arrival averages T/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UnstableQueueError(ValueError):
    """Raised when the queue has no stationary regime (q >= 1 - lambda*T)."""


@dataclass(frozen=True)
class QueueParams:
    arrival_rate: float
    slot: float
    outage_prob: float

    def __post_init__(self):
        _check_load(self.arrival_rate, self.slot)
        if not 0.0 <= self.outage_prob < 1.0:
            raise ValueError(f"outage probability must lie in [0, 1), got {self.outage_prob}")


@dataclass(frozen=True)
class QueueAnalysis:
    busy_prob: float
    mean_service: float
    second_moment_service: float
    mean_sojourn: float
    stable: bool


def _check_load(arrival_rate, slot):
    if slot <= 0 or not math.isfinite(slot):
        raise ValueError(f"slot length must be positive, got {slot}")
    if arrival_rate < 0 or not arrival_rate * slot < 1.0:
        raise ValueError(f"need 0 <= lambda*T < 1, got lambda*T = {arrival_rate * slot}")


def outage_probability(p_due, p_cue, alpha_d, alpha_cross, noise, sinr_threshold):
    """Per-slot probability that the DUE's SINR falls below the threshold.

    Rayleigh fading on both the direct and the interfering link gives

        q = 1 - s exp(-g0 N / s) / (s + g0 Pc a_x),   s = Pd a_d.

    Works elementwise on numpy arrays as well as on floats.
    """
    args = (p_due, p_cue, alpha_d, alpha_cross, noise, sinr_threshold)
    if not all(np.all(np.isfinite(a)) for a in args):
        raise ValueError("outage_probability needs finite inputs")
    p_due = np.asarray(p_due, dtype=float)
    signal = p_due * alpha_d
    interference = sinr_threshold * np.asarray(p_cue, dtype=float) * alpha_cross
    with np.errstate(divide="ignore", invalid="ignore"):
        success = signal * np.exp(-sinr_threshold * noise / signal) / (signal + interference)
    success = np.where(signal > 0, success, 0.0)
    q = 1.0 - success
    return float(q) if q.ndim == 0 else q


def service_moments(q, slot):
    """First and second moments of the geometric service time (in seconds)."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"outage probability must lie in [0, 1), got {q}")
    if slot <= 0:
        raise ValueError("slot length must be positive")
    mean = slot / (1.0 - q)
    second = slot**2 * (1.0 + q) / (1.0 - q) ** 2
    return mean, second


def busy_probability(arrival_rate, slot, q):
    """Fraction of slots in which the DUE transmits: lambda*T / (1 - q).

    A value >= 1 means the queue is unstable; it is returned, not raised.
    """
    _check_load(arrival_rate, slot)
    if not 0.0 <= q < 1.0:
        raise ValueError(f"outage probability must lie in [0, 1), got {q}")
    return arrival_rate * slot / (1.0 - q)


def is_stable(arrival_rate, slot, q):
    return q < 1.0 - arrival_rate * slot


def mean_sojourn_time(arrival_rate, slot, q):
    """Mean queueing-plus-service time of a packet, in seconds."""
    _check_load(arrival_rate, slot)
    if not 0.0 <= q < 1.0:
        raise ValueError(f"outage probability must lie in [0, 1), got {q}")
    lam, T = arrival_rate, slot
    headroom = 1.0 - q - lam * T
    if headroom <= 0.0:
        raise UnstableQueueError(f"q = {q} >= 1 - lambda*T = {1.0 - lam * T}")
    return T / 2.0 + T / (1.0 - q) + lam * T**2 * (1.0 + q) / (2.0 * (1.0 - q) * headroom)


def min_sojourn_time(arrival_rate, slot):
    """Infimum of the mean sojourn time, reached with error-free slots (q = 0)."""
    _check_load(arrival_rate, slot)
    x = arrival_rate * slot
    return slot * (3.0 - 2.0 * x) / (2.0 * (1.0 - x))


def latency_to_outage_budget(arrival_rate, slot, latency_bound):
    """Largest per-slot outage probability whose mean sojourn equals the bound.

    Returns None when the bound is at or below the error-free latency, i.e.
    no outage level can meet it. Otherwise the result lies in (0, 1 - lambda*T).
    """
    _check_load(arrival_rate, slot)
    if latency_bound <= 0 or not math.isfinite(latency_bound):
        raise ValueError(f"latency bound must be positive and finite, got {latency_bound}")
    if latency_bound <= min_sojourn_time(arrival_rate, slot):
        return None
    lam, T, mu0 = arrival_rate, slot, latency_bound
    # other root of the quadratic in q is exactly 1
    return (2.0 * lam * T**2 - (2.0 * lam * mu0 + 3.0) * T + 2.0 * mu0) / (2.0 * mu0 - T)


def analyze_queue(arrival_rate, slot, q):
    """Bundle the closed-form queue quantities; unstable queues get infinite sojourn."""
    mean, second = service_moments(q, slot)
    rho = busy_probability(arrival_rate, slot, q)
    stable = is_stable(arrival_rate, slot, q)
    mu = mean_sojourn_time(arrival_rate, slot, q) if stable else math.inf
    return QueueAnalysis(
        busy_prob=rho,
        mean_service=mean,
        second_moment_service=second,
        mean_sojourn=mu,
        stable=stable,
    )
