"""Exponential integral E1 for positive real arguments.

Power series below x = 1, modified-Lentz continued fraction above. Both
functions accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_SERIES_TERMS = 30
_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_TINY = 1e-300


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("E1 is only defined here for finite x > 0")
    return x


def _series(x):
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-x) / k
        total += term / k
    return -EULER_GAMMA - np.log(x) - total


def _scaled_cf(x):
    """e^x E1(x) by the even continued fraction, valid for x > 1."""
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for i in range(1, _CF_MAX_ITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < _CF_EPS
        if done.all():
            break
    return h


def _dispatch(x, scaled):
    out = np.empty_like(x)
    small = x <= 1.0
    if small.any():
        xs = x[small]
        v = _series(xs)
        out[small] = v * np.exp(xs) if scaled else v
    if (~small).any():
        xl = x[~small]
        v = _scaled_cf(xl)
        # exp(-x) underflows to exactly 0 past x ~ 745
        out[~small] = v if scaled else v * np.exp(-xl)
    return out


def exp_integral_e1(x):
    """E1(x) = integral of exp(-t)/t from x to infinity, for x > 0.

    Relative accuracy is about 1e-14 where the result is a normal double;
    returns 0.0 once the value underflows.
    """
    arr = _check_domain(x)
    res = _dispatch(np.atleast_1d(arr), scaled=False)
    return float(res[0]) if arr.ndim == 0 else res.reshape(arr.shape)


def scaled_e1(x):
    """exp(x) * E1(x), finite for every positive x (tends to 1/x)."""
    arr = _check_domain(x)
    res = _dispatch(np.atleast_1d(arr), scaled=True)
    return float(res[0]) if arr.ndim == 0 else res.reshape(arr.shape)
