import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2x_alloc.specfun import exp_integral_e1, scaled_e1


def quad_e1(x):
    with mpmath.workdps(30):
        x = mpmath.mpf(x)
        return float(mpmath.quad(lambda u: mpmath.exp(-u) / u, [x, x + 1, x + 20, mpmath.inf]))


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.3, 0.999, 1.0, 1.001, 2.5, 7.0, 40.0])
def test_e1_against_quadrature(x):
    assert exp_integral_e1(x) == pytest.approx(quad_e1(x), rel=1e-12)


def test_e1_frozen_values():
    # quadrature oracle values, frozen
    assert exp_integral_e1(1.0) == pytest.approx(0.21938393439552029, rel=1e-14)
    assert exp_integral_e1(10.0) == pytest.approx(4.156968929685324e-06, rel=1e-13)


def test_scaled_matches_unscaled_where_both_representable():
    xs = np.geomspace(1e-4, 600, 200)
    assert np.allclose(scaled_e1(xs), np.exp(xs) * exp_integral_e1(xs), rtol=1e-12)


def test_scaled_large_argument_asymptotics():
    # e^x E1(x) ~ 1/x - 1/x^2 + 2/x^3
    x = 1e6
    assert scaled_e1(x) == pytest.approx(1 / x - 1 / x**2 + 2 / x**3, rel=1e-15)
    assert exp_integral_e1(800.0) == 0.0


@given(st.floats(min_value=1e-8, max_value=1e8))
@settings(max_examples=300, deadline=None)
def test_classical_bracket(x):
    # 0.5 ln(1 + 2/x) < e^x E1(x) < ln(1 + 1/x)
    s = scaled_e1(x)
    assert 0.5 * math.log1p(2 / x) * (1 - 1e-13) <= s <= math.log1p(1 / x) * (1 + 1e-13)


@pytest.mark.parametrize("x", [0.05, 0.9, 1.1, 3.0, 25.0])
def test_derivative(x):
    h = 1e-6 * x
    num = (exp_integral_e1(x + h) - exp_integral_e1(x - h)) / (2 * h)
    assert num == pytest.approx(-math.exp(-x) / x, rel=1e-7)


def test_monotone_and_continuous_across_branch():
    xs = np.geomspace(1e-6, 50, 5000)
    v = exp_integral_e1(xs)
    assert np.all(np.diff(v) < 0)
    lo, hi = exp_integral_e1(np.nextafter(1.0, 0.0)), exp_integral_e1(np.nextafter(1.0, 2.0))
    assert abs(lo - hi) < 1e-15


def test_shapes_and_domain():
    assert isinstance(exp_integral_e1(2.0), float)
    assert exp_integral_e1(np.ones((2, 3))).shape == (2, 3)
    for bad in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            exp_integral_e1(bad)
    with pytest.raises(ValueError):
        scaled_e1(np.array([1.0, -2.0]))
