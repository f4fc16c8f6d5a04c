import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabilab.errors import InputError, NumericError, ParameterError
from stabilab.signals import (Bump, Const, Cos, Dilate, Scale, Sum, T0_estimate, adaptive_quad,
                              default_a_grid, integral_smallness, mean_value, parse_signal)


def bump_cos(phase=0.0):
    return Sum(Bump(), Cos(1.0, phase))


# --- evaluation ------------------------------------------------------------

def test_eval_examples():
    assert Bump()(0.0) == 1.0
    assert Bump()(2.0) == 0.0
    assert Bump()(-1.5) == 0.0
    assert bump_cos()(0.0) == 2.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 20), st.floats(-3, 3))
def test_eval_bounded_by_declared_bound(t, w, c):
    b = Dilate(w, Sum(Scale(c, Bump()), Cos(w, 0.3)))
    assert abs(float(b(t))) <= b.bound + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0.5, 5))
def test_antiderivative_matches_quadrature(t1, t2, w):
    b = Dilate(w, bump_cos(0.4))
    ref, _ = adaptive_quad(b.eval, t1, t2, tol=1e-12, breakpoints=b.kinks())
    assert b.integral(t1, t2) == pytest.approx(ref, abs=1e-9)


def test_parse_round_trip():
    text = "dilate(12.5,sum(bump,scale(-2.0,cos(1.0,0.5))))"
    b = parse_signal(text)
    assert b.expr() == text
    assert parse_signal(b.expr()) == b
    assert parse_signal("cos(2, pi)") == Cos(2.0, math.pi)


@pytest.mark.parametrize("bad", ["", "cos(1)", "bump(", "sin(1,0)", "const(1) extra"])
def test_parse_rejects_malformed(bad):
    with pytest.raises(InputError):
        parse_signal(bad)


def test_dilate_requires_positive_rate():
    with pytest.raises((ParameterError, ValueError)):
        Dilate(0.0, Bump())


# --- mean value ------------------------------------------------------------

def test_mean_of_constant():
    est = mean_value(Const(3.5), 17.0, [0.0, 5.0, -2.0])
    assert est.value == pytest.approx(3.5, abs=1e-12)
    assert est.dispersion <= 1e-12
    assert est.T_used == 17.0 and est.a_samples == 3


def test_mean_of_cosine():
    T = 2 * math.pi * 1e3
    assert abs(mean_value(Cos(), T).value) <= 2 / T


def test_mean_of_bump_plus_cosine():
    T = 1e4
    assert abs(mean_value(bump_cos(), T).value) <= (math.pi / 2 + 2) / T


def test_mean_value_rejects_bad_input():
    with pytest.raises(ParameterError):
        mean_value(Cos(), 0.0)
    with pytest.raises(ParameterError):
        mean_value(Cos(), 1.0, [])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3), st.floats(-1, 1), st.floats(-2, 2), st.floats(5, 200))
def test_mean_value_continuity(f, c1, c2, T):
    b1 = Sum(Cos(f, 0.1), Scale(c1, Bump()))
    b2 = Sum(Cos(f, 0.1), Const(c2))
    grid = np.linspace(-10, 10, 9)
    diff = abs(mean_value(b1, T, grid).value - mean_value(b2, T, grid).value)
    sup = abs(c1) + abs(c2)  # sup |c1 bump - c2| <= |c1| + |c2|
    assert diff <= sup + 2e-10


def test_default_grid_has_adversarial_starts():
    grid = default_a_grid(Bump())
    assert grid.size == 64 + 16
    assert np.any(grid == -1.0) and np.any(grid == 1.0)


# --- T0 --------------------------------------------------------------------

def test_T0_cosine():
    T0 = T0_estimate(Cos(), 0.01)
    assert 180 <= T0 <= 200 * 1.01


def test_T0_zero_signal_is_grid_start():
    assert T0_estimate(Const(0.0), 0.01, T_min=0.5) == 0.5


def test_T0_bump_plus_cosine():
    assert T0_estimate(bump_cos(), 0.01) <= (2 + math.pi / 2) / 0.01 * 1.01


def test_T0_rejects_nonzero_mean():
    with pytest.raises(NumericError, match="not zero-mean"):
        T0_estimate(Sum(Cos(), Const(0.1)), 0.01)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.005, 0.2), st.floats(0.005, 0.2))
def test_T0_monotone(e1, e2):
    lo, hi = sorted((e1, e2))
    b = bump_cos(0.7)
    assert T0_estimate(b, lo) >= T0_estimate(b, hi)


# --- integral smallness ----------------------------------------------------

def test_smallness_zero_signal():
    assert integral_smallness(Const(0.0), 1.0, (0, 10)).value == 0.0


@pytest.mark.parametrize("h", [math.pi, 4.0, 10.0])
def test_smallness_cosine(h):
    assert integral_smallness(Cos(), h, (0, 40)).value == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("w", [3.0, 25.0])
def test_smallness_dilated_cosine(w):
    s = integral_smallness(Dilate(w, Cos()), math.pi / w * 1.5, (0, 10))
    assert s.value == pytest.approx(2.0 / w, abs=1e-6)


def test_smallness_rejects_short_domain():
    with pytest.raises(ParameterError):
        integral_smallness(Cos(), 5.0, (0, 1))


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 20.0), st.floats(0.2, 2.0))
def test_dilation_law(w, h):
    b = bump_cos(0.3)
    small = integral_smallness(Dilate(w, b), h, (-5, 5))
    big = integral_smallness(b, w * h, (-5 * w, 5 * w))
    assert small.value <= big.value / w + small.error_bound + big.error_bound / w + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(1.0, 40.0))
def test_two_regime_bound(delta, w):
    # windows no longer than delta / M_b carry at most delta of mass
    b = Dilate(w, bump_cos(1.1))
    s = integral_smallness(b, delta / b.bound, (-3, 3))
    assert s.value <= delta + s.error_bound


def test_smallness_matches_brute_force_pairs():
    b = Dilate(7.0, bump_cos(0.2))
    h, dom = 0.8, (-2.0, 2.0)
    s = integral_smallness(b, h, dom, polish=False)
    step = h / 1000
    t = np.arange(dom[0], dom[1] + step / 2, step)
    F = b.antiderivative(t)
    w = int(round(h / step))
    brute = max(np.ptp(F[i:i + w + 1]) for i in range(0, t.size - w, 7))
    assert brute <= s.value + 1e-12
    assert s.value - brute <= 2 * s.error_bound
