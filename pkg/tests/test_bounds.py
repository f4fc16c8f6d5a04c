import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabilab.bounds import (L2ExampleParams, RobustnessParams, beta_bound, l2_example_check,
                             omega_threshold, smallness_triple_check, stability_region,
                             triple_grid, window_integral)
from stabilab.errors import ParameterError
from stabilab.evolution import ScheduleOperator, SignalProductOperator
from stabilab.linalg import operator_norm
from stabilab.shifts import jordan_shift
from stabilab.signals import Bump, Const, Cos, Dilate, T0_estimate, Sum, integral_smallness


# --- beta ------------------------------------------------------------------

def test_beta_examples():
    assert beta_bound(RobustnessParams(-0.7, 1.0, 2.0, 0.0, 3.0)) == -0.7
    b = beta_bound(RobustnessParams(-1.0, 2.0, 1.0, 0.01, 10.0))
    assert b == pytest.approx(-1 + 0.06 + math.log(2.02) / 10, rel=1e-14)
    # the quoted four-digit value, -0.8697
    assert b == pytest.approx(-0.8697, abs=5e-5)


def test_params_validation():
    with pytest.raises(ParameterError):
        RobustnessParams(-1, 0.9, 1, 0.1, 1)
    with pytest.raises(ParameterError):
        RobustnessParams(-1, 1, 0, 0.1, 1)
    with pytest.raises(ParameterError):
        RobustnessParams(-1, 1, 1, -0.1, 1)
    with pytest.raises(ParameterError):
        RobustnessParams(-1, 1, 1, 0.1, 0)
    assert RobustnessParams(-1, 2, 1, 0.5, 1).C == 3.0


params = st.tuples(st.floats(-5, 5), st.floats(1, 10), st.floats(0.01, 10), st.floats(0, 2),
                   st.floats(0.01, 100))


@settings(max_examples=100, deadline=None)
@given(params, st.floats(1e-6, 1.0))
def test_beta_monotone(p, step):
    alpha, K, M, d, h = p
    base = beta_bound(RobustnessParams(alpha, K, M, d, h))
    assert beta_bound(RobustnessParams(alpha, K, M, d + step, h)) > base
    assert beta_bound(RobustnessParams(alpha, K * (1 + step), M, d, h)) > base
    if (1 + d) * K > 1:
        assert beta_bound(RobustnessParams(alpha, K, M, d, h * (1 + step))) < base


# --- region ----------------------------------------------------------------

def test_region_limit_one_third():
    (r,) = stability_region(-1.0, 1.0, 1.0, [1e9])
    assert r.delta_star == pytest.approx(1 / 3, abs=1e-6)


def test_region_empty_case():
    (r,) = stability_region(-1.0, 1.0, math.e, [1.0])
    assert r.delta_star is None and r.delta_grid is None


def test_region_grows_with_h_and_is_sharp():
    hs = np.geomspace(1.5, 100, 12)
    rows = stability_region(-1.0, 1.0, 2.0, hs, delta_grid=np.linspace(0, 0.4, 41))
    ds = [r.delta_star for r in rows]
    assert all(a <= b for a, b in zip(ds, ds[1:]))
    for r in rows:
        assert beta_bound(RobustnessParams(-1.0, 2.0, 1.0, r.delta_star, r.h)) < 0
        assert beta_bound(RobustnessParams(-1.0, 2.0, 1.0, r.delta_star + 2e-10, r.h)) >= 0
        assert r.delta_grid < r.delta_star


def test_region_requires_negative_alpha():
    with pytest.raises(ParameterError):
        stability_region(0.1, 1, 1, [1.0])


# --- omega0 ----------------------------------------------------------------

def test_omega_threshold_examples():
    assert omega_threshold(1, 10, 0.1) == pytest.approx(100)
    assert omega_threshold(2, 5, 0.2) == pytest.approx(2 * omega_threshold(2, 5, 0.4))


def test_omega_pipeline_gives_integral_smallness():
    h = 2.0
    (r,) = stability_region(-1.0, 1.0, 1.0, [h])
    delta = 0.5 * r.delta_star
    b = Sum(Bump(), Cos(1.0, 0.0))
    T0 = T0_estimate(b, delta / h)
    w0 = omega_threshold(b.bound, T0, delta)
    for w in (w0, 1.5 * w0):
        s = integral_smallness(Dilate(w, b), h, (-1.5 * h, 1.5 * h))
        assert s.value <= delta


# --- l2 example ------------------------------------------------------------

def test_l2_examples():
    r = l2_example_check(L2ExampleParams(0.5, 0.1))
    assert r.constraint_ok and r.decay_ok
    assert r.log_bound == pytest.approx(-math.log(0.8))
    assert r.predicted_rate == 0.25
    r = l2_example_check(L2ExampleParams(0.5, 0.25))
    assert r.log_bound == pytest.approx(math.log(2)) and not r.decay_ok
    assert l2_example_check(L2ExampleParams(0.5, 1e-12)).log_bound < 1e-11
    assert not l2_example_check(L2ExampleParams(0.3, 0.35)).constraint_ok


# --- smallness triple ------------------------------------------------------

def test_window_integral_closed_form_matches_quadrature():
    op = SignalProductOperator(np.zeros((2, 2)), Dilate(3.0, Sum(Bump(), Cos(1, 0.2))),
                               np.array([[0, 1.0], [2.0, 0]]))
    # the schedule operator has no closed form and goes through quadrature
    sched = ScheduleOperator(np.zeros((2, 2)), (np.eye(2), 2 * np.eye(2)), (0.0, 3.0))
    assert np.allclose(window_integral(sched, 1.0, 4.0), (1.0 + 1.5 + 2.0) * np.eye(2))
    assert np.allclose(window_integral(op, 2.0, -1.0), -window_integral(op, -1.0, 2.0))
    assert np.array_equal(window_integral(op, 1.0, 1.0), np.zeros((2, 2)))


def test_triple_zero_perturbation_passes():
    op = SignalProductOperator(np.zeros((3, 3)), Const(0.0), np.eye(3))
    res = smallness_triple_check(-np.eye(3), op, 1.0, 1.0, 0.1, triple_grid(1.0, (0, 5)))
    assert res.passed and res.worst_ratio == 0.0


def test_triple_rapid_cosine_passes():
    J = jordan_shift(6)
    A = -0.5 * np.eye(6) + 0.1 * J
    h, delta = 1.0, 0.05
    for w in (200.0, 1000.0):
        op = SignalProductOperator(np.zeros((6, 6)), Dilate(w, Cos()), J)
        M = max(operator_norm(A), operator_norm(J))
        res = smallness_triple_check(A, op, h, M, delta, triple_grid(h, (0, 3)))
        assert res.worst_ratio <= (2 / w) * M / (M * delta) + 1e-12
        assert res.passed


def test_triple_constant_fails_for_large_h():
    op = SignalProductOperator(np.zeros((2, 2)), Const(1.0), np.eye(2))
    res = smallness_triple_check(np.eye(2), op, 5.0, 1.0, 0.1, triple_grid(5.0, (0, 5)))
    assert not res.passed
    assert res.worst_ratio == pytest.approx(50.0)
    assert abs(res.worst_pair[1] - res.worst_pair[0]) == pytest.approx(5.0)


def test_triple_rejects_long_pairs():
    op = SignalProductOperator(np.zeros((2, 2)), Const(1.0), np.eye(2))
    with pytest.raises(ParameterError):
        smallness_triple_check(np.eye(2), op, 1.0, 1.0, 0.1, [(0.0, 2.0)])
