import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabilab.errors import ParameterError
from stabilab.evolution import ConstantOperator, certify_bound, fit_constant, propagator
from stabilab.floquet import (SWEEP_COLUMNS, FloquetParams, default_sweep_grid,
                              monodromy_closed_form, multipliers, numeric_monodromy,
                              numeric_multipliers, pulse_operator, pulse_perturbation,
                              rotation_generator, sweep, sweep_svg)
from stabilab.linalg import eigenvalues, matrix_exp, operator_norm


def floquet_params():
    return st.tuples(st.floats(0.1, 2), st.floats(0.05, 2), st.floats(1.5, 12), st.floats(0.05, 0.9)) \
        .map(lambda x: FloquetParams(x[0], x[0] + x[1], x[2], x[3] * min(1.0, x[2] / 2)))


def test_params_validation():
    with pytest.raises(ParameterError):
        FloquetParams(2.0, 1.0, 5.0, 1.0)
    with pytest.raises(ParameterError):
        FloquetParams(1.0, 2.0, 1.0, 1.0)


def test_pulse_operator_values():
    p = FloquetParams(1.0, 2.0, 4.0, 1.0)
    op = pulse_operator(p)
    assert np.array_equal(op(0.0), p.A)
    assert np.array_equal(op(p.T - p.delta_p / 2), rotation_generator(p.delta_p))
    assert np.array_equal(op(p.T), p.A)  # half-open pulse
    assert op.breakpoints(0.0, 8.5) == [3.0, 4.0, 7.0, 8.0]
    assert np.array_equal(pulse_perturbation(p, 1.0), np.zeros((2, 2)))


@pytest.mark.parametrize("T", [5.0, 50.0, 500.0])
def test_pulse_mean_decays_with_period(T):
    p = FloquetParams(1.0, 2.0, T, 1.0)
    ts = np.linspace(0, 3 * T, 300_001)[:-1]
    mean = np.mean([pulse_perturbation(p, t) for t in ts[::100]], axis=0)
    expected = (p.delta_p / T) * (rotation_generator(p.delta_p) - p.A)
    assert np.max(np.abs(mean - expected)) <= 0.05 * np.max(np.abs(expected)) + 1e-3 / T


def test_rotation_quarter_turn():
    assert np.allclose(matrix_exp(rotation_generator(0.7) * 0.7), [[0, 1], [-1, 0]], atol=1e-15)


def test_closed_form_example():
    Y = monodromy_closed_form(FloquetParams(1, 2, 2, 1))
    assert np.allclose(Y, [[0, math.exp(-2)], [-math.e, 0]], rtol=1e-15)


def test_multiplier_example():
    lam = multipliers(FloquetParams(1, 2, 10, 1))
    assert abs(lam[0]) == pytest.approx(math.exp(-4.5), rel=1e-14)
    assert lam[0] == pytest.approx(1j * math.exp(-4.5))


def test_multipliers_approach_one():
    mods = [abs(multipliers(FloquetParams(1.0, 1.0 + e, 10.0, 1.0))[0]) for e in (1e-1, 1e-3, 1e-6)]
    assert all(m < 1 for m in mods) and mods == sorted(mods)
    assert 1 - mods[-1] < 1e-4


@settings(max_examples=25, deadline=None)
@given(floquet_params())
def test_multipliers_inside_unit_disk_and_match_eigs(p):
    lam = multipliers(p)
    assert abs(lam[0]) < 1
    Y = monodromy_closed_form(p)
    eig = sorted(eigenvalues(Y), key=lambda z: z.imag)
    # general eigen-solver oracle, relative to the multiplier modulus
    assert np.allclose(eig, sorted(lam, key=lambda z: z.imag), rtol=1e-10, atol=0)


@settings(max_examples=15, deadline=None)
@given(floquet_params())
def test_numeric_monodromy_matches_closed_form(p):
    Yn = numeric_monodromy(p)
    Yc = monodromy_closed_form(p)
    assert np.max(np.abs(Yn - Yc)) / np.max(np.abs(Yc)) <= 1e-8
    mods = np.abs(numeric_multipliers(Yn))
    assert np.allclose(mods, abs(multipliers(p)[0]), rtol=1e-8)


def test_unperturbed_system_grows():
    p = FloquetParams(0.5, 1.0, 4.0, 1.0)
    norms = [operator_norm(propagator(ConstantOperator(p.A), 0, t)) for t in (1, 2, 4)]
    assert np.allclose(norms, [math.exp(0.5 * t) for t in (1, 2, 4)], rtol=1e-10)


def test_pulse_system_certified_stable():
    p = FloquetParams(1.0, 2.0, 3.0, 0.5)
    beta = math.log(abs(multipliers(p)[0])) / p.T
    grid = [(s, s + k * p.T) for s in (0.0, 0.4, 1.7) for k in (1, 2, 3, 4, 5)]
    op = pulse_operator(p)
    C = fit_constant(certify_bound(op, 1.0, beta, grid, tol=1e-12), beta)
    grid2 = [(s + 0.1, t + 0.3) for s, t in grid]
    C2 = fit_constant(certify_bound(op, 1.0, beta, grid2, tol=1e-12), beta)
    cert = certify_bound(op, max(C, C2), beta, grid + grid2, tol=1e-12)
    assert cert.passed and beta < 0


def test_sweep_acceptance_grid():
    rows = sweep(default_sweep_grid())
    assert len(rows) == 30
    for r in rows:
        assert r.rel_err <= 1e-8
        assert r.modulus_numeric == pytest.approx(r.modulus_closed, rel=1e-8)
    assert list(rows[0]._fields) == list(SWEEP_COLUMNS)
    svg = sweep_svg(rows)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
