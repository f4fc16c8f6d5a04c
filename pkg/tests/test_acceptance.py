"""End-to-end acceptance checks, one test per numbered criterion."""
import math
import time

import numpy as np
import pytest

from stabilab.cli import ExperimentConfig, write_result
from stabilab.evolution import ConstantOperator, certify_bound, default_grid
from stabilab.experiments import run_experiment
from stabilab.linalg import operator_norm
from stabilab.shifts import kakutani_weights, power_norm_by_formula, without_level
from stabilab.signals import (Bump, Const, Cos, Dilate, Scale, Sum, T0_estimate,
                              integral_smallness, mean_value)

SEED = 0


def timed(name, **params):
    t0 = time.perf_counter()
    res = run_experiment(name, params, seed=SEED, tol=1e-8)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def certify_run():
    return timed("certify")


@pytest.fixture(scope="module")
def oscillation_run():
    return timed("oscillation-sweep")


@pytest.fixture(scope="module")
def schedule_run():
    return timed("kakutani-schedule")


def test_criterion_01_floquet_closed_form(criterion):
    res, secs = timed("floquet")
    rows = res.tables["sweep"].rows
    rel = max(r[6] for r in rows)
    mod = max(abs(r[5] - r[4]) for r in rows)
    ok = len(rows) == 30 and rel <= 1e-8 and mod <= 1e-10 and secs < 10
    criterion(1, ok, f"30-cell monodromy max rel err {rel:.2e}, modulus err {mod:.2e}, {secs:.1f}s")
    assert ok


def test_criterion_02_shift_norm_identity(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for N in (2, 3, 5, 8, 17, 33, 64, 100, 129, 256):
        w = kakutani_weights(1.0, 2.0, N)
        W = w.matrix()
        P = np.eye(N)
        for k in range(1, min(32, N - 1) + 1):
            P = P @ W
            worst = max(worst, abs(power_norm_by_formula(w, k).value - operator_norm(P)))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and secs < 30
    criterion(2, ok, f"max |formula - dense| {worst:.2e} over N <= 256, k <= 32, {secs:.1f}s")
    assert ok


def test_criterion_03_exact_nilpotency(criterion):
    ok = True
    for m in range(1, 7):
        W = without_level(kakutani_weights(1.0, 2.0, 128), m).matrix()
        ok &= not np.linalg.matrix_power(W, 2 ** m).any()
    criterion(3, ok, "(W - L_m)^(2^m) == 0 entrywise for m = 1..6 at N = 128")
    assert ok


def test_criterion_04_robustness_certificate(criterion, certify_run):
    res, secs = certify_run
    systems = res.tables["systems"].rows
    cols = res.tables["systems"].columns
    get = {c: i for i, c in enumerate(cols)}
    hyp = max(r[get["hypothesis_ratio"]] for r in systems)
    worst = max(r[get["max_ratio"]] for r in systems)
    dims = [r[get["dim"]] for r in systems]
    ok = (len(systems) >= 20 and max(dims) <= 8 and hyp <= 1 + 1e-6 and worst <= 1 + 1e-6
          and res.passed and secs < 120)
    criterion(4, ok, f"{len(systems)} systems, hypothesis ratio {hyp:.4f}, "
                     f"max ratio {worst:.4f}, {secs:.1f}s")
    assert ok


def test_criterion_05_rapid_oscillation(criterion, oscillation_run):
    res, secs = oscillation_run
    s = res.summary
    ok = (res.passed and s["omega"] >= s["omega0"] and s["smallness_ok"]
          and s["smallness"] <= s["delta"] and s["max_ratio_published"] <= 1 + 1e-6
          and s["max_ratio_theorem"] <= 1 + 1e-6)
    criterion(5, ok, f"omega {s['omega']:.0f} >= omega0 {s['omega0']:.0f}, smallness "
                     f"{s['smallness']:.2e} <= delta {s['delta']:.2e}, K_tilde {s['K_tilde']:.4f}, "
                     f"ratio {s['max_ratio_published']:.4f}, {secs:.1f}s")
    assert ok


def test_criterion_06_kakutani_static(criterion):
    res, secs = timed("kakutani-static", N=64, m_top=5)
    levels = res.tables["levels"].rows
    (growth,) = res.tables["growth"].rows
    certs_ok = len(levels) == 5 and all(r[6] == "pass" for r in levels)
    ok = res.passed and certs_ok and res.summary["norms_decreasing"] and growth[1] >= 1 - 1e-6
    criterion(6, ok, f"growth ratio {growth[1]:.6f} on horizon {growth[0]:.3f}, "
                     f"static certificates m=1..5 {'pass' if certs_ok else 'fail'}, "
                     f"||A_m - A|| decreasing, {secs:.1f}s")
    assert ok


def test_criterion_07_kakutani_schedule(criterion, schedule_run):
    res, secs = schedule_run
    s = res.summary
    n_x0 = 16
    ok = (res.passed and s["E_m0"] <= 0.05 and len(res.tables["schedule"].rows) == 4
          and s["max_ratio"] <= 1 + 1e-6 and s["contrast_violation_t"] is not None)
    criterion(7, ok, f"m0 {s['m0']}, E {s['E_m0']:.4f}, max ratio {s['max_ratio']:.2e} "
                     f"over {n_x0} x0, unperturbed violation at t={s['contrast_violation_t']}, "
                     f"{secs:.1f}s")
    assert ok


def _random_pair(rng):
    prims = [lambda: Bump(), lambda: Cos(float(rng.uniform(0.2, 3)), float(rng.uniform(0, 6))),
             lambda: Const(float(rng.uniform(-1, 1)))]
    b1 = Sum(prims[rng.integers(3)](), prims[rng.integers(3)]())
    if rng.uniform() < 0.5:
        b1 = Dilate(float(rng.uniform(1, 5)), b1)
    g = prims[rng.integers(3)]()
    c = float(rng.uniform(-0.5, 0.5))
    return b1, Sum(b1, Scale(c, g)), abs(c) * g.bound


def test_criterion_08_signals(criterion):
    rng = np.random.default_rng(SEED)
    tol = 1e-10
    worst = -math.inf
    for _ in range(50):
        b1, b2, sup = _random_pair(rng)
        T = float(rng.uniform(5, 200))
        grid = rng.uniform(-20, 20, 8)
        d = abs(mean_value(b1, T, grid, tol).value - mean_value(b2, T, grid, tol).value)
        worst = max(worst, d - (sup + 2 * tol))
    T0 = T0_estimate(Cos(), 0.01)
    small = [integral_smallness(Cos(), h, (0.0, 30.0)).value for h in (math.pi, 5.0, 12.0)]
    err = max(abs(v - 2.0) for v in small)
    ok = worst <= 0 and 180 <= T0 <= 260 and err <= 1e-6
    criterion(8, ok, f"continuity slack {worst:.2e} <= 0 on 50 pairs, T0(cos, 0.01) = {T0:.2f}, "
                     f"|smallness - 2| = {err:.1e}")
    assert ok


def test_criterion_09_falsifiability(criterion):
    op = ConstantOperator(np.diag([-1.0, -3.0]))
    grid = default_grid(0.5, (0.0, 6.0))
    true = certify_bound(op, 1.0, -1.0, grid)
    tight = certify_bound(op, 1.0, -1.1, grid)
    ok = true.passed and tight.verdict == "fail"
    criterion(9, ok, f"true rate -1 ratio {true.max_ratio:.6f}; tightened -1.1 ratio "
                     f"{tight.max_ratio:.4f} -> {tight.verdict}")
    assert ok


def _csv_bytes(name, res, out):
    cfg = ExperimentConfig(name, {}, out, SEED, 1e-8)
    paths = write_result(cfg, {}, res)
    return {p.name: p.read_bytes() for p in paths if p.suffix == ".csv"}


def test_criterion_10_determinism(criterion, tmp_path, certify_run, oscillation_run, schedule_run):
    same = []
    for name, (first, _) in (("certify", certify_run), ("oscillation-sweep", oscillation_run),
                             ("kakutani-schedule", schedule_run)):
        second, _ = timed(name)
        a = _csv_bytes(name, first, tmp_path / name / "a")
        b = _csv_bytes(name, second, tmp_path / name / "b")
        same.append(a == b and len(a) > 0)
    ok = all(same)
    criterion(10, ok, "byte-identical CSVs on repeated runs of criteria 4, 5, 7: "
                      + ", ".join("yes" if s else "no" for s in same))
    assert ok
