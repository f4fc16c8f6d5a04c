"""Named experiments: typed parameters in, CSV tables and a verdict out.

Each experiment is a function ``(params, seed, tol) -> ExperimentResult``
registered with its parameter schema.  The CLI, the scripts in ``scripts/``
and the acceptance tests all go through :func:`run_experiment`, so a result
is fully determined by the (experiment, parameters, seed, tol) tuple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .bounds import (L2ExampleParams, RobustnessParams, beta_bound, l2_example_check,
                     omega_threshold, smallness_triple_check, stability_region, triple_grid)
from .errors import InputError
from .evolution import (ConstantOperator, PropagationCache, SignalProductOperator,
                        certify_bound, default_grid, fit_constant, measure_constant_bound)
from .floquet import FloquetParams, SWEEP_COLUMNS, sweep, sweep_svg
from .kakutani import (KakutaniParams, build_schedule, build_stabilized, build_unstable,
                       choose_m0, contrast_run, estimate_Dm, growth_check, initial_vectors,
                       perturbation_norms, verify_stabilization)
from .linalg import matrix_log, operator_norm
from .shifts import (jordan_block_L, jordan_shift, kakutani_weights, mask_Lm,
                     nilpotency_index, power_norm_by_formula, without_level)
from .signals import (Bump, Cos, Dilate, T0_estimate, integral_smallness, mean_value,
                      parse_signal)

__all__ = [
    "Table",
    "ExperimentResult",
    "EXPERIMENTS",
    "run_experiment",
    "format_value",
    "robustness_system",
    "rapid_oscillation",
]


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise InputError(f"row width {len(r)} does not match {len(self.columns)} columns")
            lines.append(",".join(format_value(v) for v in r))
        return "\n".join(lines) + "\n"


def format_value(v) -> str:
    """Deterministic text form: shortest round-trip repr for floats."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentResult:
    name: str
    reproduces: str
    tables: dict
    summary: dict
    passed: bool | None = None
    svgs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Experiment:
    func: Callable
    schema: dict
    reproduces: str


EXPERIMENTS: dict[str, Experiment] = {}


def _register(name: str, reproduces: str, **schema):
    def deco(func):
        EXPERIMENTS[name] = Experiment(func, schema, reproduces)
        return func
    return deco


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _coerce(kind, value):
    if kind is bool:
        if isinstance(value, bool):
            return value
        v = str(value).lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise InputError(f"not a boolean: {value!r}")
    if kind is list:
        return _floats(value)
    return kind(value)


def resolve_params(name: str, given: dict) -> dict:
    """Schema defaults overridden by ``given``; unknown keys are rejected."""
    if name not in EXPERIMENTS:
        raise InputError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    schema = EXPERIMENTS[name].schema
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise InputError(f"unknown parameter {unknown[0]!r} for experiment {name!r}")
    out = {}
    for key, (kind, default) in schema.items():
        raw = given.get(key, default)
        try:
            out[key] = None if raw is None else _coerce(kind, raw)
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return out


def run_experiment(name: str, params: dict | None = None, seed: int = 0,
                   tol: float = 1e-8) -> ExperimentResult:
    p = resolve_params(name, params or {})
    exp = EXPERIMENTS[name]
    result = exp.func(p, seed=seed, tol=tol)
    result.reproduces = exp.reproduces
    return result


# ---------------------------------------------------------------------------
# bound calculators
# ---------------------------------------------------------------------------

@_register("beta", "robustness of exponential stability under integrally small perturbations: "
           "the exponent alpha + 3MK delta + log((1 + delta)K)/h",
           alpha=(float, -1.0), K=(float, 2.0), M=(float, 1.0), delta=(float, 0.01), h=(float, 10.0))
def _beta(p, seed, tol):
    rp = RobustnessParams(p["alpha"], p["K"], p["M"], p["delta"], p["h"])
    b = beta_bound(rp)
    t = Table(("alpha", "K", "M", "delta", "h", "beta", "C"),
              [(rp.alpha, rp.K, rp.M, rp.delta, rp.h, b, rp.C)])
    return ExperimentResult("beta", "", {"beta": t}, {"beta": b, "C": rp.C})


@_register("region", "admissible perturbation size delta* for which the robustness exponent "
           "stays below a target, as a function of h",
           alpha=(float, -1.0), M=(float, 1.0), K=(float, 1.0), h_min=(float, 0.1),
           h_max=(float, 1000.0), n_h=(int, 13), target=(float, 0.0))
def _region(p, seed, tol):
    hs = np.geomspace(p["h_min"], p["h_max"], p["n_h"])
    samples = stability_region(p["alpha"], p["M"], p["K"], hs, target=p["target"])
    t = Table(("h", "delta_star"), [(s.h, s.delta_star) for s in samples])
    return ExperimentResult("region", "", {"region": t},
                            {"nonempty": sum(s.delta_star is not None for s in samples)})


@_register("omega0", "oscillation threshold omega_0 = M T0 / delta for rapidly oscillating "
           "perturbations", M=(float, 1.0), T0=(float, 10.0), delta=(float, 0.1))
def _omega0(p, seed, tol):
    w = omega_threshold(p["M"], p["T0"], p["delta"])
    t = Table(("M", "T0", "delta", "omega0"), [(p["M"], p["T0"], p["delta"], w)])
    return ExperimentResult("omega0", "", {"omega0": t}, {"omega0": w})


@_register("l2check", "constraints of the weighted Jordan-block example on l2",
           a=(float, 0.5), nu=(float, 0.1))
def _l2check(p, seed, tol):
    r = l2_example_check(L2ExampleParams(p["a"], p["nu"]))
    t = Table(("a", "nu", "constraint_ok", "log_bound", "decay_ok", "predicted_rate"),
              [(p["a"], p["nu"], r.constraint_ok, r.log_bound, r.decay_ok, r.predicted_rate)])
    return ExperimentResult("l2check", "", {"l2check": t}, dict(r.__dict__),
                            r.constraint_ok and r.decay_ok)


@_register("triple", "smallness triple ||C B||, ||C A||, ||A C|| <= M delta for unbounded "
           "perturbations, on the Jordan-block example with b(omega t) J",
           a=(float, 0.5), nu=(float, 0.1), N=(int, 16), omega=(float, 200.0), h=(float, 1.0),
           M=(float, 1.0), delta=(float, 0.05), signal=(str, "cos(1.0,0.0)"),
           t_max=(float, 10.0))
def _triple(p, seed, tol):
    A = matrix_log(jordan_block_L(p["a"], p["nu"], p["N"]))
    b = Dilate(p["omega"], parse_signal(p["signal"]))
    Bop = SignalProductOperator(np.zeros_like(A), b, jordan_shift(p["N"]))
    grid = triple_grid(p["h"], (0.0, p["t_max"]))
    r = smallness_triple_check(A, Bop, p["h"], p["M"], p["delta"], grid)
    t = Table(("worst_ratio", "worst_t", "worst_u", "worst_term", "passed"),
              [(r.worst_ratio, *(r.worst_pair or (None, None)), r.worst_term, r.passed)])
    return ExperimentResult("triple", "", {"triple": t}, {"worst_ratio": r.worst_ratio}, r.passed)


# ---------------------------------------------------------------------------
# signals and shifts
# ---------------------------------------------------------------------------

@_register("gap-mean", "mean value of a generalised almost periodic signal: windowed averages, "
           "the window length T0 and integral smallness",
           signal=(str, "sum(bump,cos(1.0,0.0))"), T_values=(list, "10,100,1000"),
           eps=(float, 0.01), h=(float, 3.141592653589793))
def _gap_mean(p, seed, tol):
    b = parse_signal(p["signal"])
    rows = []
    for T in p["T_values"]:
        est = mean_value(b, T, tol=min(tol, 1e-10))
        rows.append((T, est.value, est.dispersion, est.a_samples))
    T0 = T0_estimate(b, p["eps"])
    per = b.periodicity()
    span = 2.0 + 2.0 * p["h"] + (per[0] if per and per[0] else 0.0)
    sm = integral_smallness(b, p["h"], (-span, span))
    tables = {
        "mean": Table(("T", "mean", "dispersion", "a_samples"), rows),
        "summary": Table(("signal", "eps", "T0", "h", "smallness", "smallness_error"),
                         [(b.expr(), p["eps"], T0, p["h"], sm.value, sm.error_bound)]),
    }
    return ExperimentResult("gap-mean", "", tables, {"T0": T0, "smallness": sm.value})


@_register("shifts-dump", "weighted shifts with the Kakutani ruler weights: weights, norms of "
           "powers from consecutive products, nilpotency after removing one level",
           M=(float, 1.0), K=(float, 2.0), N=(int, 16), level=(int, 0),
           kind=(str, "kakutani"), k_max=(int, 8))
def _shifts_dump(p, seed, tol):
    w = kakutani_weights(p["M"], p["K"], p["N"])
    if p["kind"] == "masked":
        w = mask_Lm(w, p["level"])
    elif p["kind"] == "complement":
        w = without_level(w, p["level"])
    elif p["kind"] != "kakutani":
        raise InputError(f"kind must be kakutani, masked or complement, got {p['kind']!r}")
    weights = Table(("n", "weight"), [(i + 1, x) for i, x in enumerate(w.weights)])
    powers = []
    for k in range(1, p["k_max"] + 1):
        pn = power_norm_by_formula(w, k)
        powers.append((k, pn.value, pn.truncation_dominated))
    nil = nilpotency_index(w)
    tables = {
        "weights": weights,
        "powers": Table(("k", "norm", "truncation_dominated"), powers),
        "nilpotency": Table(("index", "truncation_dominated"), [tuple(nil)]),
    }
    return ExperimentResult("shifts-dump", "", tables, {"nilpotency_index": nil.index})


# ---------------------------------------------------------------------------
# robustness certificate suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessSystem:
    A: np.ndarray
    B0: np.ndarray
    signal: Any
    alpha: float
    K: float
    M: float
    delta: float
    h: float

    @property
    def params(self) -> RobustnessParams:
        return RobustnessParams(self.alpha, self.K, self.M, self.delta, self.h)

    def operator(self) -> SignalProductOperator:
        return SignalProductOperator(self.A, self.signal, self.B0)


def robustness_system(rng: np.random.Generator, max_dim: int = 8) -> RobustnessSystem:
    """A random system meeting the hypotheses of the robustness bound.

    A = S T S^{-1} with T upper triangular with negative diagonal; alpha is
    half the spectral abscissa and K the measured sup of ||e^{At}|| e^{-alpha t}
    (times 1.01 to cover the sampling gaps).  B(t) = b(t) B0 with
    b = dilate(omega, bump + cos), so M = 2 ||B0|| and delta is the measured
    integral smallness plus its discretisation error.
    """
    d = int(rng.integers(2, max_dim + 1))
    T = np.triu(rng.normal(scale=0.4, size=(d, d)), 1)
    T[np.diag_indices(d)] = -rng.uniform(0.5, 2.0, size=d)
    S = np.eye(d) + 0.3 * rng.normal(size=(d, d))
    A = S @ T @ np.linalg.inv(S)
    abscissa = float(np.max(np.real(np.linalg.eigvals(A))))
    alpha = 0.5 * abscissa
    K = 1.01 * measure_constant_bound(A, alpha, horizon=40.0 / abs(alpha), samples=4001)
    B0 = rng.normal(size=(d, d))
    B0 *= rng.uniform(0.2, 1.0) / operator_norm(B0)
    omega = float(rng.uniform(10.0, 60.0))
    phase = float(rng.uniform(0.0, 2 * math.pi))
    sig = Dilate(omega, Bump() + Cos(1.0, phase))
    h = float(rng.uniform(0.5, 2.0))
    period = 2 * math.pi / omega
    span = 1.0 / omega + h + period
    sm = integral_smallness(sig, h, (-span, span))
    nb = operator_norm(B0)
    return RobustnessSystem(A, B0, sig, alpha, K, sig.bound * nb,
                            (sm.value + sm.error_bound) * nb, h)


@_register("certify", "robustness bound ||S(t,s)|| <= (1 + delta) K e^{beta (t - s)} on a "
           "randomized suite of integrally small perturbations",
           n_systems=(int, 20), max_dim=(int, 8), t_min=(float, -1.0), t_max=(float, 8.0))
def _certify(p, seed, tol):
    rng = np.random.default_rng(seed)
    sys_rows, sample_rows = [], []
    violations = 0
    for i in range(p["n_systems"]):
        sysm = robustness_system(rng, p["max_dim"])
        rp = sysm.params
        beta = beta_bound(rp)
        grid = default_grid(sysm.h, (p["t_min"], p["t_max"]))
        hyp = certify_bound(ConstantOperator(sysm.A), sysm.K, sysm.alpha,
                            default_grid(sysm.h, (0.0, p["t_max"] - p["t_min"])), tol=tol)
        cert = certify_bound(sysm.operator(), rp.C, beta, grid, tol=tol)
        violations += int(not cert.passed)
        sys_rows.append((i, sysm.A.shape[0], sysm.alpha, sysm.K, sysm.M, sysm.delta, sysm.h,
                         beta, rp.C, hyp.max_ratio, cert.max_ratio, cert.verdict))
        sample_rows.extend((i, *r) for r in cert.rows())
    tables = {
        "systems": Table(("system", "dim", "alpha", "K", "M", "delta", "h", "beta", "C",
                          "hypothesis_ratio", "max_ratio", "verdict"), sys_rows),
        "samples": Table(("system", "s", "t", "norm", "bound", "ratio"), sample_rows),
    }
    return ExperimentResult("certify", "", tables,
                            {"systems": p["n_systems"], "violations": violations},
                            violations == 0)


# ---------------------------------------------------------------------------
# rapid oscillation on the Jordan-block example
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillationPlan:
    alpha: float
    K: float
    M: float
    h: float
    delta: float
    T0: float
    omega0: float
    omega: float
    target: float


def rapid_oscillation_plan(a: float, nu: float, N: int, signal, h_grid,
                           omega: float | None = None) -> tuple[OscillationPlan, list, np.ndarray]:
    """Choose h, delta, T0 and omega >= omega0 for the perturbation b(omega t) J.

    The unperturbed rate is alpha = -a/2 with K measured; delta is the largest
    perturbation size that keeps the robustness exponent at or below the
    target -a/4; T0 comes from the windowed means of b at eps = delta/h.  The
    h minimising omega0 = M T0 / delta is used, and omega is rounded up so
    that h/4 is a whole number of periods of b(omega t).
    """
    A = matrix_log(jordan_block_L(a, nu, N))
    alpha, target = -a / 2, -a / 4
    K = measure_constant_bound(A, alpha, horizon=60.0 / a, samples=3001)
    K = max(1.0, K)
    M = signal.bound * operator_norm(jordan_shift(N))
    rows = []
    best = None
    for rs in stability_region(alpha, M, K, h_grid, target=target):
        if rs.delta_star is None:
            rows.append((rs.h, None, None, None))
            continue
        delta = rs.delta_star
        T0 = T0_estimate(signal, delta / rs.h)
        w0 = omega_threshold(M, T0, delta)
        rows.append((rs.h, delta, T0, w0))
        if best is None or w0 < best[3]:
            best = (rs.h, delta, T0, w0)
    if best is None:
        raise InputError("no h in the grid admits a perturbation size meeting the target rate")
    h, delta, T0, w0 = best
    w = w0 if omega is None else max(omega, w0)
    per = signal.periodicity()
    if per is not None and per[0] > 0:
        # whole periods per quarter of h, so lattice points are period anchors
        n = math.ceil(w * h / (4 * per[0]) - 1e-12)
        w = n * 4 * per[0] / h
    return OscillationPlan(alpha, K, M, h, delta, T0, w0, w, target), rows, A


def _oscillation_grid(h, t_end):
    pairs = default_grid(h, (0.0, t_end))
    seen = set(pairs)
    for s in np.arange(0.0, t_end, 5.0):
        for span in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0):
            t = min(float(s) + span, t_end)
            if t > s and (float(s), t) not in seen:
                seen.add((float(s), t))
                pairs.append((float(s), t))
    return pairs


def rapid_oscillation(a=0.5, nu=0.1, N=64, signal="sum(bump,cos(1.0,0.0))",
                      h_grid=None, omega=None, t_end=50.0, tol=1e-8) -> ExperimentResult:
    b = parse_signal(signal) if isinstance(signal, str) else signal
    if h_grid is None:
        h_grid = np.geomspace(0.05, 1.0, 9)
    plan, rows, A = rapid_oscillation_plan(a, nu, N, b, h_grid, omega)
    bw = Dilate(plan.omega, b)
    per = bw.periodicity()
    span = 1.0 / plan.omega + plan.h + (per[0] if per and per[0] else 0.0)
    sm = integral_smallness(bw, plan.h, (-span, span))
    small_ok = sm.value + sm.error_bound <= plan.delta
    op = SignalProductOperator(A, bw, jordan_shift(N))
    rp = RobustnessParams(plan.alpha, plan.K, plan.M, plan.delta, plan.h)
    beta = beta_bound(rp)
    cache = PropagationCache()
    grid = _oscillation_grid(plan.h, t_end)
    cert = certify_bound(op, rp.C, plan.target, grid, tol=tol, cache=cache)
    K_tilde = 1.05 * fit_constant(cert, plan.target)
    # the published constant, checked on a second grid shifted off the first
    grid2 = [(s + 0.5 * plan.h, t) for s, t in default_grid(plan.h, (0.0, t_end))
             if s + 0.5 * plan.h < t]
    cert2 = certify_bound(op, K_tilde, plan.target, grid2, tol=tol, cache=cache)
    summary = {
        "alpha": plan.alpha, "K": plan.K, "M": plan.M, "h": plan.h, "delta": plan.delta,
        "T0": plan.T0, "omega0": plan.omega0, "omega": plan.omega, "beta": beta,
        "target_rate": plan.target, "C_theorem": rp.C, "K_tilde": K_tilde,
        "smallness": sm.value, "smallness_error": sm.error_bound, "smallness_ok": small_ok,
        "max_ratio_theorem": cert.max_ratio, "max_ratio_published": cert2.max_ratio,
    }
    tables = {
        "plan": Table(("h", "delta", "T0", "omega0"), rows),
        "certificate": Table(("s", "t", "norm", "bound", "ratio"), list(cert.rows())),
        "published": Table(("s", "t", "norm", "bound", "ratio"), list(cert2.rows())),
        "summary": Table(tuple(summary), [tuple(summary.values())]),
    }
    passed = small_ok and beta <= plan.target and cert.passed and cert2.passed
    return ExperimentResult("oscillation-sweep", "", tables, summary, passed)


@_register("oscillation-sweep", "rapidly oscillating perturbations b(omega t) J of the "
           "Jordan-block example: delta from the stability region, T0 from windowed means, "
           "omega >= M T0 / delta, certified at rate -a/4",
           a=(float, 0.5), nu=(float, 0.1), N=(int, 64), signal=(str, "sum(bump,cos(1.0,0.0))"),
           h_min=(float, 0.05), h_max=(float, 1.0), n_h=(int, 9), omega=(float, None),
           t_end=(float, 50.0))
def _oscillation(p, seed, tol):
    return rapid_oscillation(p["a"], p["nu"], p["N"], p["signal"],
                             np.geomspace(p["h_min"], p["h_max"], p["n_h"]), p["omega"],
                             p["t_end"], tol)


# ---------------------------------------------------------------------------
# periodic pulse
# ---------------------------------------------------------------------------

@_register("floquet", "periodic pulse stabilising a saddle: monodromy e^{R w} e^{A (T - w)} "
           "and multipliers of modulus exp((alpha - beta)(T - w)/2)",
           alpha_grid=(list, "0.5,1"), beta_grid=(list, "1,2,3"), T_grid=(list, "2,5,10"),
           delta_grid=(list, "0.5,1"), rel_tol=(float, 1e-8), mod_tol=(float, 1e-10))
def _floquet(p, seed, tol):
    grid = [FloquetParams(a, b, T, d) for a in p["alpha_grid"] for b in p["beta_grid"]
            for T in p["T_grid"] for d in p["delta_grid"] if 0 < a < b and 0 < d < T]
    rows = sweep(grid, tol=min(tol, 1e-12))
    ok = all(r.rel_err <= p["rel_tol"] and abs(r.modulus_numeric - r.modulus_closed) <= p["mod_tol"]
             for r in rows)
    res = ExperimentResult("floquet", "", {"sweep": Table(SWEEP_COLUMNS, [tuple(r) for r in rows])},
                           {"cells": len(rows), "max_rel_err": max(r.rel_err for r in rows)}, ok)
    res.svgs["multipliers"] = sweep_svg(rows)
    return res


# ---------------------------------------------------------------------------
# Kakutani constructions
# ---------------------------------------------------------------------------

@_register("kakutani-static", "static stabilisation A_m = log(R I + W - L_m) of the unstable "
           "A = log(R I + W): ||A_m - A||, D_m and decay certificates",
           R=(float, 0.9), M=(float, 1.0), K=(float, 2.0), N=(int, 64), m_top=(int, 5),
           cert_points=(int, 1500))
def _kakutani_static(p, seed, tol):
    kp = KakutaniParams(p["R"], p["M"], p["K"], p["N"])
    A = build_unstable(kp)
    norms = perturbation_norms(kp, A)
    rate = math.log(kp.R) + 0.5 * abs(math.log(kp.R))
    rows = []
    ok = True
    for m in range(1, min(p["m_top"], kp.m_max) + 1):
        Am = build_stabilized(kp, m)
        d = estimate_Dm(Am, kp.omega)
        ts = np.linspace(0.0, d.horizon, p["cert_points"] + 1)[1:]
        grid = [(0.0, float(t)) for t in ts]
        cert = certify_bound(ConstantOperator(Am), d.value * 1.01, rate, grid, tol=tol)
        rows.append((m, norms[m], d.log_value, d.t_peak, d.horizon, cert.max_ratio, cert.verdict))
        ok &= cert.passed
    decreasing = all(norms[m + 1] < norms[m] for m in range(1, kp.m_max))
    g = growth_check(kp)
    tables = {
        "levels": Table(("m", "norm_B", "log_D", "t_peak", "horizon", "max_ratio", "verdict"), rows),
        "growth": Table(("converged_horizon", "min_ratio", "samples", "growth_rate"),
                        [(g.horizon, g.min_ratio, g.samples, kp.growth_rate)]),
    }
    growth_ok = g.samples > 0 and g.min_ratio >= 1 - 1e-6
    return ExperimentResult("kakutani-static", "", tables,
                            {"norms_decreasing": decreasing, "growth_ok": growth_ok},
                            bool(ok and decreasing and growth_ok))


@_register("kakutani-schedule", "time-dependent stabilisation by switching B(t) between the "
           "static perturbations at times t_k; final decay bound and unperturbed contrast",
           R=(float, 0.9), M=(float, 1.0), K=(float, 2.0), N=(int, 512), threshold=(float, 0.05),
           m0=(int, 0), steps=(int, 3), dt=(float, 5.0), n_random=(int, 8),
           n_canonical=(int, 8))
def _kakutani_schedule(p, seed, tol):
    base = KakutaniParams(p["R"], p["M"], p["K"], p["N"])
    A = build_unstable(base)
    m0 = p["m0"] or choose_m0(base, p["threshold"], perturbation_norms(base, A))
    kp = KakutaniParams(p["R"], p["M"], p["K"], p["N"], m0)
    s = build_schedule(kp, p["steps"], A=A)
    last_gap = s.t_list[-1] - s.t_list[-2] if len(s.t_list) > 1 else 100.0
    t_end = s.t_list[-1] + last_gap
    marks = [*s.t_list, *(t - 1 for t in s.t_list[1:]), t_end]
    grid = np.union1d(np.arange(0.0, t_end, p["dt"]), np.array(marks))
    X0 = initial_vectors(kp.N, p["n_random"], p["n_canonical"], seed)
    rep = verify_stabilization(s, A, X0, grid, tol=min(tol, 1e-10))
    violation = contrast_run(s, A, X0, grid)
    tables = {
        "schedule": Table(("k", "t_k", "norm_B", "log_D"), list(s.rows())),
        "trajectory": Table(("t", "log_norm", "log_bound", "ratio"), rep.rows),
        "contrast": Table(("first_violation_t",), [(violation,)]),
    }
    summary = {"m0": m0, "E_m0": s.E_m0, "norm_A": s.norm_A, "omega": s.omega,
               "max_ratio": rep.max_ratio, "contrast_violation_t": violation}
    return ExperimentResult("kakutani-schedule", "", tables, summary,
                            bool(rep.passed and violation is not None))
