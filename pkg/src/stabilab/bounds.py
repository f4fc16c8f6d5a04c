"""Closed-form robustness bounds and hypothesis checkers.

The central formula: if ||T(t, s)|| <= K e^{alpha (t - s)}, ||B(t)|| <= M and
every integral of B over a window of length at most h has norm at most
delta, then the perturbed evolution satisfies
||S(t, s)|| <= (1 + delta) K e^{beta (t - s)} with

    beta = alpha + 3 M K delta + log((1 + delta) K) / h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .errors import NumericError, ParameterError
from .evolution import SignalProductOperator, TimeVaryingOperator
from .linalg import as_matrix, operator_norm

__all__ = [
    "RobustnessParams",
    "L2ExampleParams",
    "L2Report",
    "RegionSample",
    "TripleCheck",
    "beta_bound",
    "stability_region",
    "omega_threshold",
    "l2_example_check",
    "window_integral",
    "triple_grid",
    "smallness_triple_check",
]


@dataclass(frozen=True)
class RobustnessParams:
    alpha: float
    K: float
    M: float
    delta: float
    h: float

    def __post_init__(self):
        if not self.K >= 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if not self.M > 0:
            raise ParameterError(f"M must be positive, got {self.M}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be nonnegative, got {self.delta}")
        if not self.h > 0:
            raise ParameterError(f"h must be positive, got {self.h}")

    @property
    def C(self) -> float:
        """Constant in front of the perturbed bound, (1 + delta) K."""
        return (1.0 + self.delta) * self.K


def beta_bound(p: RobustnessParams) -> float:
    """alpha + 3 M K delta + log((1 + delta) K) / h."""
    return p.alpha + 3.0 * p.M * p.K * p.delta + math.log((1.0 + p.delta) * p.K) / p.h


class RegionSample(NamedTuple):
    h: float
    delta_star: float | None
    """Supremum of admissible delta (bisection), ``None`` if the region is empty."""
    delta_grid: float | None
    """Largest ``delta_grid`` entry inside the region, if a grid was given."""


def _delta_star(alpha, M, K, h, target, xtol=1e-10):
    f = lambda d: beta_bound(RobustnessParams(alpha, K, M, d, h)) - target  # noqa: E731
    if f(0.0) >= 0:
        return None
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    lo = 0.0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo


def stability_region(alpha: float, M: float, K: float, h_grid: Sequence[float],
                     delta_grid: Sequence[float] | None = None,
                     target: float = 0.0) -> list[RegionSample]:
    """For each h, the delta range on which beta_bound < ``target``.

    beta_bound is strictly increasing in delta, so the region is an interval
    [0, delta*) located by bisection to 1e-10.
    """
    if not alpha < 0:
        raise ParameterError(f"alpha must be negative, got {alpha}")
    if target > 0:
        raise ParameterError(f"target rate must be <= 0, got {target}")
    out = []
    grid = None if delta_grid is None else np.sort(np.asarray(delta_grid, dtype=float))
    for h in h_grid:
        ds = _delta_star(alpha, M, K, float(h), target)
        dg = None
        if grid is not None and ds is not None:
            inside = grid[(grid >= 0) & (grid < ds)]
            dg = float(inside[-1]) if inside.size else None
        out.append(RegionSample(float(h), ds, dg))
    return out


def omega_threshold(M: float, T0: float, delta: float) -> float:
    """Oscillation frequency M T0 / delta beyond which b(omega t) B is integrally delta-small."""
    if not (M > 0 and T0 > 0 and delta > 0):
        raise ParameterError("M, T0 and delta must all be positive")
    return M * T0 / delta


@dataclass(frozen=True)
class L2ExampleParams:
    a: float
    nu: float
    N: int = 64

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ParameterError(f"a must lie in (0, 1), got {self.a}")
        if not self.nu > 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if self.N < 2:
            raise ParameterError(f"N must be at least 2, got {self.N}")


@dataclass(frozen=True)
class L2Report:
    constraint_ok: bool
    log_bound: float
    decay_ok: bool
    predicted_rate: float


def l2_example_check(p: L2ExampleParams) -> L2Report:
    """Constraint 0 < nu < min(a, 1 - a) and the decay condition -log(1 - nu/a) < a/2."""
    constraint_ok = 0 < p.nu < min(p.a, 1 - p.a)
    log_bound = -math.log1p(-p.nu / p.a) if p.nu < p.a else math.inf
    return L2Report(constraint_ok, log_bound, log_bound < p.a / 2, p.a / 2)


def window_integral(Bfun: TimeVaryingOperator, t: float, u: float,
                    tol: float = 1e-10) -> np.ndarray:
    """C_t(u) = int_t^u B(tau) d tau (signed; u < t allowed)."""
    if u == t:
        return np.zeros((Bfun.dim, Bfun.dim))
    if isinstance(Bfun, SignalProductOperator):
        sig = Bfun.signal
        return (u - t) * Bfun.base + float(sig.integral(t, u)) * Bfun.B
    lo, hi = min(t, u), max(t, u)
    points = [p for p in Bfun.breakpoints(lo, hi)]
    val, err = quad_vec(Bfun, lo, hi, epsabs=tol, epsrel=tol, points=points or None)
    if not np.all(np.isfinite(val)):
        raise NumericError(f"quadrature of B over [{lo}, {hi}] did not converge")
    return val if u > t else -val


def triple_grid(h: float, domain: tuple[float, float], n_t: int = 41,
                n_u: int = 9) -> list[tuple[float, float]]:
    """(t, u) pairs with t uniform in ``domain`` and u - t uniform in [-h, h]."""
    lo, hi = domain
    ts = np.linspace(lo, hi, n_t)
    offs = np.linspace(-h, h, n_u)
    return [(float(t), float(t + d)) for t in ts for d in offs if d != 0]


class TripleCheck(NamedTuple):
    passed: bool
    worst_ratio: float
    worst_pair: tuple[float, float] | None
    worst_term: str | None


def smallness_triple_check(A, Bfun: TimeVaryingOperator, h: float, M: float, delta: float,
                           grid: Sequence[tuple[float, float]]) -> TripleCheck:
    """Check ||C_t(u) B(u)||, ||C_t(u) A|| and ||A C_t(u)|| <= M delta for |u - t| <= h.

    Reports the worst of the three ratios to M delta over the grid.
    """
    A = as_matrix(A)
    bound = M * delta
    if not bound > 0:
        raise ParameterError("M * delta must be positive")
    worst, pair, term = 0.0, None, None
    for t, u in grid:
        if abs(u - t) > h * (1 + 1e-12):
            raise ParameterError(f"grid pair ({t}, {u}) is longer than h = {h}")
        C = window_integral(Bfun, t, u)
        for name, X in (("C B", C @ Bfun(u)), ("C A", C @ A), ("A C", A @ C)):
            r = operator_norm(X) / bound
            if r > worst:
                worst, pair, term = r, (t, u), name
    return TripleCheck(worst <= 1.0, worst, pair, term)
