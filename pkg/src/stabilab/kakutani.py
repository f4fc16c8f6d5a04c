"""Stabilising an unstable generator by small nonautonomous perturbations.

With the Kakutani ruler weights W and R - M/K < R < 1 < R + M/K, the
operator A = log(R I + W) generates growth, while removing one level of
weights, A_m = log(R I + W - L_m), gives generators whose spectrum is the
single point log R and which are close to A in norm.  Switching between the
perturbations B_m = A_m - A slowly enough (the times t_k below) keeps every
solution of x' = (A + B(t)) x decaying.

On an N-truncation every A_m - (log R) I is nilpotent, so
e^{t A_m} = R^t * (polynomial in t) and the constants
D_m = sup_t ||e^{t A_m}|| e^{omega t} can be computed with a certified tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import InputError, NumericError, ParameterError
from .evolution import (ConstantOperator, PropagationCache, ScheduleOperator,
                        evolve)
from .linalg import as_matrix, block_partition, matrix_exp, matrix_log, operator_norm
from .shifts import kakutani_weights, shift_matrix, without_level

__all__ = [
    "KakutaniParams",
    "DmEstimate",
    "SwitchSchedule",
    "StabilizationReport",
    "build_unstable",
    "build_stabilized",
    "perturbation_norms",
    "choose_m0",
    "estimate_Dm",
    "build_schedule",
    "schedule_operator",
    "initial_vectors",
    "verify_stabilization",
    "contrast_run",
    "converged_horizon",
    "growth_check",
]


@dataclass(frozen=True)
class KakutaniParams:
    R: float = 0.9
    M: float = 1.0
    K: float = 2.0
    N: int = 64
    m0: int = 1

    def __post_init__(self):
        q = self.M / self.K if self.K else math.inf
        if not self.M > 0:
            raise ParameterError(f"M must be positive, got {self.M}")
        if not self.K > 1:
            raise ParameterError(f"K must exceed 1, got {self.K}")
        if not (0 < self.R - q < self.R < 1 < self.R + q):
            raise ParameterError(
                f"need 0 < R - M/K < R < 1 < R + M/K, got R={self.R}, M/K={q}"
            )
        if self.N < 2:
            raise ParameterError(f"N must be at least 2, got {self.N}")
        if not 1 <= self.m0 <= self.m_max:
            raise ParameterError(f"m0 must lie in [1, {self.m_max}], got {self.m0}")

    @property
    def m_max(self) -> int:
        """Largest level with 2^m <= N."""
        return int(math.floor(math.log2(self.N)))

    @property
    def omega(self) -> float:
        """Decay rate -log(R)/2 used for the stabilised generators."""
        return -0.5 * math.log(self.R)

    @property
    def growth_rate(self) -> float:
        """log(R + M/K), the spectral growth rate of the untruncated A."""
        return math.log(self.R + self.M / self.K)


def _weights(p: KakutaniParams):
    return kakutani_weights(p.M, p.K, p.N)


def build_unstable(p: KakutaniParams) -> np.ndarray:
    """A = log(R I + W) on the N-truncation."""
    return matrix_log(p.R * np.eye(p.N) + shift_matrix(_weights(p)))


def build_stabilized(p: KakutaniParams, m: int) -> np.ndarray:
    """A_m = log(R I + W - L_m); the shift part is nilpotent of index 2^m."""
    if not 1 <= m or 2 ** m > p.N:
        raise ParameterError(f"level m must satisfy 1 <= m and 2^m <= N={p.N}, got {m}")
    return matrix_log(p.R * np.eye(p.N) + shift_matrix(without_level(_weights(p), m)))


def perturbation_norms(p: KakutaniParams, A: np.ndarray | None = None) -> dict[int, float]:
    """||A_m - A|| for every level 1..m_max."""
    A = build_unstable(p) if A is None else A
    return {m: operator_norm(build_stabilized(p, m) - A) for m in range(1, p.m_max + 1)}


def choose_m0(p: KakutaniParams, threshold: float, norms: dict[int, float] | None = None) -> int:
    """Smallest m0 with sup_{m >= m0} ||A_m - A|| <= threshold."""
    norms = perturbation_norms(p) if norms is None else norms
    for m0 in sorted(norms):
        if max(v for m, v in norms.items() if m >= m0) <= threshold:
            return m0
    raise ParameterError(f"no level brings ||A_m - A|| below {threshold} at N={p.N}")


# ---------------------------------------------------------------------------
# D_m
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DmEstimate:
    """sup_t ||e^{t A_m}|| e^{omega t}, with the horizon that certifies it."""

    log_value: float
    t_peak: float
    horizon: float
    log_tail: float
    """Upper bound for log(||e^{t A_m}|| e^{omega t}) at every t >= horizon."""
    step: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709 else math.inf


def _constant_diagonal(A: np.ndarray) -> float:
    d = np.diagonal(A)
    if not (np.all(d == d[0]) and (np.allclose(np.triu(A, 1), 0) or np.allclose(np.tril(A, -1), 0))):
        raise InputError("estimate_Dm needs a triangular generator with constant diagonal")
    return float(d[0].real)


def _log_power_norms(Nb: np.ndarray) -> np.ndarray:
    """log(||Nb^j||_F / j!) for j = 0 .. index - 1 (Frobenius bounds the 2-norm)."""
    n = Nb.shape[0]
    out = [0.5 * math.log(n) if n > 1 else 0.0]
    P = Nb.copy()
    for j in range(1, n + 1):
        f = float(np.linalg.norm(P))
        if f == 0.0:
            break
        out.append(math.log(f) - math.lgamma(j + 1))
        P = P @ Nb
    # the identity term is exactly 1 in operator norm
    out[0] = 0.0
    return np.array(out)


def _tail_log_bound(log_c: np.ndarray, rate: float, t: float) -> float:
    j = np.arange(log_c.size)
    return rate * t + float(logsumexp(log_c + j * math.log(max(t, 1e-300))))


def _tail_horizon(log_c, rate, level, lo, cap):
    """Smallest t >= lo beyond which the polynomial tail bound stays <= level."""
    d = log_c.size
    t0 = max(lo, (d - 1) / -rate)  # every term t^j e^{rate t} decreases past here
    if _tail_log_bound(log_c, rate, t0) <= level:
        return t0
    hi = 2 * t0
    while _tail_log_bound(log_c, rate, hi) > level:
        hi *= 2
        if hi > cap:
            return None
    a, b = t0, hi
    while b - a > 1e-6 * b:
        mid = 0.5 * (a + b)
        if _tail_log_bound(log_c, rate, mid) > level:
            a = mid
        else:
            b = mid
    return b


def _scan_block(Nb, rate, step, horizon, cap):
    """Sampled max of log(||e^{t Nb}||) + rate t over [0, horizon], extending the
    horizon until the tail bound certifies it (or ``cap`` is reached)."""
    n = Nb.shape[0]
    log_c = _log_power_norms(Nb)
    E = matrix_exp(Nb * step)
    # pass 1: Frobenius norms in log space with renormalised stepping
    logF = [0.5 * math.log(n)]
    P = np.eye(n)
    shift = 0.0
    k = 0
    best_lower = 0.0  # t = 0 gives exactly 1
    top = (logF[0], 0, P, shift)
    every = 64
    checkpoints = {0: (P, 0.0)}
    while True:
        target = int(math.ceil(horizon / step))
        while k < target:
            P = E @ P
            k += 1
            s = float(np.max(np.abs(P)))
            P /= s
            shift += math.log(s)
            lf = math.log(float(np.linalg.norm(P))) + shift + rate * k * step
            logF.append(lf)
            if k % every == 0:
                checkpoints[k] = (P.copy(), shift)
            if lf > top[0]:
                top = (lf, k, P.copy(), shift)
        # exact norm at the Frobenius maximum is a lower bound for the supremum
        best_lower = max(0.0, math.log(operator_norm(top[2])) + top[3] + rate * top[1] * step)
        h_new = _tail_horizon(log_c, rate, best_lower, k * step, cap)
        if h_new is None:
            raise NumericError(f"D_m tail not certified below horizon cap {cap}")
        if h_new <= k * step + 1e-12:
            break
        horizon = h_new
    logF = np.array(logF)
    # pass 2: exact spectral norms where the Frobenius bound could beat the best
    cand = np.nonzero(logF >= best_lower)[0]
    first, last = int(cand[0]), int(cand[-1])
    start = (first // every) * every
    P, shift = checkpoints[start]
    best, best_i, best_prev = -math.inf, 0, (P, shift)
    prev = (P, shift)
    in_band = set(cand.tolist())
    for i in range(start, last + 1):
        if i > start:
            prev = (P, shift)
            P = E @ P
            s = float(np.max(np.abs(P)))
            P = P / s
            shift += math.log(s)
        if i in in_band:
            v = math.log(operator_norm(P)) + shift + rate * i * step
            if v > best:
                best, best_i, best_prev = v, i, prev
    # refine the peak between the neighbouring samples
    P0, s0 = best_prev
    lo_t = max(best_i - 1, 0) * step

    def neg(t):
        X = matrix_exp(Nb * (t - lo_t)) @ P0
        return -(math.log(operator_norm(X)) + s0 + rate * t)

    hi_t = (best_i + 1) * step
    r = minimize_scalar(neg, bounds=(lo_t, hi_t), method="bounded",
                        options={"xatol": 1e-10 * max(1.0, hi_t)})
    t_peak = best_i * step
    if -r.fun > best:
        best, t_peak = -r.fun, float(r.x)
    return best, t_peak, k * step, _tail_log_bound(log_c, rate, k * step)


def estimate_Dm(A_m, omega: float, horizon: float | None = None, samples: int = 2048,
                horizon_cap: float = 1e7) -> DmEstimate:
    """D = sup_{t >= 0} ||e^{t A_m}|| e^{omega t} for a triangular A_m with constant diagonal.

    The supremum is sampled on a uniform grid and refined at the peak.  The
    grid extends until the bound t^j e^{(lambda + omega) t} ||N^j|| / j!
    summed over the nilpotent part N proves nothing beyond it can exceed the
    sampled maximum.  Decoupled diagonal blocks are treated separately and
    identical blocks only once.
    """
    A_m = as_matrix(A_m)
    lam = _constant_diagonal(A_m)
    rate = lam + omega
    if not rate < 0:
        raise ParameterError(f"omega must be below -log R = {-lam}, got {omega}")
    if samples < 16:
        raise ParameterError("samples must be at least 16")
    Nfull = A_m - lam * np.eye(A_m.shape[0])
    blocks = {}
    for a, b in block_partition(Nfull):
        blk = np.ascontiguousarray(Nfull[a:b, a:b].real)
        blocks.setdefault(blk.tobytes() + bytes(str(blk.shape), "ascii"), blk)
    index = max(b.shape[0] for b in blocks.values())
    h0 = horizon if horizon is not None else max(1.0, (index - 1) / -rate) * 1.5
    step = h0 / samples
    results = [_scan_block(blk, rate, step, h0, horizon_cap) if blk.any()
               else (0.0, 0.0, 0.0, -math.inf) for blk in blocks.values()]
    top = max(results, key=lambda r: r[0])
    return DmEstimate(float(top[0]), float(top[1]), float(max(r[2] for r in results)),
                      float(max(r[3] for r in results)), float(step))


# ---------------------------------------------------------------------------
# switching schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchSchedule:
    omega: float
    E_m0: float
    norm_A: float
    m0: int
    log_D: tuple
    t_list: tuple
    B_list: tuple = field(repr=False)
    margin: float = 0.1

    def __post_init__(self):
        ts = self.t_list
        if len(ts) != len(self.B_list) or len(ts) != len(self.log_D):
            raise InputError("schedule lists must have equal length")
        if ts and ts[0] != 0.0:
            raise InputError("schedule must start at t_0 = 0")
        for k in range(1, len(ts)):
            if not ts[k] - ts[k - 1] > 1:
                raise ParameterError(f"gap t_{k} - t_{k - 1} must exceed 1")
            if self.recursion_log(k) > 1e-9:
                raise ParameterError(f"switching recursion violated at k={k}")

    @property
    def levels(self) -> tuple:
        return tuple(range(self.m0, self.m0 + len(self.t_list)))

    def recursion_log(self, k: int) -> float:
        """log of e^{||A|| + E} D_{m0+k} e^{-omega (t_k - t_{k-1}) / 2}; must be <= 0."""
        gap = self.t_list[k] - self.t_list[k - 1]
        return self.norm_A + self.E_m0 + self.log_D[k] - 0.5 * self.omega * gap

    def final_log_constant(self) -> float:
        """log of the constant e^{||A|| + E} D_{m0} in the final decay bound."""
        return self.norm_A + self.E_m0 + self.log_D[0]

    def rows(self):
        """(k, t_k, ||B_k||, D_k) for the schedule dump; D_k given as its log."""
        for k, (t, B, lD) in enumerate(zip(self.t_list, self.B_list, self.log_D)):
            yield (k, t, operator_norm(B), lD)


def build_schedule(p: KakutaniParams, steps: int, A: np.ndarray | None = None,
                   Dm: dict[int, DmEstimate] | None = None, margin: float = 0.1,
                   samples: int = 2048) -> SwitchSchedule:
    """Switching times t_k = t_{k-1} + max(1 + margin, (2/omega)(||A|| + E + log D_{m0+k}))."""
    if steps < 0 or p.m0 + steps > p.m_max:
        raise ParameterError(
            f"need m0 + steps <= m_max = {p.m_max}, got m0={p.m0}, steps={steps}"
        )
    A = build_unstable(p) if A is None else A
    omega = p.omega
    levels = list(range(p.m0, p.m0 + steps + 1))
    B_all = {m: build_stabilized(p, m) - A for m in range(p.m0, p.m_max + 1)}
    E = max(operator_norm(B) for B in B_all.values())
    Dm = {} if Dm is None else dict(Dm)
    for m in levels:
        if m not in Dm:
            Dm[m] = estimate_Dm(A + B_all[m], omega, samples=samples)
    normA = operator_norm(A)
    ts = [0.0]
    for m in levels[1:]:
        gap = max(1.0 + margin, (2.0 / omega) * (normA + E + Dm[m].log_value))
        ts.append(float(ts[-1] + gap))
    return SwitchSchedule(omega, float(E), float(normA), p.m0,
                          tuple(float(Dm[m].log_value) for m in levels),
                          tuple(ts), tuple(B_all[m] for m in levels), margin)


def schedule_operator(s: SwitchSchedule, A) -> ScheduleOperator:
    """x' = (A + B(t)) x with B(t) piecewise constant and linearly blended over [t_k - 1, t_k]."""
    return ScheduleOperator(A, s.B_list, s.t_list)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def initial_vectors(N: int, n_random: int = 8, n_canonical: int = 8, seed: int = 0) -> np.ndarray:
    """N x (n_random + n_canonical) block of unit initial vectors.

    Random vectors are normalised standard Gaussians; canonical vectors are
    e_i at evenly spaced indices starting from the first coordinate.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, n_random))
    X /= np.linalg.norm(X, axis=0)
    idx = np.unique(np.linspace(0, N - 1, n_canonical).round().astype(int))
    Ecan = np.zeros((N, idx.size))
    Ecan[idx, np.arange(idx.size)] = 1.0
    return np.hstack([X, Ecan])


class StabilizationReport(NamedTuple):
    passed: bool
    incomplete: bool
    max_ratio: float
    worst_time: float
    rows: list
    """(t, log ||x(t)||, log bound, ratio) for the worst initial vector at each grid time."""


def _final_bound_log(s: SwitchSchedule, t: np.ndarray) -> np.ndarray:
    return s.final_log_constant() - 0.5 * s.omega * np.asarray(t)


def verify_stabilization(s: SwitchSchedule, A, x0: np.ndarray, t_grid: Sequence[float],
                         tol: float = 1e-10, tol_ratio: float = 1e-6) -> StabilizationReport:
    """Check ||x(t)|| <= e^{||A|| + E} D_{m0} e^{-omega t / 2} ||x(0)|| along the grid.

    Solutions decay far below the floating-point range on the schedule
    horizon, so every column is renormalised to unit length after each step
    and its log-scale carried separately; the equation is linear, so this is
    exact.  Norms and bounds are reported as natural logarithms.
    """
    op = schedule_operator(s, A)
    t_grid = np.asarray(t_grid, dtype=float)
    X = np.asarray(x0, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n0 = np.linalg.norm(X, axis=0)
    live = n0 > 0
    X = X[:, live] / n0[live]
    log_scale = np.zeros(X.shape[1])
    cache = PropagationCache()
    rows = []
    worst, worst_t = -math.inf, float(t_grid[0])
    log_b = _final_bound_log(s, t_grid)
    incomplete = False
    for i, t in enumerate(t_grid):
        if i and X.shape[1]:
            try:
                X = evolve(op, X, t_grid[i - 1], t, tol, "auto", cache)
            except NumericError:
                incomplete = True
                break
            nx = np.linalg.norm(X, axis=0)
            if np.any(nx == 0) or not np.all(np.isfinite(nx)):
                incomplete = True
                break
            X = X / nx
            log_scale = log_scale + np.log(nx)
        if not X.shape[1]:
            rows.append((float(t), -math.inf, float(log_b[i]), 0.0))
            continue
        j = int(np.argmax(log_scale))
        log_r = float(log_scale[j] - log_b[i])
        rows.append((float(t), float(log_scale[j]), float(log_b[i]), math.exp(min(log_r, 700.0))))
        if log_r > worst:
            worst, worst_t = log_r, float(t)
    max_ratio = math.exp(min(worst, 700.0)) if worst > -math.inf else 0.0
    passed = (not incomplete) and max_ratio <= 1.0 + tol_ratio
    return StabilizationReport(passed, incomplete, max_ratio, worst_t, rows)


def contrast_run(s: SwitchSchedule, A, x0: np.ndarray, t_grid: Sequence[float]) -> float | None:
    """First grid time at which the unperturbed flow e^{tA} x0 breaks the decay bound.

    Stops at the first violation so the growing solution never overflows;
    returns ``None`` if no violation occurs on the grid.
    """
    op = ConstantOperator(A)
    t_grid = np.asarray(t_grid, dtype=float)
    X = np.asarray(x0, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n0 = np.linalg.norm(X, axis=0)
    log_b = _final_bound_log(s, t_grid)
    cache = PropagationCache()
    for i, t in enumerate(t_grid):
        if i:
            X = evolve(op, X, t_grid[i - 1], t, cache=cache)
        nx = np.linalg.norm(X, axis=0)
        ok = n0 > 0
        if np.any(np.log(nx[ok]) - np.log(n0[ok]) > log_b[i] + 1e-6):
            return float(t)
    return None


def converged_horizon(p: KakutaniParams, t_grid: Sequence[float], rel: float = 1e-6) -> float:
    """Largest grid time up to which doubling N changes ||e^{tA}|| by less than ``rel``.

    Returns 0.0 if even the first positive grid point is not converged.
    """
    big = KakutaniParams(p.R, p.M, p.K, 2 * p.N, p.m0)
    A1, A2 = build_unstable(p), build_unstable(big)
    last = 0.0
    for t in sorted(float(x) for x in t_grid if x > 0):
        n1 = operator_norm(matrix_exp(A1 * t))
        n2 = operator_norm(matrix_exp(A2 * t))
        if abs(n2 - n1) > rel * n2:
            break
        last = t
    return last


class GrowthCheck(NamedTuple):
    horizon: float
    min_ratio: float
    """min over checked t of ||e^{tA}|| / e^{t log(R + M/K)}."""
    samples: int


def growth_check(p: KakutaniParams, t_grid: Sequence[float] | None = None,
                 rel: float = 1e-6) -> GrowthCheck:
    """Compare ||e^{tA}|| with e^{t log(R + M/K)} on the truncation-converged horizon."""
    if t_grid is None:
        t_grid = np.linspace(0.0, 2.0, 401)[1:]
    h = converged_horizon(p, t_grid, rel)
    A = build_unstable(p)
    ts = [float(t) for t in t_grid if 0 < t <= h]
    ratios = [operator_norm(matrix_exp(A * t)) / math.exp(t * p.growth_rate) for t in ts]
    return GrowthCheck(h, min(ratios) if ratios else math.nan, len(ts))
