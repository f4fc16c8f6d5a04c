"""Evolution operators of x' = A(t) x and sampled exponential-bound certificates.

Integration is classical fourth-order Runge-Kutta with step doubling: a piece
is integrated with n and 2n steps until the two results agree to ``tol``
(relative), and the Richardson-corrected value is returned.  Intervals are
always cut at the discontinuity and kink times reported by the operator, so
no step straddles a jump.  Pieces on which the operator is constant are
propagated with the matrix exponential (``method="auto"``) or with the exact
RK4 step polynomial raised to the n-th power (``method="rk4"``).

Eventually periodic operators are propagated over whole periods with powers
of the one-period map (Floquet), which keeps rapidly oscillating
coefficients affordable on long horizons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import InputError, NumericError, ParameterError
from .linalg import as_matrix, matrix_exp, operator_norm
from .signals import ScalarSignal

__all__ = [
    "TimeVaryingOperator",
    "ConstantOperator",
    "SignalProductOperator",
    "PeriodicPulseOperator",
    "ScheduleOperator",
    "PropagationCache",
    "StabilityCertificate",
    "evolve",
    "propagator",
    "trajectory",
    "certify_bound",
    "default_grid",
    "fit_constant",
    "measure_constant_bound",
]

_EPS = np.finfo(float).eps
_MAX_STEPS = 1 << 22


class TimeVaryingOperator:
    """t -> A(t), a dim x dim matrix-valued function described in closed form."""

    kind = "abstract"
    dim: int

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def sup_norm_bound(self) -> float:
        raise NotImplementedError

    def breakpoints(self, s: float, t: float) -> list[float]:
        """Times in the open interval (s, t) where A(t) jumps or has a kink."""
        return []

    def constant_piece(self, s: float, t: float) -> tuple[Hashable, np.ndarray] | None:
        """``(key, A)`` if A(t) is constant on [s, t), else ``None``."""
        return None

    def periodicity(self) -> tuple[float, float] | None:
        """``(period, start)`` if A(t + period) = A(t) for t >= start."""
        return None

    def resolution(self) -> float:
        """Time scale on which A(t) varies; RK4 steps are kept below a quarter of it."""
        return math.inf

    def sampler(self, ts: np.ndarray):
        """``i -> A(ts[i])``; subclasses may precompute in one vectorised pass."""
        return lambda i: self(ts[i])


@dataclass(frozen=True, eq=False)
class ConstantOperator(TimeVaryingOperator):
    A: np.ndarray
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A))

    @property
    def dim(self):
        return self.A.shape[0]

    def __call__(self, t):
        return self.A

    @property
    def sup_norm_bound(self):
        return operator_norm(self.A)

    def constant_piece(self, s, t):
        return ("const", self.A)

    def periodicity(self):
        return None


@dataclass(frozen=True, eq=False)
class SignalProductOperator(TimeVaryingOperator):
    """A(t) = base + b(t) * B."""

    base: np.ndarray
    signal: ScalarSignal
    B: np.ndarray
    kind = "signal_product"

    def __post_init__(self):
        base, B = as_matrix(self.base), as_matrix(self.B)
        if base.shape != B.shape:
            raise InputError(f"shape mismatch {base.shape} vs {B.shape}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "B", B)

    @property
    def dim(self):
        return self.base.shape[0]

    def __call__(self, t):
        return self.base + float(self.signal(t)) * self.B

    @property
    def sup_norm_bound(self):
        return operator_norm(self.base) + self.signal.bound * operator_norm(self.B)

    def breakpoints(self, s, t):
        return [k for k in self.signal.kinks() if s < k < t]

    def periodicity(self):
        p = self.signal.periodicity()
        if p is None or p[0] == 0.0:
            return None
        return p

    def resolution(self):
        return self.signal.scale_length()

    def sampler(self, ts):
        values = self.signal.eval(np.asarray(ts, dtype=float))
        base, B = self.base, self.B
        return lambda i: base + values[i] * B


@dataclass(frozen=True, eq=False)
class PeriodicPulseOperator(TimeVaryingOperator):
    """``A`` off the pulse, ``R`` on [kT - width, kT); period ``T``."""

    A: np.ndarray
    R: np.ndarray
    T: float
    width: float
    kind = "periodic_pulse"

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A))
        object.__setattr__(self, "R", as_matrix(self.R))
        if not 0 < self.width < self.T:
            raise ParameterError(f"need 0 < width < T, got width={self.width}, T={self.T}")

    @property
    def dim(self):
        return self.A.shape[0]

    def _on_pulse(self, t):
        phase = t - math.floor(t / self.T) * self.T
        return phase >= self.T - self.width

    def __call__(self, t):
        return self.R if self._on_pulse(t) else self.A

    @property
    def sup_norm_bound(self):
        return max(operator_norm(self.A), operator_norm(self.R))

    def breakpoints(self, s, t):
        out = []
        k = math.floor(s / self.T)
        while True:
            for c in (k * self.T - self.width, k * self.T):
                if c >= t:
                    return sorted(out)
                if c > s:
                    out.append(c)
            k += 1

    def constant_piece(self, s, t):
        if self.breakpoints(s, t):
            return None
        mid = 0.5 * (s + t)
        return ("R", self.R) if self._on_pulse(mid) else ("A", self.A)

    def periodicity(self):
        return (self.T, -math.inf)


@dataclass(frozen=True, eq=False)
class ScheduleOperator(TimeVaryingOperator):
    """A + B(t) with B(t) switching between ``Bs[k]`` at the times ``ts[k]``.

    B(t) = Bs[k] on [ts[k], ts[k+1] - 1] and the linear blend
    (ts[k+1] - t) Bs[k] + (t - ts[k+1] + 1) Bs[k+1] on [ts[k+1] - 1, ts[k+1]];
    after the last switching time B(t) stays at ``Bs[-1]``.
    """

    A: np.ndarray
    Bs: tuple
    ts: tuple
    kind = "schedule"

    def __post_init__(self):
        A = as_matrix(self.A)
        Bs = tuple(as_matrix(B) for B in self.Bs)
        ts = tuple(float(x) for x in self.ts)
        if len(Bs) != len(ts) or not Bs:
            raise InputError("need one operator per switching time")
        if any(b - a <= 1 for a, b in zip(ts[:-1], ts[1:])):
            raise ParameterError("consecutive switching times must be more than 1 apart")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Bs", Bs)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "_sums", tuple(A + B for B in Bs))

    @property
    def dim(self):
        return self.A.shape[0]

    def perturbation(self, t: float) -> np.ndarray:
        ts, Bs = self.ts, self.Bs
        k = max(0, int(np.searchsorted(ts, t, side="right")) - 1)
        if k + 1 < len(ts) and t > ts[k + 1] - 1:
            lam = t - ts[k + 1] + 1
            return (1 - lam) * Bs[k] + lam * Bs[k + 1]
        return Bs[k]

    def __call__(self, t):
        return self.A + self.perturbation(t)

    @property
    def sup_norm_bound(self):
        return operator_norm(self.A) + max(operator_norm(B) for B in self.Bs)

    def breakpoints(self, s, t):
        pts = set()
        for tk in self.ts[1:]:
            for c in (tk - 1, tk):
                if s < c < t:
                    pts.add(c)
        return sorted(pts)

    def constant_piece(self, s, t):
        if self.breakpoints(s, t):
            return None
        mid = 0.5 * (s + t)
        ts = self.ts
        k = max(0, int(np.searchsorted(ts, mid, side="right")) - 1)
        if k + 1 < len(ts) and mid > ts[k + 1] - 1:
            return None
        return (("segment", k), self._sums[k])

    def resolution(self):
        return 1.0


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass
class PropagationCache:
    """Memo of one-period maps, their binary powers and exponentials of constant pieces."""

    periods: dict = field(default_factory=dict)
    exps: dict = field(default_factory=dict)


def _norm(X: np.ndarray) -> float:
    return float(np.max(np.abs(X))) if X.size else 0.0


def _rk4_run(op, Y, a, b, n):
    h = (b - a) / n
    # stage times t_i, t_i + h/2, t_{i+1} laid out on a half-step lattice
    ts = a + 0.5 * h * np.arange(2 * n + 1)
    ts[-1] = b
    at = op.sampler(ts)
    A0 = at(0)
    for i in range(n):
        k1 = A0 @ Y
        Am = at(2 * i + 1)
        A1 = at(2 * i + 2)
        k2 = Am @ (Y + 0.5 * h * k1)
        k3 = Am @ (Y + 0.5 * h * k2)
        k4 = A1 @ (Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        A0 = A1
    return Y


def _rk4_constant_run(A, Y, a, b, n):
    h = (b - a) / n
    hA = h * A
    step = np.eye(A.shape[0], dtype=np.result_type(A, float))
    term = step
    for j in range(1, 5):
        term = term @ hA / j
        step = step + term
    return np.linalg.matrix_power(step, n) @ Y


def _piece(op, Y, a, b, tol, method, cache):
    if b <= a:
        return Y
    const = op.constant_piece(a, b)
    if const is not None and method == "auto":
        key = (const[0], round(b - a, 12))
        E = cache.exps.get(key) if cache is not None else None
        if E is None:
            E = matrix_exp(const[1] * (b - a))
            if cache is not None:
                cache.exps[key] = E
        return E @ Y
    if const is not None:
        bound, res = operator_norm(const[1]), math.inf
    else:
        bound, res = op.sup_norm_bound, op.resolution()
    return _refine(_run_factory(op, const, Y), Y, a, b, tol, bound, res, 0)


def _run_factory(op, const, Y):
    if const is not None:
        A = const[1]
        return lambda Z, a, b, n: _rk4_constant_run(A, Z, a, b, n)
    return lambda Z, a, b, n: _rk4_run(op, Z, a, b, n)


def _refine(run, Y, a, b, tol, bound, res, depth):
    # step doubling on [a, b]; a piece that needs too many steps (a corner of
    # low regularity, typically) is bisected so refinement stays local
    length = b - a
    n = max(2, int(math.ceil(length * bound / 0.5)))
    if math.isfinite(res):
        n = max(n, int(math.ceil(4.0 * length / res)))
    budget = max(8 * n, 64)
    prev = run(Y, a, b, n)
    scale_in = _norm(Y)
    while True:
        n *= 2
        cur = run(Y, a, b, n)
        diff = _norm(cur - prev)
        scale = max(_norm(cur), scale_in)
        if diff <= tol * scale or diff <= 32.0 * n * _EPS * scale:
            return cur + (cur - prev) / 15.0
        if n >= budget and depth < 40:
            mid = 0.5 * (a + b)
            Z = _refine(run, Y, a, mid, 0.5 * tol, bound, res, depth + 1)
            return _refine(run, Z, mid, b, 0.5 * tol, bound, res, depth + 1)
        if n > _MAX_STEPS:
            raise NumericError(
                f"RK4 step count exceeded {_MAX_STEPS} on [{a:.6g}, {b:.6g}]; "
                "use a larger tol or a shorter interval"
            )
        prev = cur


def _direct(op, Y, s, t, tol, method, cache):
    cuts = [s, *op.breakpoints(s, t), t]
    for a, b in zip(cuts[:-1], cuts[1:]):
        Y = _piece(op, Y, a, b, tol, method, cache)
    return Y


def _period_power(op, P, c0, k, tol, method, cache):
    key = (round(P, 15), round(c0, 15), tol, method)
    entry = cache.periods.get(key)
    if entry is None:
        ident = np.eye(op.dim)
        Phi = _direct(op, ident, c0, c0 + P, tol, method, cache)
        entry = [Phi]
        cache.periods[key] = entry
    result = None
    i = 0
    while k:
        while len(entry) <= i:
            entry.append(entry[-1] @ entry[-1])
        if k & 1:
            result = entry[i] if result is None else entry[i] @ result
        k >>= 1
        i += 1
    return result


def evolve(op: TimeVaryingOperator, Y, s: float, t: float, tol: float = 1e-10,
           method: str = "auto", cache: PropagationCache | None = None) -> np.ndarray:
    """Solve Y' = A(t) Y from Y(s) = ``Y`` to time ``t >= s``."""
    if method not in ("auto", "rk4"):
        raise InputError(f"unknown method {method!r}")
    if t < s:
        raise InputError(f"backward propagation is not supported (s={s}, t={t})")
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    Y = np.asarray(Y)
    if Y.shape[0] != op.dim:
        raise InputError(f"state has leading dimension {Y.shape[0]}, operator has dim {op.dim}")
    if cache is None:
        cache = PropagationCache()
    per = op.periodicity()
    if per is not None:
        P, start = per
        origin = 0.0 if not math.isfinite(start) else start
        lo = max(s, start)
        j = math.ceil((lo - origin) / P - 1e-9)
        c1 = origin + j * P
        k = int(math.floor((t - c1) / P + 1e-9))
        if k >= 2:
            c0 = origin if math.isfinite(start) else 0.0
            tol_p = min(tol, 1e-12)
            Y = _direct(op, Y, s, c1, tol, method, cache)
            Y = _period_power(op, P, c0, k, tol_p, method, cache) @ Y
            return _direct(op, Y, c1 + k * P, t, tol, method, cache)
    return _direct(op, Y, s, t, tol, method, cache)


def propagator(op: TimeVaryingOperator, s: float, t: float, tol: float = 1e-10,
               method: str = "auto", cache: PropagationCache | None = None) -> np.ndarray:
    """Evolution operator S(t, s) of x' = A(t) x."""
    return evolve(op, np.eye(op.dim), s, t, tol, method, cache)


def trajectory(op: TimeVaryingOperator, x0, t_grid: Sequence[float], tol: float = 1e-10,
               method: str = "auto", cache: PropagationCache | None = None) -> np.ndarray:
    """States at every grid time, starting from ``x0`` at ``t_grid[0]``.

    ``x0`` may be a vector or a ``dim x k`` block of initial vectors; the
    result has shape ``(len(t_grid),) + x0.shape``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) < 0):
        raise InputError("t_grid must be a nonempty nondecreasing sequence")
    x = np.asarray(x0, dtype=float)
    if x.shape[0] != op.dim:
        raise InputError(f"x0 has dimension {x.shape[0]}, operator has dim {op.dim}")
    cache = PropagationCache() if cache is None else cache
    out = np.empty((t_grid.size,) + x.shape)
    out[0] = x
    for i in range(1, t_grid.size):
        x = evolve(op, x, t_grid[i - 1], t_grid[i], tol, method, cache)
        out[i] = x
    return out


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityCertificate:
    """Sampled evidence for ||S(t, s)|| <= C exp(beta (t - s))."""

    C: float
    beta: float
    sample_pairs: tuple
    max_ratio: float
    verdict: str
    tol_cert: float = 1e-6
    failing_pair: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def rows(self):
        """CSV rows (s, t, norm, bound, ratio)."""
        for s, t, nrm in self.sample_pairs:
            bound = self.C * math.exp(self.beta * (t - s))
            yield (s, t, nrm, bound, nrm / bound)


def default_grid(h: float, domain: tuple[float, float],
                 offsets=(0.25, 0.5, 1.0, 2.0, 4.0)) -> list[tuple[float, float]]:
    """Pairs (s, t) with s on the h-lattice in ``domain`` and t - s in ``offsets * h``.

    Right endpoints beyond the domain are clipped to it; repeated pairs are dropped.
    """
    lo, hi = domain
    if not h > 0:
        raise ParameterError(f"h must be positive, got {h}")
    pairs = []
    n = int(math.floor((hi - lo) / h + 1e-9))
    for i in range(n + 1):
        s = lo + i * h
        for f in offsets:
            t = min(s + f * h, hi)
            if t > s and (s, t) not in pairs[-len(offsets):]:
                pairs.append((s, t))
    return pairs


def certify_bound(op: TimeVaryingOperator, C: float, beta: float, grid, tol: float = 1e-10,
                  tol_cert: float = 1e-6, method: str = "auto",
                  cache: PropagationCache | None = None) -> StabilityCertificate:
    """Check ||S(t, s)|| <= C e^{beta (t - s)} on every grid pair.

    A propagation failure stops the sweep; the certificate is then marked
    ``incomplete`` and names the failing pair.
    """
    cache = PropagationCache() if cache is None else cache
    samples = []
    worst = 0.0
    for s, t in grid:
        if t < s:
            raise InputError(f"grid pair ({s}, {t}) has t < s")
        try:
            nrm = operator_norm(propagator(op, s, t, tol, method, cache))
        except NumericError:
            return StabilityCertificate(C, beta, tuple(samples), worst, "incomplete",
                                        tol_cert, (s, t))
        samples.append((float(s), float(t), nrm))
        worst = max(worst, nrm / (C * math.exp(beta * (t - s))))
    verdict = "pass" if worst <= 1.0 + tol_cert else "fail"
    return StabilityCertificate(float(C), float(beta), tuple(samples), worst, verdict, tol_cert)


def fit_constant(cert_or_samples, beta: float) -> float:
    """Smallest C with every sampled norm <= C e^{beta (t - s)}."""
    samples = getattr(cert_or_samples, "sample_pairs", cert_or_samples)
    return max(nrm / math.exp(beta * (t - s)) for s, t, nrm in samples)


def measure_constant_bound(A, alpha: float, horizon: float, samples: int = 2001) -> float:
    """max over a uniform t-grid on [0, horizon] of ||e^{At}|| e^{-alpha t}."""
    A = as_matrix(A)
    ts = np.linspace(0.0, horizon, samples)
    E = matrix_exp(A * (ts[1] - ts[0]))
    P = np.eye(A.shape[0])
    best = 1.0
    for t in ts[1:]:
        P = E @ P
        best = max(best, operator_norm(P) * math.exp(-alpha * t))
    return best
