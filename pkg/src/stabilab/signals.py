"""Closed-form scalar signals and their averaging statistics.

A signal is an immutable expression tree over ``const``, ``cos``, ``bump``,
``scale``, ``sum`` and ``dilate``.  Every node knows how to evaluate itself
(vectorised), its antiderivative, a declared sup-norm bound, the points where
it is not smooth, and whether it is eventually periodic.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.optimize import minimize_scalar

from .errors import InputError, NumericError, ParameterError

__all__ = [
    "ScalarSignal",
    "Const",
    "Cos",
    "Bump",
    "Sum",
    "Scale",
    "Dilate",
    "parse_signal",
    "MeanValueEstimate",
    "Smallness",
    "adaptive_quad",
    "mean_value",
    "default_a_grid",
    "T0_estimate",
    "integral_smallness",
]


class ScalarSignal:
    """Base class.  Subclasses are frozen dataclasses."""

    def __call__(self, t):
        return self.eval(np.asarray(t, dtype=float))

    def eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def antiderivative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def integral(self, t1, t2):
        return self.antiderivative(np.asarray(t2, float)) - self.antiderivative(np.asarray(t1, float))

    @property
    def bound(self) -> float:
        raise NotImplementedError

    def kinks(self) -> list[float]:
        """Points where the signal is not analytic."""
        return []

    def scale_length(self) -> float:
        """Length over which the signal is well resolved by one quadrature panel."""
        return math.inf

    def periodicity(self):
        """``(period, start)`` if periodic on ``[start, inf)``; ``period=0`` means any period.

        Returns ``None`` for signals that are not eventually periodic.
        """
        return None

    def expr(self) -> str:
        raise NotImplementedError

    def __add__(self, other: "ScalarSignal") -> "ScalarSignal":
        return Sum(self, other)

    def __mul__(self, c: float) -> "ScalarSignal":
        return Scale(float(c), self)

    __rmul__ = __mul__

    def __str__(self):
        return self.expr()


@dataclass(frozen=True, eq=True)
class Const(ScalarSignal):
    c: float

    def eval(self, t):
        return np.full(np.shape(t), float(self.c))

    def antiderivative(self, t):
        return self.c * np.asarray(t, float)

    @property
    def bound(self):
        return abs(self.c)

    def periodicity(self):
        return (0.0, -math.inf)

    def expr(self):
        return f"const({self.c!r})"


@dataclass(frozen=True, eq=True)
class Cos(ScalarSignal):
    """cos(freq * t + phase)."""

    freq: float = 1.0
    phase: float = 0.0

    def eval(self, t):
        return np.cos(self.freq * t + self.phase)

    def antiderivative(self, t):
        t = np.asarray(t, float)
        if self.freq == 0:
            return math.cos(self.phase) * t
        return (np.sin(self.freq * t + self.phase) - math.sin(self.phase)) / self.freq

    @property
    def bound(self):
        return 1.0

    def scale_length(self):
        return math.inf if self.freq == 0 else 0.5 * math.pi / abs(self.freq)

    def periodicity(self):
        if self.freq == 0:
            return (0.0, -math.inf)
        return (2.0 * math.pi / abs(self.freq), -math.inf)

    def expr(self):
        return f"cos({self.freq!r},{self.phase!r})"


def _bump_primitive(t):
    # int_{-1}^{t} sqrt(1 - u^2) du, clipped to the support [-1, 1]
    u = np.clip(t, -1.0, 1.0)
    return 0.5 * (u * np.sqrt(1.0 - u * u) + np.arcsin(u)) + 0.25 * math.pi


@dataclass(frozen=True, eq=True)
class Bump(ScalarSignal):
    """sqrt(1 - t^2) on [-1, 1], zero elsewhere; total mass pi/2."""

    def eval(self, t):
        inside = np.abs(t) <= 1.0
        return np.where(inside, np.sqrt(np.clip(1.0 - t * t, 0.0, None)), 0.0)

    def antiderivative(self, t):
        return _bump_primitive(np.asarray(t, float)) - 0.25 * math.pi

    @property
    def bound(self):
        return 1.0

    def kinks(self):
        return [-1.0, 1.0]

    def scale_length(self):
        return 0.5

    def periodicity(self):
        return (0.0, 1.0)

    def expr(self):
        return "bump"


@dataclass(frozen=True, eq=True)
class Sum(ScalarSignal):
    left: ScalarSignal
    right: ScalarSignal

    def eval(self, t):
        return self.left.eval(t) + self.right.eval(t)

    def antiderivative(self, t):
        return self.left.antiderivative(t) + self.right.antiderivative(t)

    @property
    def bound(self):
        return self.left.bound + self.right.bound

    def kinks(self):
        return sorted(set(self.left.kinks()) | set(self.right.kinks()))

    def scale_length(self):
        return min(self.left.scale_length(), self.right.scale_length())

    def periodicity(self):
        a, b = self.left.periodicity(), self.right.periodicity()
        if a is None or b is None:
            return None
        start = max(a[1], b[1])
        if a[0] == 0.0:
            return (b[0], start)
        if b[0] == 0.0:
            return (a[0], start)
        ratio = a[0] / b[0]
        q = round(ratio)
        if q >= 1 and abs(ratio - q) <= 1e-12 * ratio:
            return (a[0], start)
        q = round(1 / ratio)
        if q >= 1 and abs(1 / ratio - q) <= 1e-12 / ratio:
            return (b[0], start)
        return None

    def expr(self):
        return f"sum({self.left.expr()},{self.right.expr()})"


@dataclass(frozen=True, eq=True)
class Scale(ScalarSignal):
    c: float
    inner: ScalarSignal

    def eval(self, t):
        return self.c * self.inner.eval(t)

    def antiderivative(self, t):
        return self.c * self.inner.antiderivative(t)

    @property
    def bound(self):
        return abs(self.c) * self.inner.bound

    def kinks(self):
        return self.inner.kinks()

    def scale_length(self):
        return self.inner.scale_length()

    def periodicity(self):
        return self.inner.periodicity()

    def expr(self):
        return f"scale({self.c!r},{self.inner.expr()})"


@dataclass(frozen=True, eq=True)
class Dilate(ScalarSignal):
    """t -> inner(omega * t) for omega > 0."""

    omega: float
    inner: ScalarSignal

    def __post_init__(self):
        if not self.omega > 0:
            raise ParameterError(f"dilation factor must be positive, got {self.omega}")

    def eval(self, t):
        return self.inner.eval(self.omega * t)

    def antiderivative(self, t):
        return self.inner.antiderivative(self.omega * np.asarray(t, float)) / self.omega

    @property
    def bound(self):
        return self.inner.bound

    def kinks(self):
        return [k / self.omega for k in self.inner.kinks()]

    def scale_length(self):
        return self.inner.scale_length() / self.omega

    def periodicity(self):
        p = self.inner.periodicity()
        if p is None:
            return None
        return (p[0] / self.omega, p[1] / self.omega)

    def expr(self):
        return f"dilate({self.omega!r},{self.inner.expr()})"


# ---------------------------------------------------------------------------
# grammar: const(c) | cos(f,p) | bump | scale(c,e) | sum(e,e) | dilate(w,e)
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[a-z]+)|(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?(?:pi|inf))|(?P<punct>[(),]))")


def _tokens(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise InputError(f"cannot parse signal at {text[pos:]!r}")
        if m.group("num") is not None:
            num = m.group("num")
            out.append(("num", float(num.replace("pi", repr(math.pi)))))
        elif m.group("name") is not None:
            name = m.group("name")
            out.append(("num", math.pi) if name == "pi" else ("name", name))
        else:
            out.append(("punct", m.group("punct")))
        pos = m.end()
    return out


def parse_signal(text: str) -> ScalarSignal:
    """Parse the config-file expression grammar into a signal tree."""
    toks = _tokens(text)
    pos = 0

    def expect(kind, value=None):
        nonlocal pos
        if pos >= len(toks):
            raise InputError(f"unexpected end of signal expression {text!r}")
        k, v = toks[pos]
        if k != kind or (value is not None and v != value):
            raise InputError(f"unexpected token {v!r} in signal expression {text!r}")
        pos += 1
        return v

    def expr():
        name = expect("name")
        if name == "bump":
            return Bump()
        expect("punct", "(")
        if name == "const":
            node = Const(expect("num"))
        elif name == "cos":
            f = expect("num")
            expect("punct", ",")
            node = Cos(f, expect("num"))
        elif name == "scale":
            c = expect("num")
            expect("punct", ",")
            node = Scale(c, expr())
        elif name == "sum":
            a = expr()
            expect("punct", ",")
            node = Sum(a, expr())
        elif name == "dilate":
            w = expect("num")
            expect("punct", ",")
            node = Dilate(w, expr())
        else:
            raise InputError(f"unknown signal primitive {name!r}")
        expect("punct", ")")
        return node

    node = expr()
    if pos != len(toks):
        raise InputError(f"trailing input in signal expression {text!r}")
    return node


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature (vectorised over panels)
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def adaptive_quad(f, a: float, b: float, tol: float = 1e-10, breakpoints=(),
                  panel: float = math.inf, max_panels: int = 2_000_000) -> tuple[float, float]:
    """Integrate a vectorised ``f`` over ``[a, b]``; returns ``(value, error_estimate)``.

    The interval is first cut at ``breakpoints`` and into panels no longer
    than ``panel``; panels whose Gauss/Kronrod difference exceeds their share
    of ``tol`` are bisected until the total estimate is below ``tol``.
    """
    if b < a:
        v, e = adaptive_quad(f, b, a, tol, breakpoints, panel, max_panels)
        return -v, e
    if b == a:
        return 0.0, 0.0
    cuts = sorted({a, b} | {p for p in breakpoints if a < p < b})
    edges = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = 1 if not math.isfinite(panel) else max(1, int(math.ceil((hi - lo) / panel)))
        edges.append(np.linspace(lo, hi, n + 1))
    lo = np.concatenate([e[:-1] for e in edges])
    hi = np.concatenate([e[1:] for e in edges])
    total_len = b - a
    done_val: list[float] = []
    done_err = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        fx = np.asarray(f(x), dtype=float)
        k = half * (fx @ _KRONROD_W)
        g = half * (fx @ _GAUSS_W)
        err = np.abs(k - g)
        ok = err <= tol * (hi - lo) / total_len
        done_val.extend(k[ok].tolist())
        done_err += float(err[ok].sum())
        if ok.all():
            return math.fsum(done_val), done_err
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if lo.size > max_panels:
            break
    raise NumericError(f"adaptive_quad: no convergence on [{a}, {b}] to tol {tol:g}")


def _signal_quad(b: ScalarSignal, t1: float, t2: float, tol: float) -> float:
    panel = b.scale_length()
    value, _ = adaptive_quad(b.eval, t1, t2, tol=tol, breakpoints=b.kinks(), panel=panel)
    return value


# ---------------------------------------------------------------------------
# mean value, T0, integral smallness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeanValueEstimate:
    value: float
    T_used: float
    a_samples: int
    dispersion: float


def default_a_grid(b: ScalarSignal, n_spread: int = 64, span: float | None = None) -> np.ndarray:
    """Window starts: ``n_spread`` points spread over ``[-span, span]`` plus
    16 adversarial starts around the kinks (bump support edges)."""
    scale = b.scale_length()
    if span is None:
        span = 32.0 * (4.0 * scale if math.isfinite(scale) else 1.0)
    spread = np.linspace(-span, span, n_spread)
    kinks = b.kinks()
    if kinks:
        width = max(kinks) - min(kinks) or 1.0
        offsets = np.array([-1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5]) * width
        edges = [min(kinks), max(kinks)]
        adv = np.concatenate([e + offsets for e in edges])
    else:
        adv = np.array([])
    return np.concatenate([spread, adv])


def mean_value(b: ScalarSignal, T: float, a_grid=None, tol: float = 1e-10) -> MeanValueEstimate:
    """Windowed averages (1/T) int_a^{a+T} b over the a-grid, by adaptive quadrature.

    ``tol`` bounds the absolute error of each windowed average.
    """
    if not T > 0:
        raise ParameterError(f"window length T must be positive, got {T}")
    a_grid = default_a_grid(b) if a_grid is None else np.asarray(a_grid, dtype=float)
    if a_grid.size == 0:
        raise ParameterError("a_grid must be nonempty")
    avgs = np.array([_signal_quad(b, a, a + T, tol * T) / T for a in a_grid])
    value = float(np.mean(avgs))
    return MeanValueEstimate(value, float(T), int(a_grid.size), float(np.max(np.abs(avgs - value))))


def _window_sup(b: ScalarSignal, T: np.ndarray, a_grid: np.ndarray) -> np.ndarray:
    # sup over starts of |(1/T) int_a^{a+T} b|, start- and end-anchored at kinks
    F = b.antiderivative
    starts = a_grid[None, :]
    vals = np.abs(F(starts + T[:, None]) - F(starts))
    kinks = np.array(b.kinks(), dtype=float)
    if kinks.size:
        ends = kinks[None, :]
        vals = np.concatenate([vals, np.abs(F(ends) - F(ends - T[:, None]))], axis=1)
    return vals.max(axis=1) / T


def T0_estimate(b: ScalarSignal, eps: float, a_grid=None, T_min: float | None = None,
                T_cap: float = 1e6, ratio: float = 1.002, check_mean: bool = True) -> float:
    """Smallest grid T with sup_a |(1/T') int_a^{a+T'} b| <= eps for every sampled T' >= T.

    The T'-grid is geometric from ``T_min`` to ``T_cap`` with the given ratio,
    so the answer is rounded up to the next grid value.  Window integrals use
    the closed-form antiderivative.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    a_grid = default_a_grid(b) if a_grid is None else np.asarray(a_grid, dtype=float)
    if check_mean:
        T_check = min(T_cap, 100.0 * max(1.0, b.bound) / eps)
        est = mean_value(b, T_check, a_grid[:: max(1, a_grid.size // 16)])
        if abs(est.value) >= eps / 10:
            raise NumericError(
                f"signal is not zero-mean at tolerance: mean {est.value:.3e} over T={T_check:g}"
            )
    if T_min is None:
        sl = b.scale_length()
        T_min = min(1.0, sl) if math.isfinite(sl) else 1e-3
    n = int(math.ceil(math.log(T_cap / T_min) / math.log(ratio))) + 1
    T = T_min * ratio ** np.arange(n)
    sup = np.empty(n)
    chunk = 4096
    for i in range(0, n, chunk):
        sup[i:i + chunk] = _window_sup(b, T[i:i + chunk], a_grid)
    bad = np.nonzero(sup > eps)[0]
    if bad.size == 0:
        return float(T[0])
    last = int(bad[-1])
    if last == n - 1:
        raise NumericError(
            f"signal is not zero-mean at tolerance {eps:g}: window averages exceed it up to T={T_cap:g}"
        )
    return float(T[last + 1])


class Smallness(NamedTuple):
    value: float
    error_bound: float


def integral_smallness(b: ScalarSignal, h: float, domain: tuple[float, float],
                       step: float | None = None, polish: bool = True) -> Smallness:
    """sup |int_{t1}^{t2} b| over t1 < t2 in ``domain`` with t2 - t1 <= h.

    The antiderivative is tabulated with spacing ``step`` (at most h/1000);
    the supremum over each length-h window is the max minus the min of the
    table there.  ``polish`` refines the extremal pair off the grid.
    ``error_bound`` is ``bound * step``.
    """
    lo, hi = map(float, domain)
    if not h > 0:
        raise ParameterError(f"h must be positive, got {h}")
    if hi - lo < h:
        raise ParameterError(f"domain length {hi - lo} is shorter than h={h}")
    if step is None:
        step = h / 1000.0
        sl = b.scale_length()
        if math.isfinite(sl):
            step = min(step, sl / 64.0)
    step = min(step, h / 1000.0)
    n = int(math.ceil((hi - lo) / step))
    if n > 50_000_000:
        raise ParameterError(f"antiderivative table would need {n} samples; shorten the domain")
    t = np.linspace(lo, hi, n + 1)
    F = b.antiderivative(t)
    w = max(1, int(math.floor(h / (t[1] - t[0]) + 1e-9)))
    size = w + 1
    # windows [i, i+w]; filters are centred, so shift by half a window
    fmax = maximum_filter1d(F, size=size, origin=-(size // 2), mode="nearest")
    fmin = minimum_filter1d(F, size=size, origin=-(size // 2), mode="nearest")
    spread = fmax - fmin
    valid = spread[: max(1, n + 1 - w)]
    i = int(np.argmax(valid))
    value = float(valid[i])
    if polish and value > 0:
        seg = F[i:i + size]
        jmax, jmin = i + int(np.argmax(seg)), i + int(np.argmin(seg))
        value = max(value, _polish_pair(b, t, jmax, jmin, h, lo, hi))
    return Smallness(value, float(b.bound * (t[1] - t[0])))


def _polish_pair(b, t, jmax, jmin, h, lo, hi) -> float:
    dt = t[1] - t[0]
    F = b.antiderivative

    def local(j, sign):
        a, c = max(lo, t[j] - dt), min(hi, t[j] + dt)
        r = minimize_scalar(lambda x: -sign * float(F(np.asarray(x))), bounds=(a, c),
                            method="bounded", options={"xatol": 1e-12})
        return float(r.x)

    xmax, xmin = local(jmax, 1.0), local(jmin, -1.0)
    if abs(xmax - xmin) > h:
        return 0.0
    return float(abs(F(np.asarray(xmax)) - F(np.asarray(xmin))))
