"""A two-dimensional periodic pulse that stabilises an unstable saddle.

Off the pulse the system is x' = diag(alpha, -beta) x, which is unstable.
During the last ``width`` units of every period T the generator is replaced
by the rotation R = [[0, pi/(2 width)], [-pi/(2 width), 0]], whose flow over
the pulse is a quarter turn swapping the expanding and contracting axes.
The monodromy is e^{R width} e^{A (T - width)} and both multipliers have
modulus exp((alpha - beta)(T - width) / 2) < 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ParameterError
from .evolution import PeriodicPulseOperator, PropagationCache, propagator
from .linalg import eigenvalues

__all__ = [
    "FloquetParams",
    "SweepRow",
    "rotation_generator",
    "pulse_operator",
    "pulse_perturbation",
    "monodromy_closed_form",
    "multipliers",
    "numeric_monodromy",
    "numeric_multipliers",
    "sweep",
    "default_sweep_grid",
    "SWEEP_COLUMNS",
    "sweep_svg",
]


@dataclass(frozen=True)
class FloquetParams:
    alpha_f: float
    beta_f: float
    T: float
    delta_p: float

    def __post_init__(self):
        if not 0 < self.alpha_f < self.beta_f:
            raise ParameterError(f"need 0 < alpha < beta, got {self.alpha_f}, {self.beta_f}")
        if not 0 < self.delta_p < self.T:
            raise ParameterError(f"need 0 < width < T, got {self.delta_p}, {self.T}")

    @property
    def A(self) -> np.ndarray:
        return np.diag([self.alpha_f, -self.beta_f])

    @property
    def decay_exponent(self) -> float:
        """(alpha - beta)(T - width), the log of the multiplier product."""
        return (self.alpha_f - self.beta_f) * (self.T - self.delta_p)


def rotation_generator(width: float) -> np.ndarray:
    w = math.pi / (2.0 * width)
    return np.array([[0.0, w], [-w, 0.0]])


def pulse_operator(p: FloquetParams) -> PeriodicPulseOperator:
    return PeriodicPulseOperator(p.A, rotation_generator(p.delta_p), p.T, p.delta_p)


def pulse_perturbation(p: FloquetParams, t: float) -> np.ndarray:
    """D(t) = R - A on the pulse and 0 elsewhere."""
    op = pulse_operator(p)
    return op(t) - p.A


def monodromy_closed_form(p: FloquetParams) -> np.ndarray:
    """[[0, e^{-beta (T - w)}], [-e^{alpha (T - w)}, 0]]."""
    s = p.T - p.delta_p
    return np.array([[0.0, math.exp(-p.beta_f * s)], [-math.exp(p.alpha_f * s), 0.0]])


def multipliers(p: FloquetParams) -> tuple[complex, complex]:
    """Roots of lambda^2 + e^{(alpha - beta)(T - w)}: +-i e^{(alpha - beta)(T - w)/2}."""
    r = math.exp(0.5 * p.decay_exponent)
    return (1j * r, -1j * r)


def numeric_monodromy(p: FloquetParams, tol: float = 1e-12, method: str = "rk4",
                      cache: PropagationCache | None = None) -> np.ndarray:
    """One-period map obtained by integrating the pulse system from 0 to T.

    ``method="rk4"`` integrates even the constant stretches with Runge-Kutta,
    so the comparison with the closed form does not reuse the matrix exponential.
    """
    return propagator(pulse_operator(p), 0.0, p.T, tol=tol, method=method, cache=cache)


def numeric_multipliers(Y: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real 2 x 2 monodromy.

    When the discriminant tr^2 - 4 det is negative the eigenvalues form a
    conjugate pair of modulus exactly sqrt(det); that modulus is computed
    from the determinant, which is far better conditioned than the
    eigenvalue solver on the strongly graded anti-diagonal monodromy.
    """
    Y = np.asarray(Y, dtype=float)
    eig = eigenvalues(Y)
    tr, det = float(np.trace(Y)), float(np.linalg.det(Y))
    if tr * tr < 4.0 * det:
        r = math.sqrt(det)
        eig = np.array([x / abs(x) * r for x in eig])
    return eig


class SweepRow(NamedTuple):
    alpha: float
    beta: float
    T: float
    delta: float
    modulus_closed: float
    modulus_numeric: float
    rel_err: float


SWEEP_COLUMNS = ("alpha", "beta", "T", "delta", "modulus_closed", "modulus_numeric", "rel_err")


def default_sweep_grid() -> list[FloquetParams]:
    grid = []
    for a in (0.5, 1.0):
        for b in (1.0, 2.0, 3.0):
            for T in (2.0, 5.0, 10.0):
                for d in (0.5, 1.0):
                    if a < b and d < T:
                        grid.append(FloquetParams(a, b, T, d))
    return grid


def _rel_err(X, Y) -> float:
    return float(np.max(np.abs(X - Y)) / np.max(np.abs(Y)))


def sweep(grid: Iterable[FloquetParams], tol: float = 1e-12) -> list[SweepRow]:
    """Closed-form versus integrated monodromy for each parameter set.

    ``rel_err`` is the entrywise max error of the monodromy relative to its
    largest entry.
    """
    rows = []
    for p in grid:
        Yc = monodromy_closed_form(p)
        Yn = numeric_monodromy(p, tol=tol)
        mc = abs(multipliers(p)[0])
        mn = float(np.max(np.abs(numeric_multipliers(Yn))))
        rows.append(SweepRow(p.alpha_f, p.beta_f, p.T, p.delta_p, mc, mn, _rel_err(Yn, Yc)))
    return rows


def sweep_svg(rows: list[SweepRow], width: int = 480, height: int = 320) -> str:
    """Minimal SVG scatter of log10 |lambda| against T (closed form)."""
    xs = [r.T for r in rows]
    ys = [math.log10(r.modulus_closed) for r in rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = lambda x: 40 + (width - 60) * (x - x0) / ((x1 - x0) or 1)  # noqa: E731
    sy = lambda y: height - 30 - (height - 50) * (y - y0) / ((y1 - y0) or 1)  # noqa: E731
    dots = "".join(
        f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3"/>' for x, y in zip(xs, ys)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<text x="10" y="15" font-size="12">log10 |multiplier| vs T</text>'
        f'<line x1="40" y1="{height - 30}" x2="{width - 20}" y2="{height - 30}" stroke="black"/>'
        f'<line x1="40" y1="20" x2="40" y2="{height - 30}" stroke="black"/>'
        f'{dots}</svg>\n'
    )
