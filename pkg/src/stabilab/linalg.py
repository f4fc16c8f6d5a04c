"""Dense linear-algebra kernels.

Every operator in the package is a dense ``numpy`` array after truncation to
its top-left ``N x N`` corner.  The functions here are pure; they never modify
their arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, InputError, NumericError

__all__ = [
    "Contour",
    "as_matrix",
    "operator_norm",
    "spectral_radius",
    "eigenvalues",
    "matrix_exp",
    "matrix_log",
    "riesz_projection",
    "block_partition",
    "matrix_to_text",
    "matrix_from_text",
]


def as_matrix(A) -> np.ndarray:
    """Validate and return ``A`` as a square 2-D array (no copy if possible)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InputError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.number):
        raise InputError(f"matrix has non-numeric dtype {A.dtype}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    if np.issubdtype(A.dtype, np.integer) or A.dtype == bool:
        A = A.astype(float)
    return A


def operator_norm(A) -> float:
    """Spectral norm (largest singular value)."""
    A = as_matrix(A)
    if not A.any():
        return 0.0
    return float(sla.svdvals(A, check_finite=False)[0])


def _triangular_diagonal(A: np.ndarray):
    if np.array_equal(A, np.tril(A)) or np.array_equal(A, np.triu(A)):
        return np.diag(A).copy()
    return None


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues of ``A``; triangular inputs are read off the diagonal."""
    A = as_matrix(A)
    diag = _triangular_diagonal(A)
    if diag is not None:
        return diag.astype(complex)
    try:
        return sla.eigvals(A, check_finite=False)
    except sla.LinAlgError as exc:
        raise NumericError(
            f"eigenvalue solver did not converge (dim={A.shape[0]}, "
            f"norm={operator_norm(A):.3e}): {exc}"
        ) from exc


def spectral_radius(A) -> float:
    return float(np.max(np.abs(eigenvalues(A))))


# ---------------------------------------------------------------------------
# matrix exponential: scaling and squaring with diagonal Pade approximants
# ---------------------------------------------------------------------------

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
# largest 1-norm for which the degree-m approximant has backward error <= 2^-53
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(A: np.ndarray, m: int):
    b = _PADE_COEFFS[m]
    ident = np.eye(A.shape[0], dtype=A.dtype)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
        return U, V
    powers = [ident, A2]
    for _ in range((m - 1) // 2 - 1):
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * j + 1] * powers[j] for j in range(len(powers)))
    V = sum(b[2 * j] * powers[j] for j in range(len(powers)))
    return U, V


def matrix_exp(A) -> np.ndarray:
    """``e^A`` by scaling and squaring with a Pade kernel of degree 3..13."""
    A = as_matrix(A)
    n = A.shape[0]
    norm1 = float(np.max(np.sum(np.abs(A), axis=0)))
    if norm1 == 0.0:
        return np.eye(n, dtype=A.dtype)
    if norm1 > 1e6:
        raise NumericError(f"matrix_exp: 1-norm {norm1:.3e} too large, result would overflow")
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _PADE_THETA[m]:
            break
    else:
        m = 13
        s = max(0, int(math.ceil(math.log2(norm1 / _PADE_THETA[13]))))
    As = A / (2.0 ** s) if s else A
    U, V = _pade_uv(As, m)
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    if not np.all(np.isfinite(X)):
        raise NumericError(f"matrix_exp overflowed (1-norm {norm1:.3e})")
    return X


# ---------------------------------------------------------------------------
# principal matrix logarithm
# ---------------------------------------------------------------------------

def _check_branch(eigs: np.ndarray) -> None:
    for lam in eigs:
        if abs(lam.imag) <= 1e-14 * max(1.0, abs(lam)) and lam.real <= 0.0:
            raise DomainError(
                f"matrix_log: eigenvalue {complex(lam)!r} lies on the branch cut (-inf, 0]"
            )


def _subdiagonal_offset(D: np.ndarray):
    """Return k if the only nonzero entries of D lie on diagonal offset k."""
    rows, cols = np.nonzero(D)
    if rows.size == 0:
        return None
    offsets = np.unique(cols - rows)
    if offsets.size == 1 and offsets[0] != 0:
        return int(offsets[0])
    return None


def _nilpotent_powers(D: np.ndarray):
    """Yield D, D^2, ... until the power vanishes exactly.

    A single-diagonal D (a weighted shift) is powered through products of its
    weights in O(n) per power instead of a dense product.
    """
    n = D.shape[0]
    k = _subdiagonal_offset(D)
    if k is None:
        P = D.copy()
        for _ in range(n):
            if not P.any():
                return
            yield P
            P = P @ D
        return
    w = np.diagonal(D, offset=k).copy()
    run = w.copy()
    j = 1
    while j * abs(k) < n and run.size and run.any():
        P = np.zeros_like(D)
        idx = np.arange(run.size)
        if k > 0:
            P[idx, idx + j * k] = run
        else:
            P[idx - j * k, idx] = run
        yield P
        j += 1
        step = abs(k)
        run = run[:-step] * w[(j - 1) * step:]
    return


def _log_unipotent_series(A: np.ndarray, c: complex) -> np.ndarray:
    """log(c(I - D)) = log(c) I - sum_j D^j / j for strictly triangular D."""
    n = A.shape[0]
    dtype = np.result_type(A.dtype, np.asarray(c).dtype, float)
    D = np.eye(n, dtype=dtype) - A.astype(dtype) / c
    np.fill_diagonal(D, 0.0)
    out = np.zeros((n, n), dtype=dtype)
    for j, Dj in enumerate(_nilpotent_powers(D), start=1):
        out -= Dj / j
    logc = np.log(c) if np.iscomplexobj(c) or c < 0 else math.log(c)
    out += logc * np.eye(n, dtype=np.result_type(dtype, np.asarray(logc).dtype))
    return out


def _sqrtm_upper(T: np.ndarray) -> np.ndarray:
    """Principal square root of an upper-triangular matrix, column by column."""
    n = T.shape[0]
    R = np.zeros_like(T)
    d = np.sqrt(np.diag(T))
    R[np.arange(n), np.arange(n)] = d
    for j in range(1, n):
        rhs = T[:j, j]
        Mj = R[:j, :j] + d[j] * np.eye(j, dtype=T.dtype)
        R[:j, j] = sla.solve_triangular(Mj, rhs, lower=False, check_finite=False)
    return R


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _log1p_pade_upper(X: np.ndarray) -> np.ndarray:
    """log(I + X) for upper-triangular X with small norm.

    Gauss-Legendre quadrature of log(1+x) = int_0^1 x / (1 + s x) ds, which is
    the diagonal Pade approximant of degree 10.
    """
    n = X.shape[0]
    ident = np.eye(n, dtype=X.dtype)
    out = np.zeros_like(X)
    for s, w in zip(_GL_NODES, _GL_WEIGHTS):
        out += w * sla.solve_triangular(ident + s * X, X, lower=False, check_finite=False)
    return out


def _log_inverse_scaling_squaring(A: np.ndarray) -> np.ndarray:
    T, Z = sla.schur(A.astype(complex), output="complex", check_finite=False)
    _check_branch(np.diag(T))
    n = T.shape[0]
    ident = np.eye(n, dtype=complex)
    s = 0
    while np.max(np.sum(np.abs(T - ident), axis=0)) > 0.25:
        T = _sqrtm_upper(T)
        s += 1
        if s > 64:
            raise NumericError("matrix_log: square-root iteration did not reduce the norm")
    L = (2.0 ** s) * _log1p_pade_upper(T - ident)
    out = Z @ L @ Z.conj().T
    return out


def matrix_log(A) -> np.ndarray:
    """Principal logarithm.

    Triangular matrices with a constant diagonal ``c`` are handled exactly by
    the finite series ``log(c) I - sum D^j / j`` with ``D = I - A/c``
    nilpotent; everything else goes through complex Schur form and inverse
    scaling and squaring.  Real input with real logarithm returns a real array.
    """
    A = as_matrix(A)
    diag = _triangular_diagonal(A)
    if diag is not None:
        _check_branch(diag.astype(complex))
        if np.all(diag == diag[0]):
            c = diag[0]
            if np.isrealobj(A) and c > 0:
                return _log_unipotent_series(A, float(c)).real
            return _log_unipotent_series(A, complex(c))
    out = _log_inverse_scaling_squaring(A)
    if np.isrealobj(A):
        if np.max(np.abs(out.imag)) <= 1e-12 * max(1.0, np.max(np.abs(out.real))):
            return out.real.copy()
    return out


# ---------------------------------------------------------------------------
# Riesz spectral projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Contour:
    """Positively oriented circle used as the integration path."""

    center: complex
    radius: float
    nodes: int = 256

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError(f"contour radius must be positive, got {self.radius}")
        if self.nodes < 8:
            raise InputError(f"contour needs at least 8 nodes, got {self.nodes}")

    def points(self, nodes: int | None = None):
        n = self.nodes if nodes is None else nodes
        theta = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * theta)


def _trapezoid_projection(A: np.ndarray, gamma: Contour, nodes: int) -> np.ndarray:
    n = A.shape[0]
    ident = np.eye(n)
    P = np.zeros((n, n), dtype=complex)
    for z in gamma.points(nodes):
        # d(lambda) = i (z - c) d(theta); the 1/(2 pi i) and 2 pi/n cancel to 1/n
        P += (z - gamma.center) * np.linalg.solve(z * ident - A, ident)
    return P / nodes


def riesz_projection(A, gamma: Contour, check_tol: float = 1e-9) -> np.ndarray:
    """Spectral projection onto the eigenvalues enclosed by ``gamma``.

    Trapezoidal rule for ``(1/2 pi i) \\oint (z I - A)^{-1} dz`` on the circle.
    The result at ``gamma.nodes`` is compared with twice as many nodes; a
    difference above ``check_tol`` raises :class:`NumericError`.
    """
    A = as_matrix(A)
    eigs = eigenvalues(A)
    dist = np.abs(np.abs(eigs - gamma.center) - gamma.radius)
    if np.min(dist) <= 1e-8:
        bad = eigs[int(np.argmin(dist))]
        raise DomainError(f"riesz_projection: eigenvalue {complex(bad)!r} lies on the contour")
    P = _trapezoid_projection(A, gamma, gamma.nodes)
    P2 = _trapezoid_projection(A, gamma, 2 * gamma.nodes)
    diff = float(np.max(np.abs(P2 - P)))
    if diff > check_tol:
        raise NumericError(
            f"riesz_projection not converged: node doubling changed result by {diff:.2e}"
        )
    if np.isrealobj(A) and np.isreal(gamma.center):
        return P2.real.copy()
    return P2


# ---------------------------------------------------------------------------
# structure helpers
# ---------------------------------------------------------------------------

def block_partition(A) -> list[tuple[int, int]]:
    """Split indices into consecutive diagonal blocks that do not interact.

    Returns ``[(start, stop), ...]`` such that ``A`` is block diagonal with
    those blocks (exact zeros outside them).
    """
    A = as_matrix(A)
    n = A.shape[0]
    nz = A != 0
    rows, cols = np.nonzero(nz)
    # reach[i]: furthest index coupled to anything at or before i
    reach = np.arange(n)
    if rows.size:
        far = np.maximum(rows, cols)
        near = np.minimum(rows, cols)
        np.maximum.at(reach, near, far)
    reach = np.maximum.accumulate(reach)
    blocks = []
    start = 0
    for i in range(n):
        if reach[i] == i:
            blocks.append((start, i + 1))
            start = i + 1
    return blocks


def _fmt_entry(z) -> str:
    z = complex(z)
    return f"{z.real!r}{'+' if z.imag >= 0 or math.isnan(z.imag) else '-'}{abs(z.imag)!r}i"


def matrix_to_text(A) -> str:
    """Row-major dense text dump, one row per line, entries as ``re+imi``."""
    A = as_matrix(A)
    return "\n".join(",".join(_fmt_entry(z) for z in row) for row in A) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = []
    for line in text.strip().splitlines():
        row = []
        for tok in line.split(","):
            tok = tok.strip()
            if not tok.endswith("i"):
                raise InputError(f"bad matrix entry {tok!r}")
            row.append(complex(tok[:-1] + "j"))
        rows.append(row)
    A = np.array(rows, dtype=complex)
    if np.all(A.imag == 0):
        A = A.real.copy()
    return as_matrix(A)
