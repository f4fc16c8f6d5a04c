"""Weighted shifts, the Kakutani ruler sequence and the Jordan-block operators.

Weights are 1-indexed as in the canonical basis: ``weights[n-1]`` is the
weight alpha_n that sends e_n to alpha_n e_{n+1}.  An ``N``-dimensional
truncation carries ``N - 1`` weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, ParameterError

__all__ = [
    "WeightSequence",
    "PowerNorm",
    "NilpotencyIndex",
    "ruler_level",
    "kakutani_weights",
    "mask_Lm",
    "without_level",
    "shift_matrix",
    "power_norm_by_formula",
    "nilpotency_index",
    "jordan_block_L",
    "jordan_shift",
    "log_series_bound",
]


def ruler_level(n):
    """Level m with n = 2^(m-1) (2l + 1), i.e. the 2-adic valuation plus one."""
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 1):
        raise InputError("ruler_level is defined for n >= 1")
    low = n & -n
    return np.log2(low).astype(np.int64) + 1


@dataclass(frozen=True)
class WeightSequence:
    weights: np.ndarray
    provenance: str = "explicit"
    M: float | None = None
    K: float | None = None
    level: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise InputError("weights must be one-dimensional")
        if not np.all(np.isfinite(w)):
            raise InputError("weights must be finite")
        if self.provenance not in ("explicit", "kakutani", "masked", "complement"):
            raise InputError(f"unknown provenance {self.provenance!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def N(self) -> int:
        return self.weights.size + 1

    def matrix(self) -> np.ndarray:
        return shift_matrix(self)

    def extended(self, N: int) -> "WeightSequence | None":
        """Regenerate the same rule at a larger truncation, if it is a rule."""
        if self.provenance == "explicit":
            return None
        base = kakutani_weights(self.M, self.K, N)
        if self.provenance == "kakutani":
            return base
        if self.provenance == "masked":
            return mask_Lm(base, self.level)
        return without_level(base, self.level)

    def to_csv(self) -> str:
        return "weight\n" + "".join(f"{float(x)!r}\n" for x in self.weights)


def kakutani_weights(M: float, K: float, N: int) -> WeightSequence:
    """Ruler weights alpha_n = eps_m at n = 2^(m-1)(2l+1), eps_m = M / K^(m-1)."""
    if not M > 0:
        raise ParameterError(f"M must be positive, got {M}")
    if not K > 1:
        raise ParameterError(f"K must exceed 1, got {K}")
    if N < 2:
        raise ParameterError(f"N must be at least 2, got {N}")
    levels = ruler_level(np.arange(1, N))
    w = M / np.power(float(K), levels - 1)
    return WeightSequence(w, "kakutani", float(M), float(K))


def _levels_of(w: WeightSequence) -> np.ndarray:
    if w.provenance == "explicit":
        raise InputError("level operations need a Kakutani-generated weight sequence")
    return ruler_level(np.arange(1, w.N))


def mask_Lm(w: WeightSequence, m: int) -> WeightSequence:
    """Keep only the level-m weights eps_m; zero elsewhere (the shift L_m)."""
    if m < 1:
        raise ParameterError(f"level m must be >= 1, got {m}")
    if w.provenance != "kakutani":
        raise InputError("mask_Lm expects the full Kakutani sequence")
    lv = _levels_of(w)
    return WeightSequence(np.where(lv == m, w.weights, 0.0), "masked", w.M, w.K, int(m))


def without_level(w: WeightSequence, m: int) -> WeightSequence:
    """Weights of W_eps - L_m: the Kakutani sequence with level m removed."""
    if m < 1:
        raise ParameterError(f"level m must be >= 1, got {m}")
    if w.provenance != "kakutani":
        raise InputError("without_level expects the full Kakutani sequence")
    lv = _levels_of(w)
    return WeightSequence(np.where(lv == m, 0.0, w.weights), "complement", w.M, w.K, int(m))


def shift_matrix(w) -> np.ndarray:
    """Dense N x N matrix with ``w`` on the first subdiagonal."""
    weights = w.weights if isinstance(w, WeightSequence) else np.asarray(w, dtype=float)
    N = weights.size + 1
    S = np.zeros((N, N))
    S[np.arange(1, N), np.arange(N - 1)] = weights
    return S


class PowerNorm(NamedTuple):
    value: float
    truncation_dominated: bool


def _window_products_max(weights: np.ndarray, k: int) -> float:
    if k > weights.size:
        return 0.0
    a = np.abs(weights)
    zero = a == 0
    # products over sliding windows through logs; exact zero if any factor is 0
    with np.errstate(divide="ignore"):
        logs = np.where(zero, 0.0, np.log(np.where(zero, 1.0, a)))
    csum = np.concatenate(([0.0], np.cumsum(logs)))
    zsum = np.concatenate(([0], np.cumsum(zero)))
    win_log = csum[k:] - csum[:-k]
    win_zero = (zsum[k:] - zsum[:-k]) > 0
    if np.all(win_zero):
        return 0.0
    i = int(np.argmax(np.where(win_zero, -np.inf, win_log)))
    return float(np.prod(a[i:i + k]))


def power_norm_by_formula(w: WeightSequence, k: int) -> PowerNorm:
    """||W^k|| as the largest |product| of k consecutive weights.

    Only windows that fit inside the truncation count.  For rule-generated
    sequences the result is flagged ``truncation_dominated`` when extending
    the truncation by ``k`` changes it; explicit sequences are flagged only
    when ``k >= N``.
    """
    if k < 1:
        raise ParameterError(f"power k must be >= 1, got {k}")
    value = _window_products_max(w.weights, k)
    if k >= w.N:
        return PowerNorm(0.0, True)
    ext = w.extended(w.N + k)
    dominated = False
    if ext is not None:
        dominated = _window_products_max(ext.weights, k) != value
    return PowerNorm(value, dominated)


class NilpotencyIndex(NamedTuple):
    index: int
    truncation_dominated: bool


def _longest_run(weights: np.ndarray) -> tuple[int, int]:
    best, best_end, run = 0, -1, 0
    for i, flag in enumerate(weights != 0):
        run = run + 1 if flag else 0
        if run > best:
            best, best_end = run, i
    return best, best_end


def nilpotency_index(w: WeightSequence) -> NilpotencyIndex:
    """Smallest k with W^k = 0 (one more than the longest run of nonzero weights).

    A truncated shift is always nilpotent; the flag says whether the longest
    run reaches the truncation boundary, in which case the untruncated
    operator may have a larger index or none at all.  For rule-generated
    weights the flag is raised only if doubling the truncation lengthens
    the longest run.
    """
    best, best_end = _longest_run(w.weights)
    touches = best > 0 and best_end == w.weights.size - 1
    if touches and w.provenance != "explicit":
        touches = _longest_run(w.extended(2 * w.N).weights)[0] != best
    return NilpotencyIndex(best + 1, bool(touches))


def jordan_block_L(a: float, nu: float, N: int) -> np.ndarray:
    """Truncated L = a I + nu (0 (+) J): diagonal a, subdiagonal nu except entry (2, 1).

    Equivalently L = a (I - D) with D = -(nu / a)(0 (+) J).
    """
    if not 0 < a < 1:
        raise ParameterError(f"a must lie in (0, 1), got {a}")
    if not 0 < nu < min(a, 1 - a):
        raise ParameterError(
            f"nu must satisfy 0 < nu < min(a, 1 - a) = {min(a, 1 - a)}, got {nu}"
        )
    if N < 1:
        raise ParameterError(f"N must be positive, got {N}")
    L = a * np.eye(N)
    if N > 2:
        L[np.arange(2, N), np.arange(1, N - 1)] = nu
    return L


def jordan_shift(N: int) -> np.ndarray:
    """Truncated unweighted shift J (all subdiagonal weights 1)."""
    return shift_matrix(np.ones(N - 1))


def log_series_bound(a: float, nu: float) -> float:
    """-log(1 - nu/a): the majorant of ||log(I - D)|| from the geometric series."""
    return -math.log1p(-nu / a)
