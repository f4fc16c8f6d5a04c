import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabilab.errors import InputError, ParameterError
from stabilab.linalg import matrix_log, operator_norm
from stabilab.shifts import (WeightSequence, jordan_block_L, jordan_shift, kakutani_weights,
                             log_series_bound, mask_Lm, nilpotency_index, power_norm_by_formula,
                             ruler_level, shift_matrix, without_level)


def test_ruler_weights_by_hand():
    w = kakutani_weights(1, 2, 9)
    assert list(w.weights) == [1, 0.5, 1, 0.25, 1, 0.5, 1, 0.125]
    assert w.N == 9


def test_first_occurrence_and_period():
    w = kakutani_weights(1, 2, 200).weights
    for m in range(1, 7):
        eps = 2.0 ** -(m - 1)
        hits = np.nonzero(w == eps)[0] + 1
        assert hits[0] == 2 ** (m - 1)
        assert np.all(np.diff(hits) == 2 ** m)


def test_sup_of_weights_is_M():
    w = kakutani_weights(3.0, 1.5, 100)
    assert w.weights.max() == 3.0
    assert operator_norm(w.matrix()) == pytest.approx(3.0, rel=1e-12)


def test_ruler_level_rejects_zero():
    with pytest.raises(InputError):
        ruler_level(0)
    assert list(ruler_level([1, 2, 3, 4, 12])) == [1, 2, 1, 3, 3]


def test_kakutani_requires_K_above_one():
    with pytest.raises(ParameterError):
        kakutani_weights(1, 1, 8)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.integers(2, 300))
def test_prefix_property(n1, n2):
    a, b = sorted((n1, n2))
    wa = kakutani_weights(1, 2, a).weights
    wb = kakutani_weights(1, 2, b).weights
    assert np.array_equal(wa, wb[: wa.size])


def test_weights_read_only():
    w = kakutani_weights(1, 2, 8)
    with pytest.raises(ValueError):
        w.weights[0] = 5.0


def test_mask_example():
    L2 = mask_Lm(kakutani_weights(1, 2, 9), 2)
    assert list(L2.weights) == [0, 0.5, 0, 0, 0, 0.5, 0, 0]
    assert operator_norm(-L2.matrix()) == pytest.approx(0.5)


def test_complement_has_zeros_every_2m():
    w = without_level(kakutani_weights(1, 2, 128), 3)
    zeros = np.nonzero(w.weights == 0)[0] + 1
    assert np.all(np.diff(zeros) == 8) and zeros[0] == 4


def test_power_norm_examples():
    w = kakutani_weights(1, 2, 64)
    assert power_norm_by_formula(w, 1).value == 1.0
    assert power_norm_by_formula(without_level(w, 2), 4).value == 0.0
    J = WeightSequence(np.ones(15))
    assert power_norm_by_formula(J, 16) == (0.0, True)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=20), st.integers(1, 20))
def test_power_norm_matches_dense_power(weights, k):
    w = WeightSequence(np.array(weights))
    k = min(k, w.N - 1)
    dense = operator_norm(np.linalg.matrix_power(w.matrix(), k))
    assert abs(power_norm_by_formula(w, k).value - dense) <= 1e-10 * max(1.0, dense)


def test_truncation_flag():
    # the leading window of the ruler sequence is already the largest one
    assert not power_norm_by_formula(kakutani_weights(1, 2, 8), 7).truncation_dominated
    assert power_norm_by_formula(WeightSequence(np.ones(4)), 5).truncation_dominated
    assert not power_norm_by_formula(without_level(kakutani_weights(1, 2, 64), 2), 3).truncation_dominated


def test_nilpotency_examples():
    w = without_level(kakutani_weights(1, 2, 64), 3)
    assert nilpotency_index(w) == (8, False)
    assert nilpotency_index(WeightSequence(np.ones(15))) == (16, True)
    assert nilpotency_index(WeightSequence(np.zeros(5))).index == 1


@pytest.mark.parametrize("m", range(1, 7))
def test_exact_nilpotency_entrywise(m):
    W = without_level(kakutani_weights(1, 2, 128), m).matrix()
    P = np.linalg.matrix_power(W, 2 ** m)
    assert not P.any()
    assert np.linalg.matrix_power(W, 2 ** m - 1).any()


def test_jordan_block_example():
    L = jordan_block_L(0.5, 0.25 - 1e-12, 3)
    assert np.allclose(L, [[0.5, 0, 0], [0, 0.5, 0], [0, 0.25, 0.5]])
    assert np.all(np.diag(jordan_block_L(0.4, 0.1, 10)) == 0.4)
    with pytest.raises(ParameterError, match="min"):
        jordan_block_L(0.5, 0.5, 4)


def test_jordan_shift_is_all_ones():
    J = jordan_shift(5)
    assert np.array_equal(np.diagonal(J, -1), np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99), st.integers(2, 24))
def test_log_series_bound(a, frac, N):
    nu = frac * min(a, 1 - a)
    L = jordan_block_L(a, nu, N)
    logID = matrix_log(L) - math.log(a) * np.eye(N)
    assert operator_norm(logID) <= log_series_bound(a, nu) + 1e-10


def test_csv_dump():
    text = kakutani_weights(1, 2, 4).to_csv().splitlines()
    assert text == ["weight", "1.0", "0.5", "1.0"]


def test_nilpotency_of_full_ruler_sequence_is_truncation_dominated():
    # no zero weights: the run grows with every extension
    assert nilpotency_index(kakutani_weights(1, 2, 16)) == (16, True)
