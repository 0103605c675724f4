import math

import numpy as np
import pytest

from marginlab.errors import DegenerateVectorError
from marginlab.numeric import (cosine_similarity, log_sum_exp, make_rng,
                               restore_rng, rng_state, softmax,
                               stable_sigmoid)


def test_sigmoid_symmetry_point():
    assert stable_sigmoid(0.0) == 0.5


def test_sigmoid_saturates_without_overflow():
    assert stable_sigmoid(1e4) == pytest.approx(1.0, abs=1e-12)
    assert stable_sigmoid(-1e4) == pytest.approx(0.0, abs=1e-12)


def test_sigmoid_reference_value():
    # high-precision scalar oracle for 1/(1+e^-1)
    expected = 1.0 / (1.0 + math.exp(-1.0))
    assert stable_sigmoid(1.0) == pytest.approx(expected, abs=1e-15)


def test_sigmoid_complement_identity():
    rng = make_rng(11)
    for x in rng.uniform(-50, 50, size=200):
        assert stable_sigmoid(x) + stable_sigmoid(-x) == pytest.approx(1.0, abs=1e-12)


def test_sigmoid_rejects_non_finite():
    with pytest.raises(ValueError):
        stable_sigmoid(float("nan"))
    with pytest.raises(ValueError):
        stable_sigmoid(float("inf"))


def test_log_sum_exp_basic():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)


def test_log_sum_exp_shift_invariance_no_overflow():
    assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-12)


def test_log_sum_exp_small_magnitudes_match_direct_sum():
    # direct summation oracle is exact at small magnitudes
    direct = math.log(sum(math.exp(v) for v in (1.0, 2.0, 3.0)))
    assert log_sum_exp([1.0, 2.0, 3.0]) == pytest.approx(direct, abs=1e-14)


def test_log_sum_exp_empty():
    with pytest.raises(ValueError):
        log_sum_exp([])


def test_softmax_uniform_cases():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)
    for c in (-3.0, 0.0, 1e4):
        np.testing.assert_allclose(softmax([c] * 4), [0.25] * 4, atol=1e-15)


def test_softmax_reference_value():
    # e^2 / (e^2 + 1) scalar oracle
    p = math.exp(2) / (math.exp(2) + 1)
    np.testing.assert_allclose(softmax([2.0, 0.0]), [p, 1 - p], atol=1e-12)


def test_softmax_sums_to_one_across_lengths():
    rng = make_rng(3)
    for n in (1, 2, 7, 64, 1024):
        v = rng.normal(scale=20, size=n)
        assert abs(softmax(v).sum() - 1.0) < 1e-12


def test_softmax_shift_invariance():
    rng = make_rng(4)
    for _ in range(50):
        v = rng.normal(size=17)
        c = rng.uniform(-100, 100)
        np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)


def test_softmax_empty():
    with pytest.raises(ValueError):
        softmax([])


def test_cosine_basic_directions():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [-1, 0]) == -1.0


def test_cosine_symmetric_and_scale_invariant():
    rng = make_rng(5)
    for _ in range(100):
        a = rng.normal(size=6)
        b = rng.normal(size=6)
        alpha, beta = rng.uniform(0.01, 50, size=2)
        s = cosine_similarity(a, b)
        assert cosine_similarity(b, a) == pytest.approx(s, abs=1e-12)
        assert cosine_similarity(alpha * a, beta * b) == pytest.approx(s, abs=1e-12)


def test_cosine_clamped_to_unit_interval():
    v = np.full(64, 0.1)
    assert cosine_similarity(v, v) <= 1.0


def test_cosine_zero_norm_rejected():
    with pytest.raises(DegenerateVectorError):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


def test_cosine_length_mismatch():
    with pytest.raises(ValueError):
        cosine_similarity([1.0], [1.0, 2.0])


def test_rng_reproducible_streams():
    a = make_rng(1234).normal(size=100)
    b = make_rng(1234).normal(size=100)
    assert a.tobytes() == b.tobytes()


def test_rng_state_roundtrip():
    rng = make_rng(9)
    rng.normal(size=10)
    state = rng_state(rng)
    expected = rng.normal(size=5)
    resumed = restore_rng(state).normal(size=5)
    assert expected.tobytes() == resumed.tobytes()
