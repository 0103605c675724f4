import numpy as np
import pytest

from marginlab.datagen import BenchmarkConfig, gen_benchmark
from marginlab.errors import DataError, FitError
from marginlab.model import Architecture, init_params
from marginlab.numeric import make_rng
from marginlab.oodf import EmbeddingSet
from marginlab.scoring import (ComparisonCounter, build_prototypes,
                               count_comparisons, derive_ood_mask,
                               evaluate_scorer, knn_scores, mahalanobis_fit,
                               mahalanobis_scores, proto_msp_scores)

IDENTITY_ARCH = Architecture(input_dim=2, h_enc=2, emb_dim=2, h_head=2,
                             pair_dim=2)


def identity_encoder_params():
    params = init_params(IDENTITY_ARCH, seed=0)
    params.enc_w1 = np.eye(2)
    params.enc_b1 = np.zeros(2)
    params.enc_w2 = np.eye(2)
    params.enc_b2 = np.zeros(2)
    return params


# ------------------------------------------------------------- prototypes

def test_prototype_is_class_mean_under_identity_encoder():
    params = identity_encoder_params()
    support = EmbeddingSet(features=np.array([[1.0, 0.0], [0.0, 1.0]]),
                           labels=np.array([4, 4]))
    protos = build_prototypes(params, support)
    np.testing.assert_allclose(protos.prototypes, [[0.5, 0.5]])


def test_single_sample_class_prototype():
    params = identity_encoder_params()
    support = EmbeddingSet(features=np.array([[0.3, 0.7], [1.0, 1.0]]),
                           labels=np.array([2, 5]))
    protos = build_prototypes(params, support)
    np.testing.assert_allclose(protos.prototypes[0], [0.3, 0.7])
    np.testing.assert_array_equal(protos.class_ids, [2, 5])


def test_prototype_count_matches_support_classes():
    split = gen_benchmark(BenchmarkConfig(seed=0))
    protos = build_prototypes(None, split.support)
    assert protos.n_classes == 25


# ------------------------------------------------------------- proto-msp

def test_msp_reference_value_two_prototypes():
    # relational logits (2, 0) must give MSP e^2/(e^2+1)
    from marginlab.numeric import softmax
    msp = softmax(np.array([2.0, 0.0])).max()
    assert msp == pytest.approx(0.8807970779778823, abs=1e-10)


def test_msp_uniform_logits_and_shift_invariance():
    from marginlab.numeric import softmax
    k = 25
    assert softmax(np.zeros(k)).max() == pytest.approx(1 / k, abs=1e-15)
    rng = make_rng(3)
    logits = rng.normal(size=k)
    a = softmax(logits).max()
    b = softmax(logits + 13.7).max()
    assert b == pytest.approx(a, abs=1e-12)


def test_proto_msp_scores_bounds_and_counter():
    rng = make_rng(5)
    arch = Architecture(input_dim=8, h_enc=12, emb_dim=8, h_head=8, pair_dim=6)
    params = init_params(arch, seed=1)
    params.out_w = rng.normal(size=params.out_w.shape)
    support = EmbeddingSet(features=rng.normal(size=(40, 8)),
                           labels=np.repeat(np.arange(5), 8))
    protos = build_prototypes(params, support)
    z_test = rng.normal(size=(30, 8))
    from marginlab.model import encode
    counter = ComparisonCounter()
    scores = proto_msp_scores(params, protos, encode(params, z_test),
                              counter=counter)
    assert counter.total == 30 * 5
    assert np.all(scores > 1 / 5) and np.all(scores <= 1.0)


def test_proto_msp_needs_two_prototypes():
    params = identity_encoder_params()
    support = EmbeddingSet(features=np.array([[1.0, 0.0]]),
                           labels=np.array([0]))
    protos = build_prototypes(params, support)
    with pytest.raises(DataError):
        proto_msp_scores(params, protos, np.array([[1.0, 0.0]]))


# ------------------------------------------------------------- knn

def test_knn_exact_match_scores_zero():
    support = np.array([[1.0, 0.0], [0.0, 1.0]])
    scores = knn_scores(support, np.array([[1.0, 0.0]]), k=1)
    assert scores[0] == pytest.approx(0.0, abs=1e-12)


def test_knn_second_neighbor_example():
    # normalized unit vectors: distance to the 2nd neighbor is sqrt(2)
    support = np.array([[1.0, 0.0], [0.0, 1.0]])
    scores = knn_scores(support, np.array([[1.0, 0.0]]), k=2)
    assert scores[0] == pytest.approx(-np.sqrt(2), abs=1e-12)


def test_knn_exhaustive_distance_oracle():
    rng = make_rng(7)
    support = rng.normal(size=(50, 6))
    queries = rng.normal(size=(10, 6))
    for k in (1, 3, 50):
        got = knn_scores(support, queries, k=k, normalize=False)
        for i, q in enumerate(queries):
            dists = np.sort(np.linalg.norm(support - q, axis=1))
            assert got[i] == pytest.approx(-dists[k - 1], abs=1e-10)


def test_knn_monotone_in_k():
    rng = make_rng(8)
    support = rng.normal(size=(30, 4))
    q = rng.normal(size=(5, 4))
    prev = knn_scores(support, q, k=1)
    for k in range(2, 31):
        cur = knn_scores(support, q, k=k)
        assert np.all(cur <= prev + 1e-15)
        prev = cur


def test_knn_normalized_scale_invariance():
    rng = make_rng(9)
    support = rng.normal(size=(20, 5))
    q = rng.normal(size=(4, 5))
    base = knn_scores(support, q, k=2, normalize=True)
    scaled = knn_scores(support * 7.3, q * 0.11, k=2, normalize=True)
    np.testing.assert_allclose(scaled, base, atol=1e-10)


def test_knn_counter_counts_all_pairs():
    rng = make_rng(10)
    support = rng.normal(size=(17, 3))
    q = rng.normal(size=(9, 3))
    counter = ComparisonCounter()
    knn_scores(support, q, k=1, counter=counter)
    assert counter.total == 17 * 9


def test_knn_k_out_of_range():
    support = np.zeros((4, 2)) + np.arange(4)[:, None]
    with pytest.raises(ValueError):
        knn_scores(support, np.zeros((1, 2)), k=5)
    with pytest.raises(ValueError):
        knn_scores(support, np.zeros((1, 2)), k=0)


# ------------------------------------------------------------- mahalanobis

def test_mahalanobis_identity_covariance_is_neg_sq_euclid():
    fit_means = np.array([[0.0, 0.0]])
    from marginlab.scoring import GaussianFit
    fit = GaussianFit(class_ids=np.array([0]), class_means=fit_means,
                      shared_covariance=np.eye(2), epsilon=0.0)
    assert mahalanobis_scores(fit, np.array([[3.0, 4.0]]))[0] == \
        pytest.approx(-25.0, abs=1e-10)
    assert mahalanobis_scores(fit, fit_means)[0] == pytest.approx(0.0, abs=1e-12)


def test_mahalanobis_diagonal_closed_form():
    from marginlab.scoring import GaussianFit
    fit = GaussianFit(class_ids=np.array([0]),
                      class_means=np.array([[0.0, 0.0]]),
                      shared_covariance=np.diag([4.0, 1.0]), epsilon=0.0)
    assert mahalanobis_scores(fit, np.array([[2.0, 0.0]]))[0] == \
        pytest.approx(-1.0, abs=1e-12)


def test_mahalanobis_fit_recovers_identity_covariance():
    rng = make_rng(11)
    n = 5000
    feats = np.vstack([rng.normal(size=(n, 4)) + [3, 0, 0, 0],
                       rng.normal(size=(n, 4)) - [3, 0, 0, 0]])
    support = EmbeddingSet(features=feats,
                           labels=np.array([0] * n + [1] * n))
    fit = mahalanobis_fit(support, None, epsilon_scale=0.0)
    np.testing.assert_allclose(fit.shared_covariance, np.eye(4), atol=0.1)


def test_mahalanobis_pooled_divisor():
    # 2 classes, 4 samples: pooled scatter divided by N - K = 2
    feats = np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 1.0], [5.0, -1.0]])
    support = EmbeddingSet(features=feats, labels=np.array([0, 0, 1, 1]))
    fit = mahalanobis_fit(support, None, epsilon_scale=0.0)
    scatter = np.array([[2.0, 0.0], [0.0, 2.0]])   # by hand
    np.testing.assert_allclose(fit.shared_covariance, scatter / 2, atol=1e-12)


def test_mahalanobis_rank_deficient_without_ridge_fails():
    feats = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0],
                      [1.0, 2.0, 3.1], [2.0, 4.0, 6.1]])
    support = EmbeddingSet(features=feats, labels=np.array([0, 0, 1, 1]))
    with pytest.raises(FitError):
        mahalanobis_fit(support, None, epsilon_scale=0.0)


def test_mahalanobis_needs_degrees_of_freedom():
    support = EmbeddingSet(features=np.eye(3), labels=np.arange(3))
    with pytest.raises(FitError, match="more samples than classes"):
        mahalanobis_fit(support, None)


def test_mahalanobis_counter():
    rng = make_rng(12)
    support = EmbeddingSet(features=rng.normal(size=(40, 4)),
                           labels=np.repeat(np.arange(4), 10))
    fit = mahalanobis_fit(support, None)
    counter = ComparisonCounter()
    mahalanobis_scores(fit, rng.normal(size=(6, 4)), counter=counter)
    assert counter.total == 6 * 4


# ------------------------------------------------------------- accounting

def test_count_comparisons_table_values():
    split = gen_benchmark(BenchmarkConfig(seed=0))
    assert count_comparisons("proto-msp", split.support) == 25
    assert count_comparisons("mahalanobis", split.support) == 25
    assert count_comparisons("knn", split.support) == 4100


def test_count_comparisons_other_support_size():
    split = gen_benchmark(BenchmarkConfig(seed=0, support_per_class=192))
    assert count_comparisons("knn", split.support) == 4800


def test_derive_ood_mask_prefers_stored_flags():
    support = EmbeddingSet(features=np.eye(2), labels=np.array([0, 1]))
    flags = np.array([True, False])
    test = EmbeddingSet(features=np.eye(2), labels=np.array([0, 1]),
                        ood_flags=flags)
    np.testing.assert_array_equal(derive_ood_mask(support, test), flags)
    unflagged = EmbeddingSet(features=np.eye(2), labels=np.array([0, 7]))
    np.testing.assert_array_equal(derive_ood_mask(support, unflagged),
                                  [False, True])


def test_evaluate_scorer_counter_agrees_with_reported_n_comp():
    split = gen_benchmark(BenchmarkConfig(
        seed=1, n_pretrain_classes=6, n_known_classes=5, n_unknown_classes=5,
        pretrain_per_class=8, support_per_class=6, test_per_class=4))
    n_test = split.test.n
    for scorer in ("knn", "mahalanobis"):
        counter = ComparisonCounter()
        report = evaluate_scorer(scorer, split.support, split.test, None,
                                 counter=counter)
        assert counter.total == report.n_comp_per_test * n_test


def test_evaluate_scorer_requires_both_populations():
    support = EmbeddingSet(features=np.eye(3) + 1, labels=np.array([0, 1, 2]))
    all_id = EmbeddingSet(features=np.eye(3) + 1, labels=np.array([0, 1, 2]))
    with pytest.raises(DataError, match="no OOD"):
        evaluate_scorer("knn", support, all_id, None)
    all_ood = EmbeddingSet(features=np.eye(3) + 1, labels=np.array([7, 8, 9]))
    with pytest.raises(DataError, match="no ID"):
        evaluate_scorer("knn", support, all_ood, None)


def test_evaluate_proto_msp_requires_model():
    split = gen_benchmark(BenchmarkConfig(
        seed=1, n_pretrain_classes=6, n_known_classes=5, n_unknown_classes=5,
        pretrain_per_class=8, support_per_class=6, test_per_class=4))
    with pytest.raises(DataError, match="relational model"):
        evaluate_scorer("proto-msp", split.support, split.test, None)
