"""Fine-tuning-free normality scorers over support/test embeddings.

Three scorers, all emitting "higher = more in-distribution":

    proto-msp    class prototypes (mean support embedding per class) pushed
                 through the relational head against each test embedding;
                 the score is the maximum softmax probability of the
                 resulting per-class similarity logits
    knn          negative distance to the k-th nearest support embedding
                 (L2-normalized by default)
    mahalanobis  negative squared Mahalanobis distance to the nearest class
                 mean under a shared pooled covariance

Every scorer reports its comparison budget: prototype and Mahalanobis
methods compare against one entry per support class, k-NN against every
support sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FitError, NumericalError
from .metrics import auroc, fpr_at_tpr
from .model import ModelParams, encode, score_pairs
from .numeric import softmax
from .oodf import EmbeddingSet

SCORER_KINDS = ("proto-msp", "knn", "mahalanobis")


@dataclass
class ComparisonCounter:
    """Tallies distance/similarity evaluations actually performed."""

    total: int = 0

    def add(self, n: int) -> None:
        self.total += int(n)


@dataclass
class PrototypeSet:
    class_ids: np.ndarray    # ascending
    prototypes: np.ndarray   # (n_classes, emb_dim)

    @property
    def n_classes(self) -> int:
        return self.class_ids.size


@dataclass
class GaussianFit:
    class_ids: np.ndarray
    class_means: np.ndarray         # (n_classes, D)
    shared_covariance: np.ndarray   # (D, D), regularized
    epsilon: float


@dataclass
class EvalReport:
    scorer: str
    auroc: float
    fpr_at_tpr95: float
    n_comp_per_test: int
    scores_id: np.ndarray
    scores_ood: np.ndarray


def embed_set(params: ModelParams | None, dataset: EmbeddingSet) -> np.ndarray:
    """Encoder embeddings, or the raw stored features when no model is given
    (the path for externally extracted backbone features)."""
    if params is None:
        return dataset.features
    return encode(params, dataset.features)


def build_prototypes(params: ModelParams | None,
                     support: EmbeddingSet) -> PrototypeSet:
    """Per-class mean embedding, ordered by ascending class id."""
    z = embed_set(params, support)
    ids = support.class_ids()
    if ids.size == 0:
        raise DataError("support set is empty")
    protos = np.stack([z[support.labels == c].mean(axis=0) for c in ids])
    return PrototypeSet(class_ids=ids, prototypes=protos)


def proto_msp_scores(params: ModelParams, protos: PrototypeSet,
                     z_test: np.ndarray, *, sce_logit: str = "same",
                     counter: ComparisonCounter | None = None) -> np.ndarray:
    """MSP normality score for each test embedding (rows of z_test).

    The per-class logit is the relational similarity of (test, prototype):
    the scalar score for 1-output heads; for the 2-logit head either the
    "same"-class logit (default) or the same-minus-different margin."""
    if protos.n_classes < 2:
        raise DataError("MSP needs at least 2 prototypes")
    z_test = np.atleast_2d(np.asarray(z_test, dtype=np.float64))
    n = z_test.shape[0]
    k = protos.n_classes
    # all (test, prototype) pairs ride one head pass
    tiled_test = np.tile(z_test, (k, 1))
    tiled_protos = np.repeat(protos.prototypes, n, axis=0)
    _, score = score_pairs(params, tiled_test, tiled_protos)
    if params.arch.out_dim == 2:
        flat = score[:, 1] if sce_logit == "same" else score[:, 1] - score[:, 0]
    else:
        flat = score
    logits = flat.reshape(k, n).T
    if counter is not None:
        counter.add(n * k)
    return softmax(logits).max(axis=1)


def knn_scores(support_embeddings: np.ndarray, z_test: np.ndarray, k: int = 1,
               normalize: bool = True,
               counter: ComparisonCounter | None = None) -> np.ndarray:
    """Negative Euclidean distance to the k-th nearest support embedding."""
    support = np.asarray(support_embeddings, dtype=np.float64)
    z_test = np.atleast_2d(np.asarray(z_test, dtype=np.float64))
    if not 1 <= k <= support.shape[0]:
        raise ValueError(f"k must be in [1, {support.shape[0]}], got {k}")
    if normalize:
        support = _l2_normalize(support)
        z_test = _l2_normalize(z_test)
    d2 = (np.sum(z_test ** 2, axis=1)[:, None]
          + np.sum(support ** 2, axis=1)[None, :]
          - 2.0 * z_test @ support.T)
    np.maximum(d2, 0.0, out=d2)
    if counter is not None:
        counter.add(d2.size)
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return -np.sqrt(kth)


def _l2_normalize(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms == 0.0, 1.0, norms)


def mahalanobis_fit(support: EmbeddingSet, params: ModelParams | None = None,
                    epsilon_scale: float = 1e-3) -> GaussianFit:
    """Class means plus a shared pooled covariance, ridge-regularized by
    epsilon_scale * trace(cov) / D so small support sets stay solvable."""
    z = embed_set(params, support)
    ids = support.class_ids()
    n, d = z.shape
    k = ids.size
    if n <= k:
        raise FitError(f"pooled covariance needs more samples than classes "
                       f"(N={n}, K={k})")
    means = np.stack([z[support.labels == c].mean(axis=0) for c in ids])
    scatter = np.zeros((d, d))
    for i, c in enumerate(ids):
        diff = z[support.labels == c] - means[i]
        scatter += diff.T @ diff
    cov = scatter / (n - k)
    cov = 0.5 * (cov + cov.T)
    eps = epsilon_scale * float(np.trace(cov)) / d
    cov_reg = cov + eps * np.eye(d)
    try:
        np.linalg.cholesky(cov_reg)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(cov_reg).min())
        raise FitError(f"covariance is not positive definite even after "
                       f"regularization (smallest eigenvalue {smallest:.3e})")
    return GaussianFit(class_ids=ids, class_means=means,
                       shared_covariance=cov_reg, epsilon=eps)


def mahalanobis_scores(fit: GaussianFit, z_test: np.ndarray,
                       counter: ComparisonCounter | None = None) -> np.ndarray:
    """Negative squared Mahalanobis distance to the nearest class mean,
    solved through the Cholesky factor (no explicit inverse)."""
    z_test = np.atleast_2d(np.asarray(z_test, dtype=np.float64))
    try:
        chol = np.linalg.cholesky(fit.shared_covariance)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(fit.shared_covariance).min())
        raise NumericalError(f"covariance factorization failed "
                             f"(smallest pivot {smallest:.3e})")
    best = np.full(z_test.shape[0], np.inf)
    for mean in fit.class_means:
        w = np.linalg.solve(chol, (z_test - mean).T)
        np.minimum(best, np.sum(w * w, axis=0), out=best)
    if counter is not None:
        counter.add(z_test.shape[0] * fit.class_means.shape[0])
    return -best


def count_comparisons(scorer: str, support: EmbeddingSet) -> int:
    """Comparisons per test sample: class count for prototype-style scorers,
    support size for k-NN."""
    if support.n == 0:
        raise DataError("support set is empty")
    if scorer == "knn":
        return support.n
    if scorer in ("proto-msp", "mahalanobis"):
        return int(support.class_ids().size)
    raise ValueError(f"unknown scorer {scorer!r}")


def derive_ood_mask(support: EmbeddingSet, test: EmbeddingSet) -> np.ndarray:
    """Stored flags if present, else label membership against the support."""
    if test.ood_flags is not None:
        return test.ood_flags
    return ~np.isin(test.labels, support.class_ids())


def evaluate_scorer(scorer: str, support: EmbeddingSet, test: EmbeddingSet,
                    params: ModelParams | None = None, *, k: int = 1,
                    normalize: bool = True, sce_logit: str = "same",
                    epsilon_scale: float = 1e-3,
                    counter: ComparisonCounter | None = None) -> EvalReport:
    """Run one scorer over a support/test pair and compute the metrics."""
    if scorer not in SCORER_KINDS:
        raise ValueError(f"unknown scorer {scorer!r}")
    is_ood = derive_ood_mask(support, test)
    if not np.any(is_ood):
        raise DataError("test set contains no OOD samples")
    if np.all(is_ood):
        raise DataError("test set contains no ID samples")

    z_support = embed_set(params, support)
    z_test = embed_set(params, test)
    if scorer == "proto-msp":
        if params is None:
            raise DataError("proto-msp needs a trained relational model")
        protos = build_prototypes(params, support)
        scores = proto_msp_scores(params, protos, z_test, sce_logit=sce_logit,
                                  counter=counter)
    elif scorer == "knn":
        scores = knn_scores(z_support, z_test, k=k, normalize=normalize,
                            counter=counter)
    else:
        fit = mahalanobis_fit(support, params, epsilon_scale=epsilon_scale)
        scores = mahalanobis_scores(fit, z_test, counter=counter)

    scores_id = scores[~is_ood]
    scores_ood = scores[is_ood]
    return EvalReport(
        scorer=scorer,
        auroc=auroc(scores_id, scores_ood),
        fpr_at_tpr95=fpr_at_tpr(scores_id, scores_ood, 0.95),
        n_comp_per_test=count_comparisons(scorer, support),
        scores_id=scores_id,
        scores_ood=scores_ood,
    )
