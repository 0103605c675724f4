"""Threshold-free detection metrics plus rank correlation.

Score polarity everywhere: higher = more in-distribution. AUROC is the
Mann-Whitney statistic P(id > ood) + 0.5 P(id = ood); FPR@TPR uses a
discrete order-statistic threshold (no interpolation) so tiny score sets
give bit-stable numbers.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UndefinedCorrelationError
from .numeric import require_finite


def _as_scores(arr, name) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} score array is empty")
    require_finite(arr, name)
    return arr


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores_id, scores_ood) -> float:
    """Probability a random ID score beats a random OOD score, ties half."""
    sid = _as_scores(scores_id, "ID")
    sood = _as_scores(scores_ood, "OOD")
    ranks = midranks(np.concatenate([sid, sood]))
    n_id, n_ood = sid.size, sood.size
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def auroc_bruteforce(scores_id, scores_ood) -> float:
    """O(n^2) reference: count wins and half-count ties pair by pair."""
    sid = _as_scores(scores_id, "ID")
    sood = _as_scores(scores_ood, "OOD")
    wins = 0.0
    for a in sid:
        for b in sood:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (sid.size * sood.size)


def fpr_at_tpr(scores_id, scores_ood, level: float = 0.95) -> float:
    """OOD fraction accepted at the largest threshold keeping TPR >= level.

    The threshold is the ceil(level * N_id)-th largest ID score and
    "score >= threshold" predicts in-distribution."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be strictly between 0 and 1")
    sid = _as_scores(scores_id, "ID")
    sood = _as_scores(scores_ood, "OOD")
    k = math.ceil(level * sid.size)
    threshold = np.sort(sid)[::-1][k - 1]
    return float(np.mean(sood >= threshold))


def spearman(x, y) -> float:
    """Rank correlation with mid-rank ties; undefined for constant input."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 3:
        raise ValueError("spearman needs two equal-length arrays, length >= 3")
    require_finite(x, "x")
    require_finite(y, "y")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("rank correlation of a constant array")
    rx = midranks(x)
    ry = midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
