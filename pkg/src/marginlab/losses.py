"""Pair-relation training objectives with analytic gradients.

Five objectives over a pair score:

    bce     binary cross-entropy on sigmoid(score), target in {0, 1}
    sce     softmax cross-entropy on a 2-logit head
    focal   bce rescaled by (1 - p_true)^gamma
    mse_cs  squared error between a [-1, 1]-compressed sigmoid and a
            signed target in {-1, +1}; slope factor c
    hinge   max(0, delta - signed_target * score): a fixed geometric
            margin delta around zero

Per-sample values are defined here; batch reduction is the arithmetic
mean (keeps learning-rate meaning stable across batch sizes). Scalar-head
losses (bce, focal, mse_cs, hinge) consume one score; sce consumes two
logits, index 1 being the "same class" one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import log_sum_exp, softmax, stable_sigmoid

PROB_FLOOR = 1e-15   # clamp for log arguments; saturation protection only

LOSS_KINDS = ("bce", "sce", "focal", "mse_cs", "hinge")


@dataclass(frozen=True)
class LossSpec:
    """Tagged loss choice. Only the hyperparameter matching kind is read."""

    kind: str
    gamma: float = 0.0    # focal
    c: float = 10.0       # mse_cs
    delta: float = 0.01   # hinge

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "focal" and self.gamma < 0:
            raise ValueError("focal gamma must be >= 0")
        if self.kind == "mse_cs" and self.c <= 0:
            raise ValueError("mse_cs slope c must be > 0")
        if self.kind == "hinge" and self.delta <= 0:
            raise ValueError("hinge delta must be > 0")

    @property
    def n_logits(self) -> int:
        return 2 if self.kind == "sce" else 1

    @property
    def hyperparam(self) -> float | None:
        if self.kind == "focal":
            return self.gamma
        if self.kind == "mse_cs":
            return self.c
        if self.kind == "hinge":
            return self.delta
        return None

    def cli_name(self) -> str:
        if self.kind == "focal":
            return f"focal:g={self.gamma:g}"
        if self.kind == "mse_cs":
            return f"mse:c={self.c:g}"
        if self.kind == "hinge":
            return f"hinge:d={self.delta:g}"
        return self.kind


def parse_loss_spec(text: str) -> LossSpec:
    """Parse CLI strings: bce | sce | focal:g=2 | mse:c=10 | hinge:d=0.01."""
    name, _, args = text.strip().partition(":")
    name = name.lower()
    params = {}
    if args:
        for part in args.split(","):
            key, _, val = part.partition("=")
            if not val:
                raise ValueError(f"bad loss argument {part!r} in {text!r}")
            params[key.strip()] = float(val)
    if name == "bce":
        spec = LossSpec("bce")
    elif name == "sce":
        spec = LossSpec("sce")
    elif name == "focal":
        spec = LossSpec("focal", gamma=params.pop("g", params.pop("gamma", 2.0)))
    elif name in ("mse", "mse_cs"):
        spec = LossSpec("mse_cs", c=params.pop("c", 10.0))
    elif name == "hinge":
        spec = LossSpec("hinge", delta=params.pop("d", params.pop("delta", 0.01)))
    else:
        raise ValueError(f"unknown loss {text!r}")
    if params:
        raise ValueError(f"unexpected arguments {sorted(params)} for loss {name!r}")
    return spec


def signed_target(binary: int) -> int:
    """Map a {0, 1} pair label to the {-1, +1} convention."""
    if binary not in (0, 1):
        raise ValueError(f"pair target must be 0 or 1, got {binary}")
    return 2 * binary - 1


@dataclass
class LossOutput:
    value: float
    grad: np.ndarray   # d value / d score, length 1 (scalar heads) or 2 (sce)


def _true_class_prob(sigma: float, target: int):
    """(probability of the true class, d prob sign) under a sigmoid head."""
    if target == 1:
        return stable_sigmoid(sigma), 1.0
    if target == 0:
        return stable_sigmoid(-sigma), -1.0
    raise ValueError(f"pair target must be 0 or 1, got {target}")


def loss_bce(sigma: float, target: int) -> LossOutput:
    _check_finite(sigma)
    p, sign = _true_class_prob(sigma, target)
    value = -np.log(max(p, PROB_FLOOR))
    grad = sign * (p - 1.0)
    return LossOutput(float(value), np.array([grad]))


def loss_sce(logits, label_index: int) -> LossOutput:
    logits = np.asarray(logits, dtype=np.float64).ravel()
    if logits.shape != (2,):
        raise ValueError("sce expects exactly 2 logits")
    _check_finite(logits)
    if label_index not in (0, 1):
        raise ValueError(f"label_index must be 0 or 1, got {label_index}")
    value = log_sum_exp(logits) - logits[label_index]
    grad = softmax(logits)
    grad[label_index] -= 1.0
    return LossOutput(float(value), grad)


def loss_focal(sigma: float, target: int, gamma: float) -> LossOutput:
    _check_finite(sigma)
    if gamma < 0:
        raise ValueError("focal gamma must be >= 0")
    p, sign = _true_class_prob(sigma, target)
    p_c = min(max(p, PROB_FLOOR), 1.0 - PROB_FLOOR)
    log_p = np.log(p_c)
    value = -((1.0 - p) ** gamma) * log_p
    # d/dsigma of -(1-p)^g log p with dp/dsigma = sign * p (1-p)
    grad = sign * (gamma * p * (1.0 - p) ** gamma * log_p - (1.0 - p) ** (gamma + 1.0))
    return LossOutput(float(value), np.array([grad]))


def loss_mse_cs(sigma: float, target: int, c: float) -> LossOutput:
    _check_finite(sigma)
    if c <= 0:
        raise ValueError("mse_cs slope c must be > 0")
    l_signed = signed_target(target)
    s_hat = 2.0 * stable_sigmoid(c * sigma) - 1.0
    resid = s_hat - l_signed
    value = resid * resid
    grad = 2.0 * resid * 0.5 * c * (1.0 - s_hat * s_hat)
    return LossOutput(float(value), np.array([grad]))


def loss_hinge(sigma: float, target: int, delta: float) -> LossOutput:
    _check_finite(sigma)
    if delta <= 0:
        raise ValueError("hinge delta must be > 0")
    l_signed = signed_target(target)
    margin = l_signed * sigma
    if margin < delta:
        return LossOutput(float(delta - margin), np.array([-float(l_signed)]))
    # subgradient 0 at the kink and beyond
    return LossOutput(0.0, np.array([0.0]))


def loss_value_grad(spec: LossSpec, score, target: int) -> LossOutput:
    """Dispatch on spec.kind. score is scalar, or a 2-vector for sce."""
    if spec.kind == "bce":
        return loss_bce(score, target)
    if spec.kind == "sce":
        return loss_sce(score, target)
    if spec.kind == "focal":
        return loss_focal(score, target, spec.gamma)
    if spec.kind == "mse_cs":
        return loss_mse_cs(score, target, spec.c)
    return loss_hinge(score, target, spec.delta)


def batch_loss(spec: LossSpec, scores: np.ndarray, targets: np.ndarray):
    """Vectorized mean loss and per-sample score gradients.

    scores: (M,) for scalar heads or (M, 2) for sce. Returns
    (mean value, grads) where grads has the same shape as scores and holds
    d(per-sample value)/d(score); divide by M for the mean-loss gradient.
    """
    targets = np.asarray(targets)
    if spec.kind == "sce":
        scores = np.asarray(scores, dtype=np.float64).reshape(-1, 2)
        probs = softmax(scores)
        lse = np.log(np.sum(np.exp(scores - scores.max(axis=1, keepdims=True)),
                            axis=1)) + scores.max(axis=1)
        picked = scores[np.arange(scores.shape[0]), targets]
        values = lse - picked
        grads = probs
        grads[np.arange(scores.shape[0]), targets] -= 1.0
        return float(values.mean()), grads

    sigma = np.asarray(scores, dtype=np.float64).ravel()
    t = targets.astype(np.float64)
    if spec.kind == "bce" or spec.kind == "focal":
        gamma = spec.gamma if spec.kind == "focal" else 0.0
        sign = 2.0 * t - 1.0
        p = stable_sigmoid(sign * sigma)          # probability of the true class
        p_c = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
        log_p = np.log(p_c)
        values = -((1.0 - p) ** gamma) * log_p
        grads = sign * (gamma * p * (1.0 - p) ** gamma * log_p
                        - (1.0 - p) ** (gamma + 1.0))
    elif spec.kind == "mse_cs":
        l_signed = 2.0 * t - 1.0
        s_hat = 2.0 * stable_sigmoid(spec.c * sigma) - 1.0
        resid = s_hat - l_signed
        values = resid * resid
        grads = resid * spec.c * (1.0 - s_hat * s_hat)
    else:  # hinge
        l_signed = 2.0 * t - 1.0
        margin = l_signed * sigma
        active = margin < spec.delta
        values = np.where(active, spec.delta - margin, 0.0)
        grads = np.where(active, -l_signed, 0.0)
    return float(values.mean()), grads


GRAD_CHECK_FLOOR = 1e-4   # components below this are compared absolutely:
                          # central differences of an O(1) loss at h ~ 1e-6
                          # carry ~eps*|f|/h ~ 1e-9 of rounding noise, so
                          # smaller gradients cannot be resolved relatively.


def check_gradient(spec: LossSpec, score, target: int, h: float = 1e-6) -> float:
    """Max relative error of the analytic gradient against central finite
    differences. Hinge callers must keep the point > 10 h from the kink."""
    score = np.atleast_1d(np.asarray(score, dtype=np.float64))
    analytic = loss_value_grad(spec, score if spec.kind == "sce" else score[0],
                               target).grad
    worst = 0.0
    for i in range(score.size):
        bumped_p = score.copy()
        bumped_m = score.copy()
        bumped_p[i] += h
        bumped_m[i] -= h
        f_p = loss_value_grad(spec, bumped_p if spec.kind == "sce" else bumped_p[0],
                              target).value
        f_m = loss_value_grad(spec, bumped_m if spec.kind == "sce" else bumped_m[0],
                              target).value
        fd = (f_p - f_m) / (2.0 * h)
        denom = max(abs(fd), abs(analytic[i]), GRAD_CHECK_FLOOR)
        worst = max(worst, abs(fd - analytic[i]) / denom)
    return worst


def _check_finite(x) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("loss input must be finite")
