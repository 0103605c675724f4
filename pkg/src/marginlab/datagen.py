"""Seeded synthetic benchmarks: a pre-training class pool plus a disjoint
evaluation pool split into known (support) and unknown (test-only) classes.

Class means are drawn i.i.d. N(0, class_mean_scale^2 I); samples are
mean + N(0, within_class_std^2 I). An optional domain shift
(x -> R x + bias + noise) is applied to test samples only, so the support
and test sets of a shifted benchmark come from different "domains" while
sharing semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .numeric import spawn_rngs
from .oodf import EmbeddingSet

ORTHO_TOL = 1e-8


@dataclass
class DomainShift:
    rotation: np.ndarray            # (D, D) orthogonal
    bias: np.ndarray                # (D,)
    extra_noise_std: float = 0.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).ravel()
        if self.extra_noise_std < 0:
            raise ConfigError("extra_noise_std must be >= 0")
        d = self.rotation.shape[0]
        if self.rotation.shape != (d, d) or self.bias.shape != (d,):
            raise ConfigError("rotation must be square and match bias length")
        err = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(d)))
        if err > ORTHO_TOL:
            raise ConfigError(f"rotation is not orthogonal (max |R'R - I| = {err:.3g})")


@dataclass
class BenchmarkConfig:
    """Desk-scale defaults: 25 known classes and 164 support samples per class,
    so prototype scorers compare against 25 entries and k-NN against 4100.
    class_mean_scale 0.9 vs unit within-class noise keeps both the pair task
    and the novel-class ranking hard enough that the choice of pre-training
    loss matters."""

    input_dim: int = 32
    n_pretrain_classes: int = 30
    n_known_classes: int = 25
    n_unknown_classes: int = 25
    pretrain_per_class: int = 20
    support_per_class: int = 164
    test_per_class: int = 20
    class_mean_scale: float = 0.9
    within_class_std: float = 1.0
    shift: DomainShift | None = None
    seed: int = 0

    def validate(self) -> None:
        counts = (self.input_dim, self.n_pretrain_classes, self.n_known_classes,
                  self.n_unknown_classes, self.pretrain_per_class,
                  self.support_per_class, self.test_per_class)
        if any(c < 1 for c in counts):
            raise ConfigError("all dimension and count fields must be >= 1")
        if self.n_known_classes < 2:
            raise ConfigError("need at least 2 known classes: MSP over fewer "
                              "than 2 prototypes is degenerate")
        if self.within_class_std <= 0:
            raise ConfigError("within_class_std must be > 0")
        if self.shift is not None and self.shift.rotation.shape[0] != self.input_dim:
            raise ConfigError("shift dimensionality does not match input_dim")


@dataclass
class BenchmarkSplit:
    pretrain: EmbeddingSet
    support: EmbeddingSet
    test: EmbeddingSet

    @property
    def test_is_ood(self) -> np.ndarray:
        return self.test.ood_flags


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like orthogonal matrix: QR of a Gaussian with sign-fixed diagonal."""
    if dim < 1:
        raise ConfigError("dim must be >= 1")
    g = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def make_domain_shift(dim: int, rng: np.random.Generator, *,
                      rotate: bool = True, bias_scale: float = 1.0,
                      extra_noise_std: float = 0.0) -> DomainShift:
    rotation = random_orthogonal(dim, rng) if rotate else np.eye(dim)
    bias = bias_scale * rng.normal(size=dim) if bias_scale != 0 else np.zeros(dim)
    return DomainShift(rotation=rotation, bias=bias, extra_noise_std=extra_noise_std)


def apply_domain_shift(features: np.ndarray, shift: DomainShift,
                       rng: np.random.Generator) -> np.ndarray:
    out = features @ shift.rotation.T + shift.bias
    if shift.extra_noise_std > 0:
        out = out + shift.extra_noise_std * rng.normal(size=features.shape)
    return out


def gen_benchmark(config: BenchmarkConfig) -> BenchmarkSplit:
    """Deterministic per config.seed. Pretrain class ids occupy
    [0, n_pretrain); known ids follow; unknown ids come last, so the
    pre-training and evaluation pools are disjoint by construction."""
    config.validate()
    rng_means, rng_pre, rng_sup, rng_test, rng_shift = spawn_rngs(config.seed, 5)

    n_classes = (config.n_pretrain_classes + config.n_known_classes
                 + config.n_unknown_classes)
    means = config.class_mean_scale * rng_means.normal(
        size=(n_classes, config.input_dim))

    pre_ids = np.arange(config.n_pretrain_classes)
    known_ids = config.n_pretrain_classes + np.arange(config.n_known_classes)
    unknown_ids = (config.n_pretrain_classes + config.n_known_classes
                   + np.arange(config.n_unknown_classes))

    pretrain = _sample_split(means, pre_ids, config.pretrain_per_class,
                             config.within_class_std, rng_pre)
    support = _sample_split(means, known_ids, config.support_per_class,
                            config.within_class_std, rng_sup)
    test = _sample_split(means, np.concatenate([known_ids, unknown_ids]),
                         config.test_per_class, config.within_class_std,
                         rng_test)

    feats = test.features
    if config.shift is not None:
        feats = apply_domain_shift(feats, config.shift, rng_shift)
    test = EmbeddingSet(features=feats, labels=test.labels,
                        ood_flags=np.isin(test.labels, unknown_ids))
    return BenchmarkSplit(pretrain=pretrain, support=support, test=test)


def gen_benchmark_pair(config: BenchmarkConfig) -> tuple[BenchmarkSplit, BenchmarkSplit]:
    """Same benchmark with and without the configured shift: due to separate
    RNG streams the two arms share every pre-shift sample point."""
    if config.shift is None:
        raise ConfigError("gen_benchmark_pair needs a configured shift")
    plain = gen_benchmark(replace(config, shift=None))
    shifted = gen_benchmark(config)
    return plain, shifted


def _sample_split(means: np.ndarray, ids: np.ndarray, per_class: int,
                  std: float, rng: np.random.Generator) -> EmbeddingSet:
    dim = means.shape[1]
    noise = rng.normal(size=(ids.size * per_class, dim))
    feats = np.repeat(means[ids], per_class, axis=0) + std * noise
    labels = np.repeat(ids, per_class)
    return EmbeddingSet(features=feats, labels=labels)
