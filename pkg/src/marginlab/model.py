"""Pair-relation network: a shared encoder maps inputs to embeddings, a head
maps an embedding pair to a penultimate pair feature and a score.

Shapes (defaults): encoder input_dim -> h_enc -> emb_dim with ReLU after
each affine layer; head concat(z_i, z_j) -> h_head -> pair_dim with ReLU
(the pair_dim activation is the penultimate feature p), then a final affine
map to 1 score (scalar heads) or 2 logits (sce). Pair combination is plain
concatenation by default; the symmetric mode uses
concat(z_i + z_j, |z_i - z_j|) which makes scores order-invariant.

Training is plain SGD with momentum over balanced same/different pair
batches, exact backpropagation, single-threaded, bit-deterministic per
(seed, config, data).

Checkpoint file "OODM" (little-endian): magic, u8 version=1, u32 dim count,
u32 dims [input, h_enc, emb, h_head, pair, out, symmetric], u32 parameter
count, f32 parameters (enc W1,b1,W2,b2, head W1,b1,W2,b2, out W,b; row-major),
u32 JSON length, UTF-8 JSON echo of the train config and final loss.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DataError, DivergedError, FormatError
from .losses import LossSpec, batch_loss, parse_loss_spec
from .numeric import make_rng, spawn_rngs
from .oodf import EmbeddingSet

CKPT_MAGIC = b"OODM"
CKPT_VERSION = 1


@dataclass
class Architecture:
    """Wide encoder + symmetric pair combination by default: a wide random
    ReLU layer keeps the input metric nearly intact at init, and the
    order-invariant pair features make the same/different rule learnable by
    every loss in the sweep grid at comparable budgets.

    score_gain is a fixed output scale that anchors the score's units so the
    loss hyperparameters (margin widths, sigmoid slopes) span their intended
    regimes: without it, the smallest margin in the sweep grid is satisfied
    almost immediately and the steepest sigmoid saturates at init."""

    input_dim: int = 32
    h_enc: int = 256
    emb_dim: int = 128
    h_head: int = 32
    pair_dim: int = 16
    out_dim: int = 1            # 1 for scalar heads, 2 for sce
    symmetric_pairs: bool = True
    score_gain: float = 0.1

    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, self.h_enc, self.emb_dim, self.h_head,
                self.pair_dim, self.out_dim, int(self.symmetric_pairs))


PARAM_NAMES = ("enc_w1", "enc_b1", "enc_w2", "enc_b2",
               "head_w1", "head_b1", "head_w2", "head_b2",
               "out_w", "out_b")


@dataclass
class ModelParams:
    arch: Architecture
    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    def param_arrays(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in PARAM_NAMES]

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, *[a.copy() for a in self.param_arrays()])


@dataclass
class PairBatch:
    """M input pairs with binary targets (1 = same class)."""

    x_i: np.ndarray      # (M, input_dim)
    x_j: np.ndarray
    targets: np.ndarray  # (M,) in {0, 1}

    @property
    def m(self) -> int:
        return self.targets.shape[0]


@dataclass
class TrainConfig:
    loss: LossSpec
    learning_rate: float = 0.03
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 200
    pairs_per_epoch: int = 1024
    grad_clip: float = 1.0      # global update-norm cap; <= 0 disables
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if min(self.batch_size, self.pairs_per_epoch) < 1 or self.epochs < 0:
            raise ValueError("batch_size/pairs_per_epoch >= 1, epochs >= 0")


@dataclass
class Checkpoint:
    params: ModelParams
    train_config: TrainConfig
    final_loss: float
    version: int = CKPT_VERSION


def _glorot_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(arch: Architecture, seed: int) -> ModelParams:
    """Scaled uniform weights, zero biases, seeded.

    The final score map starts at zero so training begins from neutral
    scores for every loss: saturating objectives (compressed-sigmoid MSE
    with large c) keep a live gradient, and margin losses see every pair
    active during the first steps."""
    rng = make_rng(seed)
    pair_in = 2 * arch.emb_dim
    return ModelParams(
        arch=arch,
        enc_w1=_glorot_uniform(rng, arch.input_dim, arch.h_enc),
        enc_b1=np.zeros(arch.h_enc),
        enc_w2=_glorot_uniform(rng, arch.h_enc, arch.emb_dim),
        enc_b2=np.zeros(arch.emb_dim),
        head_w1=_glorot_uniform(rng, pair_in, arch.h_head),
        head_b1=np.zeros(arch.h_head),
        head_w2=_glorot_uniform(rng, arch.h_head, arch.pair_dim),
        head_b2=np.zeros(arch.pair_dim),
        out_w=np.zeros((arch.pair_dim, arch.out_dim)),
        out_b=np.zeros(arch.out_dim),
    )


def encode(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Embed one input vector (length input_dim) or a batch (N, input_dim)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.shape[1] != params.arch.input_dim:
        raise ValueError(f"expected input dim {params.arch.input_dim}, "
                         f"got {batch.shape[1]}")
    z = _encoder_forward(params, batch)[-1]
    return z[0] if single else z


def _encoder_forward(params, x):
    a1 = x @ params.enc_w1 + params.enc_b1
    z1 = np.maximum(a1, 0.0)
    a2 = z1 @ params.enc_w2 + params.enc_b2
    z = np.maximum(a2, 0.0)
    return a1, z1, a2, z


def _combine(params, z_i, z_j):
    if params.arch.symmetric_pairs:
        return np.concatenate([z_i + z_j, np.abs(z_i - z_j)], axis=1)
    return np.concatenate([z_i, z_j], axis=1)


def _head_forward(params, combined):
    a1 = combined @ params.head_w1 + params.head_b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ params.head_w2 + params.head_b2
    p = np.maximum(a2, 0.0)
    score = (p @ params.out_w + params.out_b) * params.arch.score_gain
    return a1, h1, a2, p, score


def score_pairs(params: ModelParams, z_i: np.ndarray, z_j: np.ndarray):
    """Pair features and scores for batches of embeddings (M, emb_dim).

    Returns (p, score): p is (M, pair_dim), the penultimate activation where
    class separation is measured; score is (M,) or (M, 2) for 2-logit heads.
    """
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape or z_i.shape[-1] != params.arch.emb_dim:
        raise ValueError("embedding pair shapes must match the architecture")
    single = z_i.ndim == 1
    if single:
        z_i = z_i.reshape(1, -1)
        z_j = z_j.reshape(1, -1)
    *_, p, score = _head_forward(params, _combine(params, z_i, z_j))
    if params.arch.out_dim == 1:
        score = score[:, 0]
    if single:
        return p[0], (float(score[0]) if params.arch.out_dim == 1 else score[0])
    return p, score


def score_pair(params: ModelParams, z_i: np.ndarray, z_j: np.ndarray):
    return score_pairs(params, z_i, z_j)


def sample_pairs(dataset: EmbeddingSet, m: int, rng: np.random.Generator) -> PairBatch:
    """Balanced batch: ceil(m/2) same-class then floor(m/2) different-class
    pairs; classes drawn uniformly (same-pairs only from classes holding at
    least two samples)."""
    ids = dataset.class_ids()
    if ids.size < 2:
        raise DataError("pair sampling needs at least 2 classes")
    rows = {int(c): dataset.rows_of_class(int(c)) for c in ids}
    eligible = [c for c in ids if rows[int(c)].size >= 2]
    n_same = (m + 1) // 2
    n_diff = m // 2
    if n_same > 0 and not eligible:
        raise DataError("no class holds 2+ samples, cannot draw same-pairs")

    idx_i = np.empty(m, dtype=np.int64)
    idx_j = np.empty(m, dtype=np.int64)
    for k in range(n_same):
        c = int(eligible[rng.integers(len(eligible))])
        pick = rng.choice(rows[c], size=2, replace=False)
        idx_i[k], idx_j[k] = pick
    for k in range(n_same, m):
        ca, cb = rng.choice(ids, size=2, replace=False)
        idx_i[k] = rows[int(ca)][rng.integers(rows[int(ca)].size)]
        idx_j[k] = rows[int(cb)][rng.integers(rows[int(cb)].size)]

    targets = np.zeros(m, dtype=np.int64)
    targets[:n_same] = 1
    return PairBatch(x_i=dataset.features[idx_i], x_j=dataset.features[idx_j],
                     targets=targets)


def forward_backward(params: ModelParams, batch: PairBatch, spec: LossSpec):
    """Mean batch loss and exact gradients for every parameter array.

    Gradients flow through both pair branches and are summed at the shared
    encoder weights (both branches ride one stacked encoder pass).
    Returns (loss, dict name -> grad)."""
    m = batch.m
    stacked_x = np.vstack([batch.x_i, batch.x_j])
    enc = _encoder_forward(params, stacked_x)
    z_i, z_j = enc[-1][:m], enc[-1][m:]
    combined = _combine(params, z_i, z_j)
    a1, h1, a2, p, score = _head_forward(params, combined)

    gain = params.arch.score_gain
    if params.arch.out_dim == 1:
        value, g = batch_loss(spec, score[:, 0], batch.targets)
        d_score = (g / m).reshape(-1, 1) * gain
    else:
        value, g = batch_loss(spec, score, batch.targets)
        d_score = (g / m) * gain

    grads = {}
    grads["out_w"] = p.T @ d_score
    grads["out_b"] = d_score.sum(axis=0)
    d_p = d_score @ params.out_w.T
    d_a2 = d_p * (a2 > 0)
    grads["head_w2"] = h1.T @ d_a2
    grads["head_b2"] = d_a2.sum(axis=0)
    d_h1 = d_a2 @ params.head_w2.T
    d_a1 = d_h1 * (a1 > 0)
    grads["head_w1"] = combined.T @ d_a1
    grads["head_b1"] = d_a1.sum(axis=0)
    d_combined = d_a1 @ params.head_w1.T

    emb = params.arch.emb_dim
    if params.arch.symmetric_pairs:
        d_sum = d_combined[:, :emb]
        d_absdiff = d_combined[:, emb:]
        s = np.sign(z_i - z_j)
        d_zi = d_sum + d_absdiff * s
        d_zj = d_sum - d_absdiff * s
    else:
        d_zi = d_combined[:, :emb]
        d_zj = d_combined[:, emb:]

    for name in ("enc_w1", "enc_b1", "enc_w2", "enc_b2"):
        grads[name] = 0.0
    _encoder_backward(params, stacked_x, enc, np.vstack([d_zi, d_zj]), grads)
    return value, grads


def _encoder_backward(params, x, cache, d_z, grads):
    a1, z1, a2, _ = cache
    d_a2 = d_z * (a2 > 0)
    grads["enc_w2"] = grads["enc_w2"] + z1.T @ d_a2
    grads["enc_b2"] = grads["enc_b2"] + d_a2.sum(axis=0)
    d_z1 = d_a2 @ params.enc_w2.T
    d_a1 = d_z1 * (a1 > 0)
    grads["enc_w1"] = grads["enc_w1"] + x.T @ d_a1
    grads["enc_b1"] = grads["enc_b1"] + d_a1.sum(axis=0)


def train(config: TrainConfig, pretrain: EmbeddingSet,
          arch: Architecture | None = None):
    """SGD with momentum over balanced pair batches.

    Returns (Checkpoint, per-epoch mean losses). Deterministic per seed:
    the weight init and the pair stream use independent child generators of
    config.seed. Aborts with DivergedError when an epoch mean goes
    non-finite."""
    config.validate()
    if arch is None:
        arch = Architecture(input_dim=pretrain.dim)
    arch = replace(arch, out_dim=config.loss.n_logits)
    init_rng_seed, pair_rng = _train_streams(config.seed)
    params = init_params(arch, init_rng_seed)

    velocity = {n: np.zeros_like(getattr(params, n)) for n in PARAM_NAMES}
    n_batches = max(1, -(-config.pairs_per_epoch // config.batch_size))
    curve = []
    for epoch in range(config.epochs):
        epoch_losses = np.empty(n_batches)
        for b in range(n_batches):
            batch = sample_pairs(pretrain, config.batch_size, pair_rng)
            try:
                with np.errstate(over="ignore", invalid="ignore",
                                 under="ignore"):
                    value, grads = forward_backward(params, batch, config.loss)
                    epoch_losses[b] = value
                    scale = 1.0
                    if config.grad_clip > 0:
                        norm = np.sqrt(sum(float(np.sum(g * g))
                                           for g in grads.values()))
                        if norm > config.grad_clip:
                            scale = config.grad_clip / norm
                    for name in PARAM_NAMES:
                        v = (config.momentum * velocity[name]
                             + grads[name] * scale)
                        velocity[name] = v
                        setattr(params, name, getattr(params, name)
                                - config.learning_rate * v)
            except ValueError:
                # exploding weights push scores past float range; the numeric
                # layer rejects non-finite inputs
                raise DivergedError(f"training diverged at epoch {epoch} "
                                    f"(non-finite scores)")
        mean_loss = float(epoch_losses.mean())
        if not np.isfinite(mean_loss):
            raise DivergedError(f"training diverged at epoch {epoch} "
                                f"(loss {mean_loss})")
        curve.append(mean_loss)
    final = curve[-1] if curve else float("nan")
    return Checkpoint(params=params, train_config=config, final_loss=final), curve


def _train_streams(seed: int):
    """Child seeds for weight init and pair sampling."""
    children = np.random.SeedSequence(seed).spawn(2)
    init_seed = int(children[0].generate_state(1)[0])
    pair_rng = np.random.Generator(np.random.PCG64(children[1]))
    return init_seed, pair_rng


def held_out_pairs(pretrain: EmbeddingSet, m: int, seed: int) -> PairBatch:
    """Evaluation pairs from the pre-training distribution, drawn from a
    stream independent of any training seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x9E17])))
    return sample_pairs(pretrain, m, rng)


def training_pairs_replay(pretrain: EmbeddingSet, config: TrainConfig,
                          m: int) -> PairBatch:
    """First m pairs of the exact training stream (the --r2-on-train view)."""
    _, pair_rng = _train_streams(config.seed)
    return sample_pairs(pretrain, m, pair_rng)


def pair_auc_sanity(params: ModelParams, batch: PairBatch) -> float:
    """AUROC of the pair score as a same/different discriminator."""
    from .metrics import auroc

    if batch.m == 0:
        raise ValueError("empty pair batch")
    if len(np.unique(batch.targets)) < 2:
        raise ValueError("pair batch must contain both labels")
    z_i = encode(params, batch.x_i)
    z_j = encode(params, batch.x_j)
    _, score = score_pairs(params, z_i, z_j)
    if params.arch.out_dim == 2:
        score = score[:, 1] - score[:, 0]
    return auroc(score[batch.targets == 1], score[batch.targets == 0])


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    params = ckpt.params
    flat = np.concatenate([a.ravel() for a in params.param_arrays()])
    cfg = asdict(ckpt.train_config)
    cfg["loss"] = ckpt.train_config.loss.cli_name()
    echo = json.dumps({"train_config": cfg, "final_loss": ckpt.final_loss,
                       "score_gain": params.arch.score_gain},
                      sort_keys=True).encode("utf-8")
    dims = params.arch.dims()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<B", ckpt.version))
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<I", flat.size))
        fh.write(flat.astype("<f4").tobytes())
        fh.write(struct.pack("<I", len(echo)))
        fh.write(echo)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()

    def take(offset, count, what):
        if offset + count > len(raw):
            raise FormatError(f"{path}: truncated at byte {len(raw)}, "
                              f"need {offset + count} for {what}")
        return raw[offset : offset + count]

    if take(0, 4, "magic") != CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    version = take(4, 1, "version")[0]
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (n_dims,) = struct.unpack("<I", take(5, 4, "dim count"))
    if n_dims != 7:
        raise FormatError(f"{path}: expected 7 architecture dims, got {n_dims}")
    dims = struct.unpack("<7I", take(9, 28, "dims"))
    off = 37
    (n_params,) = struct.unpack("<I", take(off, 4, "parameter count"))
    off += 4
    flat = np.frombuffer(take(off, 4 * n_params, "parameters"), dtype="<f4")
    off += 4 * n_params
    (json_len,) = struct.unpack("<I", take(off, 4, "config length"))
    off += 4
    echo = json.loads(take(off, json_len, "config echo").decode("utf-8"))
    off += json_len
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes at {off}")

    arch = Architecture(input_dim=dims[0], h_enc=dims[1], emb_dim=dims[2],
                        h_head=dims[3], pair_dim=dims[4], out_dim=dims[5],
                        symmetric_pairs=bool(dims[6]),
                        score_gain=echo.get("score_gain", 1.0))
    params = _unflatten(arch, flat.astype(np.float64))
    cfg = echo["train_config"]
    config = TrainConfig(loss=parse_loss_spec(cfg["loss"]),
                         learning_rate=cfg["learning_rate"],
                         momentum=cfg["momentum"],
                         batch_size=cfg["batch_size"], epochs=cfg["epochs"],
                         pairs_per_epoch=cfg["pairs_per_epoch"],
                         grad_clip=cfg.get("grad_clip", 1.0),
                         seed=cfg["seed"])
    return Checkpoint(params=params, train_config=config,
                      final_loss=echo["final_loss"], version=version)


def _param_shapes(arch: Architecture):
    pair_in = 2 * arch.emb_dim
    return [(arch.input_dim, arch.h_enc), (arch.h_enc,),
            (arch.h_enc, arch.emb_dim), (arch.emb_dim,),
            (pair_in, arch.h_head), (arch.h_head,),
            (arch.h_head, arch.pair_dim), (arch.pair_dim,),
            (arch.pair_dim, arch.out_dim), (arch.out_dim,)]


def _unflatten(arch: Architecture, flat: np.ndarray) -> ModelParams:
    shapes = _param_shapes(arch)
    total = sum(int(np.prod(s)) for s in shapes)
    if flat.size != total:
        raise FormatError(f"parameter count {flat.size} does not match "
                          f"architecture ({total} expected)")
    arrays = []
    off = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[off : off + size].reshape(shape).copy())
        off += size
    return ModelParams(arch, *arrays)
