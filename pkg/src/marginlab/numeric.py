"""Shared numeric kernels: stable nonlinearities, cosine similarity, seeded RNG.

All in-memory arithmetic is float64; interchange files narrow to float32 on
write and widen back on read (see :mod:`marginlab.oodf`).

Randomness comes from numpy's PCG64 bit generator. It is a named, documented
64-bit PRNG whose state round-trips through ``rng_state``/``restore_rng``, and
a fixed seed reproduces the identical stream on every run. RNG instances are
single-owner: never share one between concurrent tasks.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVectorError


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator. Same seed, same stream."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child generators derived deterministically from seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state
    return rng


def require_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


def stable_sigmoid(x):
    """1 / (1 + exp(-x)) without overflow, for scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    require_finite(arr, "sigmoid input")
    out = np.empty_like(arr)
    pos = arr >= 0
    with np.errstate(under="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
        ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def log_sum_exp(v) -> float:
    """log(sum(exp(v))) via max-shift; exact for constant vectors."""
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    require_finite(arr, "log_sum_exp input")
    m = float(arr.max())
    with np.errstate(under="ignore"):
        return m + float(np.log(np.sum(np.exp(arr - m))))


def softmax(v) -> np.ndarray:
    """Softmax along the last axis, invariant to constant shifts."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("softmax of an empty vector")
    require_finite(arr, "softmax input")
    with np.errstate(under="ignore"):
        e = np.exp(arr - arr.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between a and b, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
