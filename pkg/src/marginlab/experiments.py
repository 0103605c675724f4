"""Sweep orchestration: train the loss grid over seeds, measure separation
and OOD detection per scorer, and summarize the separation-vs-AUROC trend.

Cells are independent (one per loss x seed): each owns its RNG streams and
is bit-deterministic, so cells may run concurrently. MARGINLAB_THREADS caps
the worker count (default 1, fully sequential). Results are merged in grid
order regardless of completion order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import BenchmarkConfig, BenchmarkSplit, gen_benchmark
from .errors import DivergedError
from .losses import LossSpec, parse_loss_spec
from .metrics import spearman
from .model import (Architecture, TrainConfig, held_out_pairs, train,
                    training_pairs_replay)
from .scoring import SCORER_KINDS, EvalReport, evaluate_scorer
from .separation import SeparationReport, r2_of_pairs

DEFAULT_GRID = ("sce", "bce", "focal:g=1", "focal:g=2", "focal:g=3",
                "mse:c=1", "mse:c=10", "mse:c=50",
                "hinge:d=1", "hinge:d=0.1", "hinge:d=0.01")


def default_loss_grid() -> list[LossSpec]:
    return [parse_loss_spec(s) for s in DEFAULT_GRID]


@dataclass
class SweepConfig:
    losses: list[LossSpec] = field(default_factory=default_loss_grid)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    scorers: list[str] = field(default_factory=lambda: list(SCORER_KINDS))
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(loss=parse_loss_spec("bce")))
    arch: Architecture | None = None
    r2_pairs: int = 1000
    r2_on_train: bool = False
    k: int = 1
    normalize: bool = True

    def validate(self) -> None:
        if not self.losses or not self.seeds:
            raise ValueError("sweep needs a nonempty loss grid and seed list")
        for s in self.scorers:
            if s not in SCORER_KINDS:
                raise ValueError(f"unknown scorer {s!r}")


@dataclass
class SweepCell:
    loss: LossSpec
    seed: int
    status: str                       # "ok" | "diverged"
    separation: SeparationReport | None
    reports: dict[str, EvalReport]    # per scorer; empty when diverged
    final_loss: float
    wall_time: float

    @property
    def r2(self) -> float | None:
        return self.separation.r2 if self.separation else None


def run_cell(config: SweepConfig, loss: LossSpec, seed: int,
             split: BenchmarkSplit | None = None) -> SweepCell:
    """One (loss, seed) sweep cell: train, measure separation, score OOD."""
    t0 = time.perf_counter()
    if split is None:
        split = gen_benchmark(replace(config.benchmark, seed=seed))
    train_cfg = replace(config.train, loss=loss, seed=seed)
    try:
        ckpt, _ = train(train_cfg, split.pretrain, config.arch)
    except DivergedError:
        return SweepCell(loss=loss, seed=seed, status="diverged",
                         separation=None, reports={}, final_loss=float("nan"),
                         wall_time=time.perf_counter() - t0)
    if config.r2_on_train:
        pairs = training_pairs_replay(split.pretrain, train_cfg, config.r2_pairs)
    else:
        pairs = held_out_pairs(split.pretrain, config.r2_pairs, seed=seed)
    separation = r2_of_pairs(ckpt.params, pairs)
    reports = {
        scorer: evaluate_scorer(scorer, split.support, split.test, ckpt.params,
                                k=config.k, normalize=config.normalize)
        for scorer in config.scorers
    }
    return SweepCell(loss=loss, seed=seed, status="ok", separation=separation,
                     reports=reports, final_loss=ckpt.final_loss,
                     wall_time=time.perf_counter() - t0)


def sweep_workers() -> int:
    raw = os.environ.get("MARGINLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MARGINLAB_THREADS must be an integer, got {raw!r}")


def run_sweep(config: SweepConfig, progress=None) -> list[SweepCell]:
    """All grid cells in deterministic (loss-major, seed-minor) order.

    Benchmarks are generated once per seed and shared across losses, so the
    per-seed comparisons are paired."""
    config.validate()
    splits = {seed: gen_benchmark(replace(config.benchmark, seed=seed))
              for seed in config.seeds}
    jobs = [(loss, seed) for loss in config.losses for seed in config.seeds]
    workers = sweep_workers()
    if workers == 1:
        cells = []
        for loss, seed in jobs:
            cell = run_cell(config, loss, seed, splits[seed])
            cells.append(cell)
            if progress:
                progress(cell)
        return cells
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_cell, config, loss, seed, splits[seed])
                   for loss, seed in jobs]
        cells = []
        for fut in futures:
            cell = fut.result()
            cells.append(cell)
            if progress:
                progress(cell)
        return cells


def trend_summary(cells: list[SweepCell], scorers: list[str]) -> list[dict]:
    """Per-scorer Spearman correlation between separation and AUROC, with
    divergence accounting."""
    out = []
    for scorer in scorers:
        ok = [c for c in cells if c.status == "ok" and scorer in c.reports]
        r2s = np.array([c.separation.r2 for c in ok])
        aucs = np.array([c.reports[scorer].auroc for c in ok])
        n_div = sum(1 for c in cells if c.status == "diverged")
        if len(ok) >= 3 and np.unique(r2s).size > 1 and np.unique(aucs).size > 1:
            rho = spearman(r2s, aucs)
        else:
            rho = float("nan")
        out.append({
            "scorer": scorer,
            "spearman_r2_auroc": rho,
            "sign": "negative" if rho < 0 else ("positive" if rho > 0 else "flat"),
            "n_ok": len(ok),
            "n_diverged": n_div,
            "mean_auroc": float(aucs.mean()) if len(ok) else float("nan"),
        })
    return out
