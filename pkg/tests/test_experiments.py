import numpy as np
import pytest

from marginlab.datagen import BenchmarkConfig
from marginlab.experiments import (SweepConfig, default_loss_grid, run_cell,
                                   run_sweep, sweep_workers, trend_summary)
from marginlab.losses import parse_loss_spec
from marginlab.model import Architecture, TrainConfig

TINY_SWEEP = dict(
    benchmark=BenchmarkConfig(n_pretrain_classes=6, n_known_classes=5,
                              n_unknown_classes=5, pretrain_per_class=10,
                              support_per_class=8, test_per_class=4),
    train=TrainConfig(loss=parse_loss_spec("bce"), epochs=3, batch_size=32,
                      pairs_per_epoch=64),
    arch=Architecture(input_dim=32, h_enc=32, emb_dim=16, h_head=16,
                      pair_dim=8),
    r2_pairs=128,
)


def test_default_grid_contents():
    grid = default_loss_grid()
    assert len(grid) == 11
    kinds = [g.kind for g in grid]
    assert kinds.count("focal") == 3
    assert kinds.count("mse_cs") == 3
    assert kinds.count("hinge") == 3
    assert {g.delta for g in grid if g.kind == "hinge"} == {1.0, 0.1, 0.01}
    assert {g.c for g in grid if g.kind == "mse_cs"} == {1.0, 10.0, 50.0}
    assert {g.gamma for g in grid if g.kind == "focal"} == {1.0, 2.0, 3.0}


def test_run_cell_produces_reports():
    config = SweepConfig(losses=[parse_loss_spec("bce")], seeds=[0],
                         scorers=["proto-msp", "knn"], **TINY_SWEEP)
    cell = run_cell(config, config.losses[0], 0)
    assert cell.status == "ok"
    assert set(cell.reports) == {"proto-msp", "knn"}
    assert cell.reports["knn"].n_comp_per_test == 40
    assert 0.0 <= cell.reports["proto-msp"].auroc <= 1.0
    assert cell.separation.r2 <= 1.0


def test_run_sweep_cell_count_and_order():
    config = SweepConfig(losses=[parse_loss_spec("bce"),
                                 parse_loss_spec("hinge:d=0.1")],
                         seeds=[0, 1], scorers=["knn"], **TINY_SWEEP)
    cells = run_sweep(config)
    assert [(c.loss.cli_name(), c.seed) for c in cells] == [
        ("bce", 0), ("bce", 1), ("hinge:d=0.1", 0), ("hinge:d=0.1", 1)]


def test_run_sweep_deterministic_across_worker_counts(monkeypatch):
    config = SweepConfig(losses=[parse_loss_spec("bce"),
                                 parse_loss_spec("sce")],
                         seeds=[0, 1], scorers=["knn"], **TINY_SWEEP)
    monkeypatch.delenv("MARGINLAB_THREADS", raising=False)
    seq = run_sweep(config)
    monkeypatch.setenv("MARGINLAB_THREADS", "2")
    assert sweep_workers() == 2
    par = run_sweep(config)
    for a, b in zip(seq, par):
        assert a.loss == b.loss and a.seed == b.seed
        assert a.separation.r2 == b.separation.r2
        assert a.reports["knn"].auroc == b.reports["knn"].auroc


def test_sweep_workers_env_parsing(monkeypatch):
    monkeypatch.delenv("MARGINLAB_THREADS", raising=False)
    assert sweep_workers() == 1
    monkeypatch.setenv("MARGINLAB_THREADS", "4")
    assert sweep_workers() == 4
    monkeypatch.setenv("MARGINLAB_THREADS", "soup")
    with pytest.raises(ValueError):
        sweep_workers()


def test_trend_summary_counts_divergences():
    config = SweepConfig(losses=[parse_loss_spec("sce")], seeds=[0, 1],
                         scorers=["knn"], **TINY_SWEEP)
    cells = run_sweep(config)
    cells[1].status = "diverged"
    cells[1].reports = {}
    summary = trend_summary(cells, ["knn"])
    assert summary[0]["n_ok"] == 1
    assert summary[0]["n_diverged"] == 1
