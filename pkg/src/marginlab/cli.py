"""Command-line interface.

Verbs:
    gen          write a seeded synthetic benchmark (pretrain/support/test)
    pretrain     train the pair-relation model under a chosen loss
    evaluate     score a support/test pair with one scorer and report metrics
    r2           measure pair-feature class separation of a checkpoint
    sweep        loss-grid study: train, measure separation, score, summarize
    hist         histogram a scores.csv into CSV + SVG
    crossdomain  paired in-domain / shifted-domain evaluation

Every command is a pure function of (flags, input files): reruns produce
byte-identical outputs. Timing sidecars (timings.csv) are the documented
exception. Errors print one machine-parsable line on stderr and exit 2.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import reports
from .datagen import (BenchmarkConfig, apply_domain_shift, gen_benchmark,
                      make_domain_shift)
from .errors import ConfigError, DataError, MarginlabError
from .experiments import (DEFAULT_GRID, SweepConfig, run_sweep, sweep_workers,
                          trend_summary)
from .losses import parse_loss_spec
from .metrics import auroc, fpr_at_tpr
from .model import (Architecture, TrainConfig, held_out_pairs,
                    load_checkpoint, save_checkpoint, train,
                    training_pairs_replay)
from .numeric import make_rng
from .oodf import EmbeddingSet, read_embedding_set, write_oodf
from .scoring import SCORER_KINDS, derive_ood_mask, evaluate_scorer
from .separation import LabeledFeatureSet, project_2d, r2_of_pairs


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarginlabError as exc:
        print(f"marginlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"marginlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginlab",
        description="Pair-relation pre-training losses, class separation, "
                    "and fine-tuning-free OOD detection at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic benchmark")
    _benchmark_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pretrain", help="train the pair-relation model")
    p.add_argument("--data", required=True,
                   help="pretraining OODF file, or a directory from `gen`")
    _train_flags(p)
    p.add_argument("--out", required=True, help="checkpoint path (.oodm)")
    p.add_argument("--curve", help="optional loss-curve CSV path")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("evaluate", help="run one scorer over support/test")
    p.add_argument("--support", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--checkpoint",
                   help="relational checkpoint; omit to score raw features "
                        "(knn/mahalanobis only)")
    _scorer_flags(p)
    p.add_argument("--out", help="directory for scores.csv and report.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("r2", help="class separation of pair features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True,
                   help="pretraining OODF file, or a directory from `gen`")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the held-out evaluation pairs")
    p.add_argument("--r2-on-train", action="store_true",
                   help="replay the training pair stream instead of "
                        "held-out pairs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_r2)

    p = sub.add_parser("sweep", help="loss-grid sweep with trend summary")
    _benchmark_flags(p, include_seed=False)
    _train_flags(p, include_loss=False, include_seed=False)
    p.add_argument("--losses", default=",".join(DEFAULT_GRID),
                   help="comma-separated loss specs")
    p.add_argument("--seeds", default="0,1,2,3,4",
                   help="comma-separated seeds")
    p.add_argument("--scorers", default=",".join(SCORER_KINDS))
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--r2-pairs", type=int, default=1000)
    p.add_argument("--r2-on-train", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="histogram a scores.csv")
    p.add_argument("--scores", required=True, help="scores.csv from evaluate")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("crossdomain",
                       help="paired in-domain / shifted-domain evaluation")
    _benchmark_flags(p, include_seed=False)
    _train_flags(p, include_seed=False)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--scorers", default=",".join(SCORER_KINDS))
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_crossdomain)
    return parser


def _benchmark_flags(p, include_seed: bool = True) -> None:
    d = BenchmarkConfig()
    if include_seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-dim", type=int, default=d.input_dim)
    p.add_argument("--pretrain-classes", type=int, default=d.n_pretrain_classes)
    p.add_argument("--known-classes", type=int, default=d.n_known_classes)
    p.add_argument("--unknown-classes", type=int, default=d.n_unknown_classes)
    p.add_argument("--pretrain-per-class", type=int, default=d.pretrain_per_class)
    p.add_argument("--support-per-class", type=int, default=d.support_per_class)
    p.add_argument("--test-per-class", type=int, default=d.test_per_class)
    p.add_argument("--mean-scale", type=float, default=d.class_mean_scale)
    p.add_argument("--within-std", type=float, default=d.within_class_std)
    p.add_argument("--shift", action="store_true",
                   help="apply a domain shift to the test split")
    p.add_argument("--shift-no-rotation", action="store_true")
    p.add_argument("--shift-bias-scale", type=float, default=1.0)
    p.add_argument("--shift-noise-std", type=float, default=0.0)
    p.add_argument("--shift-seed", type=int, default=1)


def _train_flags(p, include_loss: bool = True, include_seed: bool = True) -> None:
    d = TrainConfig(loss=parse_loss_spec("bce"))
    if include_loss:
        p.add_argument("--loss", default="mse:c=10",
                       help="bce | sce | focal:g=2 | mse:c=10 | hinge:d=0.01")
    if include_seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", "--lr", type=float, dest="learning_rate",
                   default=d.learning_rate)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--pairs-per-epoch", type=int, default=d.pairs_per_epoch)
    p.add_argument("--grad-clip", type=float, default=d.grad_clip)
    a = Architecture()
    p.add_argument("--h-enc", type=int, default=a.h_enc)
    p.add_argument("--emb-dim", type=int, default=a.emb_dim)
    p.add_argument("--h-head", type=int, default=a.h_head)
    p.add_argument("--pair-dim", type=int, default=a.pair_dim)
    p.add_argument("--score-gain", type=float, default=a.score_gain)
    p.add_argument("--plain-pairs", action="store_true",
                   help="plain concat pair combination instead of the "
                        "symmetric form")


def _benchmark_from_args(args, seed=None) -> BenchmarkConfig:
    cfg = BenchmarkConfig(
        input_dim=args.input_dim,
        n_pretrain_classes=args.pretrain_classes,
        n_known_classes=args.known_classes,
        n_unknown_classes=args.unknown_classes,
        pretrain_per_class=args.pretrain_per_class,
        support_per_class=args.support_per_class,
        test_per_class=args.test_per_class,
        class_mean_scale=args.mean_scale,
        within_class_std=args.within_std,
        seed=args.seed if seed is None else seed,
    )
    if args.shift:
        cfg = replace(cfg, shift=_shift_from_args(args))
    return cfg


def _shift_from_args(args):
    return make_domain_shift(
        args.input_dim, make_rng(args.shift_seed),
        rotate=not args.shift_no_rotation,
        bias_scale=args.shift_bias_scale,
        extra_noise_std=args.shift_noise_std)


def _train_from_args(args, seed=None) -> TrainConfig:
    return TrainConfig(
        loss=parse_loss_spec(args.loss) if hasattr(args, "loss") else
        parse_loss_spec("mse:c=10"),
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        pairs_per_epoch=args.pairs_per_epoch,
        grad_clip=args.grad_clip,
        seed=args.seed if seed is None else seed,
    )


def _arch_from_args(args, input_dim: int) -> Architecture:
    return Architecture(input_dim=input_dim, h_enc=args.h_enc,
                        emb_dim=args.emb_dim, h_head=args.h_head,
                        pair_dim=args.pair_dim,
                        symmetric_pairs=not args.plain_pairs,
                        score_gain=args.score_gain)


def _load_pretrain(path_str: str) -> EmbeddingSet:
    path = Path(path_str)
    if path.is_dir():
        path = path / "pretrain.oodf"
    return read_embedding_set(path)


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = gen_benchmark(_benchmark_from_args(args))
    write_oodf(split.pretrain, out / "pretrain.oodf")
    write_oodf(split.support, out / "support.oodf")
    write_oodf(split.test, out / "test.oodf")
    print(f"gen: wrote pretrain ({split.pretrain.n}), support "
          f"({split.support.n}), test ({split.test.n}, "
          f"{int(split.test_is_ood.sum())} OOD) to {out}")
    return 0


def cmd_pretrain(args) -> int:
    pretrain = _load_pretrain(args.data)
    config = _train_from_args(args)
    arch = _arch_from_args(args, pretrain.dim)
    ckpt, curve = train(config, pretrain, arch)
    save_checkpoint(ckpt, args.out)
    if args.curve:
        reports.write_csv(args.curve, ["epoch", "mean_loss"],
                          list(enumerate(curve)))
    first = curve[0] if curve else float("nan")
    last = curve[-1] if curve else float("nan")
    print(f"pretrain: loss {config.loss.cli_name()} epochs {config.epochs} "
          f"mean loss {first:.6g} -> {last:.6g}, checkpoint {args.out}")
    return 0


def _scorer_flags(p) -> None:
    p.add_argument("--scorer", choices=SCORER_KINDS, default="proto-msp")
    p.add_argument("--k", type=int, default=1, help="k-NN neighbor index")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip L2 normalization in the k-NN scorer")
    p.add_argument("--sce-proto", choices=("same", "margin"), default="same",
                   help="which 2-logit statistic feeds the prototype softmax")
    p.add_argument("--epsilon-scale", type=float, default=1e-3)


def cmd_evaluate(args) -> int:
    support = read_embedding_set(args.support)
    test = read_embedding_set(args.test)
    params = load_checkpoint(args.checkpoint).params if args.checkpoint else None
    report = evaluate_scorer(
        args.scorer, support, test, params, k=args.k,
        normalize=not args.no_normalize,
        sce_logit={"same": "same", "margin": "margin"}[args.sce_proto],
        epsilon_scale=args.epsilon_scale)
    print(f"evaluate: scorer={report.scorer} auroc={report.auroc:.6f} "
          f"fpr@tpr95={report.fpr_at_tpr95:.6f} "
          f"n.comp={report.n_comp_per_test}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_scores_csv(out / "scores.csv", report, support, test)
        reports.write_csv(out / "report.csv",
                          ["scorer", "auroc", "fpr_at_tpr95", "n_comp_per_test"],
                          [[report.scorer, report.auroc, report.fpr_at_tpr95,
                            report.n_comp_per_test]])
    return 0


def _write_scores_csv(path, report, support, test) -> None:
    is_ood = derive_ood_mask(support, test)
    scores = np.empty(test.n)
    scores[~is_ood] = report.scores_id
    scores[is_ood] = report.scores_ood
    rows = [[report.scorer, i, int(is_ood[i]), scores[i]]
            for i in range(test.n)]
    reports.write_csv(path, ["scorer", "sample_index", "is_ood", "score"], rows)


def cmd_r2(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    pretrain = _load_pretrain(args.data)
    if args.r2_on_train:
        pairs = training_pairs_replay(pretrain, ckpt.train_config, args.pairs)
    else:
        pairs = held_out_pairs(pretrain, args.pairs, seed=args.seed)
    sep = r2_of_pairs(ckpt.params, pairs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = ckpt.train_config.loss
    reports.write_csv(
        out / "r2_report.csv",
        ["loss_kind", "hyperparam", "seed", "r2", "d_within", "d_total"],
        [[spec.kind, spec.hyperparam, ckpt.train_config.seed, sep.r2,
          sep.d_within, sep.d_total]])
    from .model import encode, score_pairs
    p, _ = score_pairs(ckpt.params, encode(ckpt.params, pairs.x_i),
                       encode(ckpt.params, pairs.x_j))
    coords = project_2d(LabeledFeatureSet(features=p, class_of=pairs.targets))
    reports.write_csv(out / "projection.csv", ["x", "y", "pair_label"],
                      [[coords[i, 0], coords[i, 1], int(pairs.targets[i])]
                       for i in range(coords.shape[0])])
    reports.render_projection(coords, pairs.targets, out / "projection.svg")
    print(f"r2: loss {spec.cli_name()} r2={sep.r2:.6f} "
          f"d_within={sep.d_within:.6f} d_total={sep.d_total:.6f}")
    return 0


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = SweepConfig(
        losses=[parse_loss_spec(s) for s in args.losses.split(",") if s],
        seeds=[int(s) for s in args.seeds.split(",") if s],
        benchmark=_benchmark_from_args(args, seed=0),
        scorers=[s for s in args.scorers.split(",") if s],
        train=_train_from_args(args, seed=0),
        arch=_arch_from_args(args, args.input_dim),
        r2_pairs=args.r2_pairs,
        r2_on_train=args.r2_on_train,
        k=args.k,
        normalize=not args.no_normalize,
    )

    def progress(cell):
        note = (f"r2={cell.separation.r2:.4f}" if cell.status == "ok"
                else "diverged")
        print(f"sweep: {cell.loss.cli_name()} seed={cell.seed} {note}",
              flush=True)

    cells = run_sweep(config, progress=progress)

    rows, timing_rows = [], []
    points = {scorer: [] for scorer in config.scorers}
    for cell in cells:
        spec = cell.loss
        timing_rows.append([spec.kind, spec.hyperparam, cell.seed,
                            cell.wall_time])
        if cell.status != "ok":
            for scorer in config.scorers:
                rows.append([spec.kind, spec.hyperparam, cell.seed, scorer,
                             None, None, None, None, "diverged"])
            continue
        for scorer in config.scorers:
            rep = cell.reports[scorer]
            rows.append([spec.kind, spec.hyperparam, cell.seed, scorer,
                         cell.separation.r2, rep.auroc, rep.fpr_at_tpr95,
                         rep.n_comp_per_test, "ok"])
            points[scorer].append((cell.separation.r2, rep.auroc))
    reports.write_csv(out / "sweep.csv",
                      ["loss_kind", "hyperparam", "seed", "scorer", "r2",
                       "auroc", "fpr_at_tpr95", "n_comp", "status"], rows)
    reports.write_csv(out / "timings.csv",
                      ["loss_kind", "hyperparam", "seed", "wall_time"],
                      timing_rows)

    summary = trend_summary(cells, config.scorers)
    reports.write_csv(out / "sweep_summary.csv",
                      ["scorer", "spearman_r2_auroc", "sign", "n_ok",
                       "n_diverged", "mean_auroc"],
                      [[s["scorer"], s["spearman_r2_auroc"], s["sign"],
                        s["n_ok"], s["n_diverged"], s["mean_auroc"]]
                       for s in summary])
    reports.render_sweep_scatter(points, out / "sweep_scatter.svg")
    for s in summary:
        print(f"sweep: scorer={s['scorer']} "
              f"spearman(r2, auroc)={s['spearman_r2_auroc']:.4f} "
              f"({s['sign']}), {s['n_ok']} cells ok, "
              f"{s['n_diverged']} diverged")
    if sweep_workers() > 1:
        print(f"sweep: ran with {sweep_workers()} workers (MARGINLAB_THREADS)")
    return 0


def cmd_hist(args) -> int:
    header, rows = reports.read_csv_rows(args.scores)
    expected = ["scorer", "sample_index", "is_ood", "score"]
    if header != expected:
        raise DataError(f"{args.scores}: expected header {','.join(expected)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    by_scorer: dict[str, list[tuple[bool, float]]] = {}
    for row in rows:
        by_scorer.setdefault(row[0], []).append((row[2] == "1", float(row[3])))
    table = []
    for scorer, entries in sorted(by_scorer.items()):
        scores_id = np.array([s for ood, s in entries if not ood])
        scores_ood = np.array([s for ood, s in entries if ood])
        if scores_id.size == 0 or scores_ood.size == 0:
            raise DataError(f"scorer {scorer}: need both ID and OOD scores")
        allsc = np.concatenate([scores_id, scores_ood])
        if float(allsc.min()) == float(allsc.max()):
            reports.warn_line(f"scorer {scorer}: all scores identical, "
                              f"single-bin histogram")
        edges, cid, cood = reports.histogram_table(scores_id, scores_ood,
                                                   args.bins)
        for b in range(len(cid)):
            table.append([scorer, edges[b], edges[b + 1], int(cid[b]),
                          int(cood[b])])
        reports.render_histogram(
            scores_id, scores_ood, out / f"hist_{scorer}.svg",
            bins=args.bins, title=f"{scorer} normality scores")
    reports.write_csv(out / "hist.csv",
                      ["scorer", "bin_lo", "bin_hi", "count_id", "count_ood"],
                      table)
    print(f"hist: wrote {out / 'hist.csv'} and per-scorer SVGs")
    return 0


def cmd_crossdomain(args) -> int:
    if not args.shift:
        args.shift = True   # this command is about the shifted arm
    shift = _shift_from_args(args)
    scorers = [s for s in args.scorers.split(",") if s]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    deltas: dict[str, list[float]] = {s: [] for s in scorers}
    for seed in seeds:
        bench = replace(_benchmark_from_args(args, seed=seed), shift=None)
        split = gen_benchmark(bench)
        shift_rng = make_rng(seed + 7_777_777)
        shifted_test = EmbeddingSet(
            features=apply_domain_shift(split.test.features, shift, shift_rng),
            labels=split.test.labels, ood_flags=split.test.ood_flags)
        config = _train_from_args(args, seed=seed)
        arch = _arch_from_args(args, bench.input_dim)
        ckpt, _ = train(config, split.pretrain, arch)
        for scorer in scorers:
            r_intra = evaluate_scorer(scorer, split.support, split.test,
                                      ckpt.params, k=args.k,
                                      normalize=not args.no_normalize)
            r_cross = evaluate_scorer(scorer, split.support, shifted_test,
                                      ckpt.params, k=args.k,
                                      normalize=not args.no_normalize)
            delta = r_cross.auroc - r_intra.auroc
            deltas[scorer].append(delta)
            rows.append([scorer, seed, r_intra.auroc, r_cross.auroc, delta,
                         r_intra.fpr_at_tpr95, r_cross.fpr_at_tpr95,
                         r_intra.n_comp_per_test])
    reports.write_csv(out / "crossdomain.csv",
                      ["scorer", "seed", "auroc_intra", "auroc_cross",
                       "auroc_delta", "fpr95_intra", "fpr95_cross", "n_comp"],
                      rows)
    for scorer in scorers:
        arr = np.array(deltas[scorer])
        print(f"crossdomain: scorer={scorer} mean auroc delta "
              f"{arr.mean():+.6f} over {len(arr)} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
