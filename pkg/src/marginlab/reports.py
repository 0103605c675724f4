"""Delimited outputs and the matplotlib figures rendered alongside them.

Every emitter here is deterministic: floats are written with shortest
round-trip repr, and figures pin the SVG hash salt and drop timestamps so a
rerun with identical inputs is byte-identical.
"""

from __future__ import annotations

import csv
import sys
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "marginlab"

_SCORER_COLORS = {"proto-msp": "tab:blue", "knn": "tab:orange",
                  "mahalanobis": "tab:green"}


def fmt(value) -> str:
    """Deterministic CSV field: shortest round-trip for floats."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader if row]


def savefig(fig, path) -> None:
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg")
                else None)
    plt.close(fig)


def histogram_table(scores_id: np.ndarray, scores_ood: np.ndarray,
                    bins: int = 20):
    """Fixed-width bins over the union range; returns (edges, id counts,
    ood counts). All-identical scores produce a single bin and a warning."""
    allsc = np.concatenate([scores_id, scores_ood])
    lo, hi = float(allsc.min()), float(allsc.max())
    if lo == hi:
        warnings.warn("all scores identical; emitting a single-bin histogram")
        edges = np.array([lo, hi])
    else:
        edges = np.linspace(lo, hi, bins + 1)
    counts_id, _ = np.histogram(scores_id, bins=edges)
    counts_ood, _ = np.histogram(scores_ood, bins=edges)
    return edges, counts_id, counts_ood


def render_histogram(scores_id, scores_ood, path, *, bins: int = 20,
                     title: str = "") -> None:
    """Side-by-side ID/OOD score histogram; the x label carries the score
    range so compressed score scales stay visible."""
    edges, counts_id, counts_ood = histogram_table(scores_id, scores_ood, bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = (edges[-1] - edges[0]) / max(len(centers), 1) * 0.42 or 0.4
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.bar(centers - width / 2, counts_id, width=width, label="ID",
           color="tab:blue", alpha=0.8)
    ax.bar(centers + width / 2, counts_ood, width=width, label="OOD",
           color="tab:red", alpha=0.8)
    lo, hi = float(edges[0]), float(edges[-1])
    ax.set_xlabel(f"normality score (range {lo:.6g} to {hi:.6g})")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    savefig(fig, path)


def render_sweep_scatter(points: dict[str, list[tuple[float, float]]],
                         path) -> None:
    """Separation-vs-AUROC scatter, one series per scorer."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for scorer, pts in points.items():
        if not pts:
            continue
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.scatter(xs, ys, s=22, alpha=0.75, label=scorer,
                   color=_SCORER_COLORS.get(scorer))
    ax.set_xlabel("class-separation index of pair features")
    ax.set_ylabel("AUROC")
    ax.legend()
    fig.tight_layout()
    savefig(fig, path)


def render_projection(coords: np.ndarray, labels: np.ndarray, path) -> None:
    """2-D point cloud of pair features colored by same/different label."""
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    for value, name, color in ((1, "same", "tab:blue"),
                               (0, "different", "tab:red")):
        mask = labels == value
        ax.scatter(coords[mask, 0], coords[mask, 1], s=8, alpha=0.6,
                   label=name, color=color)
    ax.set_xlabel("principal direction 1")
    ax.set_ylabel("principal direction 2")
    ax.legend()
    fig.tight_layout()
    savefig(fig, path)


def warn_line(message: str) -> None:
    print(f"marginlab: warning: {message}", file=sys.stderr)
