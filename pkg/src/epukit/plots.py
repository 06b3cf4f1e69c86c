"""Render figures next to the CSV artifacts.

Every plotting function takes already-computed rows or series (the same
objects the CSV writers consume) and writes a PNG; nothing here changes
numbers. The CSVs stay the canonical outputs, figures are the report
layer on top.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

DPI = 150


def _finish(fig, path: Path | str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def _month_ticks(ax, months: Sequence[str]) -> None:
    step = max(1, len(months) // 8)
    ticks = list(range(0, len(months), step))
    ax.set_xticks(ticks)
    ax.set_xticklabels([months[i] for i in ticks], rotation=45, ha="right", fontsize=8)


def plot_index_series(
    series: Mapping[str, Mapping[str, float]],
    path: Path | str,
    title: str = "EPU index",
    t0: tuple[str, str] | None = None,
) -> None:
    """Line chart of one or more monthly index series on a shared axis."""
    months = sorted({m for values in series.values() for m in values})
    fig, ax = plt.subplots(figsize=(9, 4))
    for label, values in series.items():
        xs = [months.index(m) for m in sorted(values)]
        ys = [values[m] for m in sorted(values)]
        ax.plot(xs, ys, linewidth=1.4, label=label)
    if t0 is not None and t0[0] in months and t0[1] in months:
        ax.axvspan(months.index(t0[0]), months.index(t0[1]), alpha=0.12, color="gray",
                   label="normalization window")
    ax.axhline(100.0, color="black", linewidth=0.6, linestyle="--", alpha=0.5)
    _month_ticks(ax, months)
    ax.set_ylabel("index (mean 100 over T0)")
    ax.set_title(title)
    if len(series) > 1 or t0 is not None:
        ax.legend(fontsize=8)
    _finish(fig, path)


def plot_sweep(rows, path: Path | str) -> None:
    """Positive rate and disagreement-vs-base per dictionary variant."""
    names = [r.variant for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
    ax1.bar(range(len(names)), [r.positive_rate for r in rows], color="tab:blue")
    ax1.set_xticks(range(len(names)))
    ax1.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax1.set_ylabel("positive rate")
    ax2.bar(range(len(names)), [r.disagreement_vs_base for r in rows], color="tab:orange")
    ax2.set_xticks(range(len(names)))
    ax2.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax2.set_ylabel("disagreement vs base")
    fig.suptitle("dictionary sensitivity")
    _finish(fig, path)


def plot_score_histograms(rows, path: Path | str) -> None:
    """Step histograms of predicted probabilities, one per certainty level."""
    levels = sorted({r.certainty for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    for level in levels:
        level_rows = sorted((r for r in rows if r.certainty == level), key=lambda r: r.bin_index)
        xs = [r.lo for r in level_rows] + [level_rows[-1].hi]
        ys = [r.mass for r in level_rows]
        ax.stairs(ys, xs, label=f"certainty {level}")
    ax.set_xlabel("predicted probability")
    ax.set_ylabel("mass")
    ax.set_title("score distribution by auditor certainty")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_certainty_errors(rows, path: Path | str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([str(r.certainty) for r in rows], [r.error_rate for r in rows], color="tab:red")
    ax.set_xlabel("auditor certainty")
    ax.set_ylabel("misclassification rate")
    ax.set_title("errors by certainty")
    _finish(fig, path)


def plot_f1_by_length(rows, path: Path | str) -> None:
    labels = [f"{r.lo}-{r.hi if r.hi is not None else ''}" for r in rows]
    values = [r.f1 if r.f1 is not None else 0.0 for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(labels, values, color="tab:green")
    for bar, row in zip(bars, rows):
        if row.f1 is None:
            bar.set_hatch("//")
            bar.set_alpha(0.3)
    ax.set_xlabel("article length (whitespace tokens)")
    ax.set_ylabel("F1")
    ax.set_title("F1 by article length")
    _finish(fig, path)


def plot_decomposition(
    pred: Mapping[str, float],
    gold: Mapping[str, float],
    errors: Mapping[str, float],
    path: Path | str,
) -> None:
    """Index overlay plus the per-month measurement error."""
    months = sorted(gold)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    ax1.plot(range(len(months)), [gold[m] for m in months], label="gold-label index",
             color="black", linewidth=1.4)
    ax1.plot(range(len(months)), [pred[m] for m in months], label="prediction index",
             color="tab:red", linewidth=1.2, alpha=0.85)
    ax1.set_ylabel("index")
    ax1.legend(fontsize=8)
    ax2.bar(range(len(months)), [errors[m] for m in months], color="tab:gray")
    ax2.axhline(0.0, color="black", linewidth=0.6)
    ax2.set_ylabel("index error e_t")
    _month_ticks(ax2, months)
    fig.suptitle("measurement error decomposition")
    _finish(fig, path)


def plot_roc(points, path: Path | str, title: str = "ROC") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([pt.fpr for pt in points], [pt.tpr for pt in points], marker=".", linewidth=1.2)
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    _finish(fig, path)
