"""Matplotlib figures written next to the delimited report outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .grid import ClassTable
from .metrics import BandReport, ConfusionMatrix, MetricsReport


def save_class_distribution(table: ClassTable, path: str | Path) -> None:
    """Log-scale bar chart of per-class pixel counts."""
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(table)), 4))
    names = [e.name for e in table.entries]
    counts = [max(e.pixel_count, 1) for e in table.entries]
    ax.bar(range(len(table)), counts, color="#4c72b0")
    ax.set_yscale("log")
    ax.set_xticks(range(len(table)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("pixels")
    ax.set_title("Class distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_heatmap(cm: ConfusionMatrix, path: str | Path, names: Sequence[str] | None = None) -> None:
    """Row-normalized confusion heatmap (true class per row)."""
    counts = cm.counts.astype(np.float64)
    rowsum = counts.sum(axis=1, keepdims=True)
    norm = np.divide(counts, rowsum, out=np.zeros_like(counts), where=rowsum > 0)
    n = cm.n_classes
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * n), max(3.5, 0.45 * n)))
    im = ax.imshow(norm, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ticks = list(range(n))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    if names is not None and len(names) == n:
        ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
        ax.set_yticklabels(names, fontsize=7)
    fig.colorbar(im, ax=ax, label="row fraction")
    ax.set_title("Confusion matrix")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_per_class_bars(rep: MetricsReport, path: str | Path, names: Sequence[str] | None = None) -> None:
    """Per-class precision / recall / F1 grouped bars."""
    n = len(rep.per_class)
    idx = np.arange(n)
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * n), 4))
    ax.bar(idx - width, [s.precision for s in rep.per_class], width, label="precision")
    ax.bar(idx, [s.recall for s in rep.per_class], width, label="recall")
    ax.bar(idx + width, [s.f1 for s in rep.per_class], width, label="F1")
    ax.set_xticks(idx)
    labels = names if names is not None and len(names) == n else [str(i) for i in range(n)]
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Per-class metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_band_decay(bands: Sequence[BandReport], path: str | Path) -> None:
    """Accuracy / macro-J / macro-F1 against band index (distance from training rows)."""
    xs = [b.band for b in bands if not b.empty]
    fig, ax = plt.subplots(figsize=(6, 4))
    for attr, label in [("accuracy", "ACC"), ("macro_jaccard", "J"), ("macro_f1", "F1")]:
        ys = [getattr(b.report, attr) for b in bands if not b.empty]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel("band (increasing distance)")
    ax.set_ylabel("score")
    ax.set_xticks(xs)
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Metric decay across bands")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_bars(rows: Sequence[tuple[str, str, MetricsReport]], path: str | Path) -> None:
    """Grouped ACC/J/F1 bars, one group of bars per (model, split)."""
    labels = [f"{m}\n{s}" for m, s, _ in rows]
    idx = np.arange(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, 1.1 * len(rows)), 4))
    ax.bar(idx - width, [r.accuracy for _, _, r in rows], width, label="ACC")
    ax.bar(idx, [r.macro_jaccard for _, _, r in rows], width, label="J")
    ax.bar(idx + width, [r.macro_f1 for _, _, r in rows], width, label="F1")
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Metrics by model and split")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
