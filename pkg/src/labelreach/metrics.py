"""Evaluation: masked confusion matrices, accuracy, macro-averaged
Jaccard and F1, per-class statistics, and band-wise breakdowns.

Macro averages are unweighted means over all C classes, including
zero-support classes (which contribute 0), so rare-class failures are
visible in the headline numbers. Any 0/0 metric is defined as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .grid import LabelRaster

# re-exported for callers iterating bands
from .prep import BandSpec, assign_bands  # noqa: F401


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray  # (C, C) uint64

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.counts, dtype=np.uint64))
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DataError(f"confusion matrix must be square, got shape {c.shape}")
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def write_csv(self, path: str | Path) -> None:
        lines = [",".join(str(c) for c in range(self.n_classes))]
        for row in self.counts:
            lines.append(",".join(str(int(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PerClassStats:
    precision: float
    recall: float
    f1: float
    jaccard: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_jaccard: float
    macro_f1: float
    per_class: tuple[PerClassStats, ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_jaccard": self.macro_jaccard,
            "macro_f1": self.macro_f1,
            "per_class": [
                {
                    "class": i,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "jaccard": s.jaccard,
                    "support": s.support,
                }
                for i, s in enumerate(self.per_class)
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class BandReport:
    """Per-band evaluation result; empty bands are flagged, not errors."""

    band: int
    pixels: int
    report: MetricsReport | None

    @property
    def empty(self) -> bool:
        return self.report is None


def confusion(truth: LabelRaster, pred: LabelRaster, n_classes: int) -> ConfusionMatrix:
    """Count pixels where both rasters are non-nodata; everything else is skipped."""
    if truth.ids.shape != pred.ids.shape:
        raise DataError(
            f"dimension mismatch: truth {truth.width}x{truth.height} vs pred {pred.width}x{pred.height}"
        )
    both = truth.valid_mask() & pred.valid_mask()
    t = truth.ids[both].astype(np.int64)
    p = pred.ids[both].astype(np.int64)
    if t.size and (t.max() >= n_classes or p.max() >= n_classes):
        bad = max(int(t.max()), int(p.max()))
        raise DataError(f"class id {bad} out of range for {n_classes} classes")
    cm = np.bincount(t * n_classes + p, minlength=n_classes * n_classes)
    return ConfusionMatrix(cm.reshape(n_classes, n_classes).astype(np.uint64))


def report(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, per-class P/R/F1/Jaccard, and unweighted macro averages."""
    total = cm.total
    if total == 0:
        raise DataError("cannot report on an empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    rowsum = counts.sum(axis=1)  # true occurrences
    colsum = counts.sum(axis=0)  # predicted occurrences

    def safe(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        out = np.zeros_like(num)
        nz = den > 0
        out[nz] = num[nz] / den[nz]
        return out

    precision = safe(diag, colsum)
    recall = safe(diag, rowsum)
    f1 = safe(2 * precision * recall, precision + recall)
    jaccard = safe(diag, rowsum + colsum - diag)

    per_class = tuple(
        PerClassStats(
            precision=float(precision[c]),
            recall=float(recall[c]),
            f1=float(f1[c]),
            jaccard=float(jaccard[c]),
            support=int(rowsum[c]),
        )
        for c in range(cm.n_classes)
    )
    return MetricsReport(
        accuracy=float(diag.sum() / total),
        macro_jaccard=float(jaccard.mean()),
        macro_f1=float(f1.mean()),
        per_class=per_class,
    )


def evaluate_by_band(
    truth: LabelRaster, pred: LabelRaster, band_of_row: np.ndarray, n_classes: int
) -> list[BandReport]:
    """One confusion matrix and report per band; rows outside all bands are ignored."""
    if truth.ids.shape != pred.ids.shape:
        raise DataError("truth and prediction dimensions differ")
    if band_of_row.shape[0] != truth.height:
        raise DataError(f"band assignment covers {band_of_row.shape[0]} rows, raster has {truth.height}")
    out = []
    n_bands = int(band_of_row.max()) + 1 if band_of_row.size else 0
    for band in range(n_bands):
        rows = np.nonzero(band_of_row == band)[0]
        t = LabelRaster(truth.ids[rows])
        p = LabelRaster(pred.ids[rows])
        cm = confusion(t, p, n_classes)
        if cm.total == 0:
            out.append(BandReport(band=band, pixels=0, report=None))
        else:
            out.append(BandReport(band=band, pixels=cm.total, report=report(cm)))
    return out
