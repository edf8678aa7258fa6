"""Human-readable artifacts: metric tables, per-class listings, class maps.

Tables round half-up to 2 decimals; the CSVs keep 4 decimals so values
stay testable. Class maps are binary PPM (P6), which is bit-exact and
needs no imaging dependency.
"""

from __future__ import annotations

import colorsys
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .grid import NODATA, ClassTable, LabelRaster
from .metrics import MetricsReport

NODATA_COLOR = (0, 0, 0)


@dataclass(frozen=True)
class Palette:
    """Total class_id -> RGB map; nodata renders black."""

    colors: dict[int, tuple[int, int, int]] = field(default_factory=dict)

    def color(self, class_id: int) -> tuple[int, int, int]:
        if class_id == NODATA:
            return NODATA_COLOR
        if class_id not in self.colors:
            raise DataError(f"palette has no color for class {class_id}")
        return self.colors[class_id]

    @classmethod
    def default(cls, class_ids: Sequence[int]) -> "Palette":
        """Deterministic palette: golden-angle hue walk, fixed sat/value."""
        colors = {}
        for i, cid in enumerate(sorted(class_ids)):
            hue = (i * 0.6180339887498949) % 1.0
            r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.92)
            colors[cid] = (round(r * 255), round(g * 255), round(b * 255))
        return cls(colors)


def round2(value: float) -> str:
    """Round half-up to 2 decimals, as the tables print it."""
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def metrics_table(rows: Sequence[tuple[str, str, MetricsReport]]) -> str:
    """Markdown table: one row per model, ACC/J/F1 columns grouped per split."""
    if not rows:
        raise DataError("metrics table needs at least one row")
    splits: list[str] = []
    models: list[str] = []
    cell: dict[tuple[str, str], MetricsReport] = {}
    for model, split, rep in rows:
        if split not in splits:
            splits.append(split)
        if model not in models:
            models.append(model)
        cell[(model, split)] = rep

    header = ["Model"]
    for s in splits:
        header += [f"{s} ACC", f"{s} J", f"{s} F1"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for m in models:
        row = [m]
        for s in splits:
            rep = cell.get((m, s))
            if rep is None:
                row += ["-", "-", "-"]
            else:
                row += [round2(rep.accuracy), round2(rep.macro_jaccard), round2(rep.macro_f1)]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def render_class_map(labels: LabelRaster, palette: Palette) -> bytes:
    """Binary PPM (P6), 8-bit RGB, row-major; bit-exact for given inputs."""
    ids = labels.ids
    h, w = ids.shape
    values = np.unique(ids)
    lut = np.zeros((int(values.max()) + 1 if values.size else 1, 3), dtype=np.uint8)
    for v in values:
        lut[v] = palette.color(int(v))
    out = io.BytesIO()
    out.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
    out.write(lut[ids].tobytes())
    return out.getvalue()


def write_class_map(labels: LabelRaster, palette: Palette, path: str | Path) -> None:
    Path(path).write_bytes(render_class_map(labels, palette))


def per_class_csv(rep: MetricsReport, table: ClassTable) -> str:
    """CSV of per-class metrics joined with the class table, 4-decimal values."""
    if len(rep.per_class) != len(table):
        raise DataError(
            f"report covers {len(rep.per_class)} classes but table has {len(table)}"
        )
    lines = ["class_id,name,support,precision,recall,f1,jaccard"]
    for entry, stats in zip(table.entries, rep.per_class):
        lines.append(
            f"{entry.class_id},{entry.name},{stats.support},"
            f"{stats.precision:.4f},{stats.recall:.4f},{stats.f1:.4f},{stats.jaccard:.4f}"
        )
    return "\n".join(lines) + "\n"
