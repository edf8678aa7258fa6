"""Preprocessing: class inventories, rare-class filtering, remapping,
tiling, seeded tile splits, row-band assignment, and pixel extraction.

The split unit is the tile, not the pixel, which keeps train and
validation data spatially disjoint. All operations are deterministic:
fixed row-major orders plus seeded shuffles, so two runs on the same
inputs produce identical datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .grid import NODATA, ClassEntry, ClassTable, EmbeddingRaster, LabelRaster, validate_pair


class SplitKind(IntEnum):
    TRAIN = 0
    VAL = 1
    TEST = 2
    EXCLUDED = 3


@dataclass(frozen=True)
class RemapTable:
    """Total map from source class ids to dense target ids with target names."""

    pairs: dict[int, int]
    target_names: dict[int, str]

    def __post_init__(self):
        targets = sorted(set(self.pairs.values()))
        if targets and targets != list(range(len(targets))):
            raise DataError(f"remap targets must be dense in [0, C'), got {targets}")
        for t in targets:
            if t not in self.target_names:
                raise DataError(f"remap target {t} has no name")

    @classmethod
    def identity(cls, table: ClassTable) -> "RemapTable":
        return cls({i: i for i in table.ids()}, {e.class_id: e.name for e in table.entries})

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["src_id", "dst_id", "dst_name"])
            for src in sorted(self.pairs):
                dst = self.pairs[src]
                w.writerow([src, dst, self.target_names[dst]])

    @classmethod
    def read_csv(cls, path: str | Path) -> "RemapTable":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or rows[0] != ["src_id", "dst_id", "dst_name"]:
            raise DataError(f"{path}: not a remap CSV")
        pairs = {}
        names = {}
        for r in rows[1:]:
            pairs[int(r[0])] = int(r[1])
            names[int(r[1])] = r[2]
        return cls(pairs, names)


@dataclass(frozen=True)
class TileGrid:
    """Row-major tiling of a width x height raster into square tiles."""

    width: int
    height: int
    tile: int
    cols: int
    rows: int
    includes_partial: bool = True

    @property
    def n_tiles(self) -> int:
        return self.cols * self.rows

    def tile_bounds(self, col: int, row: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) pixel bounds of a tile, clipped to the raster."""
        x0 = col * self.tile
        y0 = row * self.tile
        return x0, y0, min(x0 + self.tile, self.width), min(y0 + self.tile, self.height)

    def tile_index(self, col: int, row: int) -> int:
        return row * self.cols + col


def make_tile_grid(width: int, height: int, tile: int) -> TileGrid:
    if tile < 1:
        raise ConfigError("tile size must be >= 1")
    if width < 1 or height < 1:
        raise DataError(f"cannot tile a zero-size raster ({width}x{height})")
    return TileGrid(
        width=width,
        height=height,
        tile=tile,
        cols=math.ceil(width / tile),
        rows=math.ceil(height / tile),
        includes_partial=True,
    )


@dataclass(frozen=True)
class SplitAssignment:
    """Per-tile split kinds for a tile grid, derived from a seeded shuffle."""

    grid: TileGrid
    kinds: np.ndarray  # (rows, cols) int8 of SplitKind values
    seed: int
    fractions: tuple[float, float]

    def count(self, kind: SplitKind) -> int:
        return int(np.sum(self.kinds == int(kind)))

    def tiles_of(self, kind: SplitKind) -> list[tuple[int, int]]:
        """(col, row) pairs of the requested kind in row-major order."""
        rows, cols = np.nonzero(self.kinds == int(kind))
        return list(zip(cols.tolist(), rows.tolist()))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["tile_col", "tile_row", "kind"])
            for row in range(self.grid.rows):
                for col in range(self.grid.cols):
                    w.writerow([col, row, SplitKind(self.kinds[row, col]).name.lower()])


@dataclass
class PixelDataset:
    """Flat training matrix: one row per unmasked pixel of the selected tiles."""

    features: np.ndarray  # (N, D) float64
    targets: np.ndarray  # (N,) int64 class ids in [0, C)
    provenance: np.ndarray | None = None  # (N, 2) int64: (tile index, in-tile offset)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.targets.max()) + 1 if len(self) else 0


@dataclass(frozen=True)
class BandSpec:
    """Ascending row edges delimiting evaluation bands: band i is [edges[i], edges[i+1])."""

    edges: tuple[int, ...]

    def validate(self, height: int) -> None:
        e = self.edges
        if len(e) < 2:
            raise ConfigError("band spec needs at least two edges")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ConfigError(f"band edges must be strictly ascending, got {list(e)}")
        if e[0] < 0 or e[-1] > height:
            raise ConfigError(f"band edges {list(e)} outside [0, {height}]")

    @property
    def n_bands(self) -> int:
        return len(self.edges) - 1


def histogram_classes(labels: LabelRaster) -> ClassTable:
    """Count every non-nodata pixel; fractions normalize over the non-nodata total."""
    ids = labels.ids[labels.valid_mask()]
    if ids.size == 0:
        raise DataError("label raster has no valid pixels to histogram")
    values, counts = np.unique(ids, return_counts=True)
    total = int(counts.sum())
    entries = [
        ClassEntry(int(v), f"class_{int(v)}", int(n), int(n) / total)
        for v, n in zip(values, counts)
    ]
    return ClassTable(entries)


def filter_rare_classes(
    labels: LabelRaster, table: ClassTable, threshold: float
) -> tuple[LabelRaster, ClassTable, RemapTable]:
    """Mask classes with fraction < threshold and re-index survivors densely."""
    if not 0.0 <= threshold < 1.0:
        raise ConfigError(f"threshold must be in [0, 1), got {threshold}")
    survivors = [e for e in table.entries if e.fraction >= threshold]
    if not survivors:
        raise DataError("rare-class filter would drop every class")

    remap = RemapTable(
        pairs={e.class_id: i for i, e in enumerate(survivors)},
        target_names={i: e.name for i, e in enumerate(survivors)},
    )
    lut = np.full(int(max(table.ids())) + 1, NODATA, dtype=np.uint16)
    for src, dst in remap.pairs.items():
        lut[src] = dst
    out = np.full(labels.ids.shape, NODATA, dtype=np.uint16)
    valid = labels.valid_mask()
    out[valid] = lut[labels.ids[valid]]
    new_labels = LabelRaster(out)

    counts = {e.class_id: e.pixel_count for e in table.entries}
    new_total = sum(counts[e.class_id] for e in survivors)
    new_entries = [
        ClassEntry(i, e.name, counts[e.class_id], counts[e.class_id] / new_total)
        for i, e in enumerate(survivors)
    ]
    return new_labels, ClassTable(new_entries), remap


def remap_classes(labels: LabelRaster, remap: RemapTable) -> LabelRaster:
    """Substitute class ids through the remap; nodata is preserved."""
    valid = labels.valid_mask()
    present = np.unique(labels.ids[valid])
    missing = [int(p) for p in present if int(p) not in remap.pairs]
    if missing:
        raise DataError(f"remap has no entry for class id {missing[0]}")
    lut = np.zeros(int(present.max()) + 1 if present.size else 1, dtype=np.uint16)
    for src, dst in remap.pairs.items():
        if src < lut.size:
            lut[src] = dst
    out = np.full(labels.ids.shape, NODATA, dtype=np.uint16)
    out[valid] = lut[labels.ids[valid]]
    return LabelRaster(out)


def assign_splits(
    grid: TileGrid,
    fractions: tuple[float, float],
    seed: int,
    eligible: Callable[[int, int], bool] | None = None,
) -> SplitAssignment:
    """Seeded shuffle of eligible tiles into Train/Val(/Test) by floor arithmetic.

    Tiles are enumerated in row-major order and permuted with a seeded
    generator. The first floor(train * n) go to Train; when the two
    fractions cover everything the remainder is Val, otherwise Val also
    takes floor(val * n) and the rest becomes Test. Ineligible tiles are
    Excluded.
    """
    f_train, f_val = fractions
    if f_train < 0 or f_val < 0 or f_train + f_val > 1 + 1e-12:
        raise ConfigError(f"split fractions must be non-negative and sum <= 1, got {fractions}")

    order = [
        (col, row)
        for row in range(grid.rows)
        for col in range(grid.cols)
        if eligible is None or eligible(col, row)
    ]
    if not order:
        raise DataError("no eligible tiles to split")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(order))
    shuffled = [order[i] for i in perm]

    n = len(shuffled)
    n_train = math.floor(f_train * n)
    two_way = f_train + f_val >= 1 - 1e-12
    n_val = n - n_train if two_way else math.floor(f_val * n)

    kinds = np.full((grid.rows, grid.cols), int(SplitKind.EXCLUDED), dtype=np.int8)
    for i, (col, row) in enumerate(shuffled):
        if i < n_train:
            kinds[row, col] = int(SplitKind.TRAIN)
        elif i < n_train + n_val:
            kinds[row, col] = int(SplitKind.VAL)
        else:
            kinds[row, col] = int(SplitKind.TEST)
    return SplitAssignment(grid=grid, kinds=kinds, seed=seed, fractions=(f_train, f_val))


def tile_arrays(
    emb: EmbeddingRaster, labels: LabelRaster | None, grid: TileGrid, col: int, row: int
) -> tuple[np.ndarray, np.ndarray | None]:
    """Materialize one tile as full-size (D, t, t) / (t, t) arrays.

    Partial border tiles are padded: labels with the nodata sentinel,
    embeddings with zeros. Padding pixels never reach training because
    the nodata mask excludes them.
    """
    x0, y0, x1, y1 = grid.tile_bounds(col, row)
    t = grid.tile
    emb_tile = np.zeros((emb.bands, t, t), dtype=np.float64)
    emb_tile[:, : y1 - y0, : x1 - x0] = emb.values[:, y0:y1, x0:x1]
    if labels is None:
        return emb_tile, None
    lab_tile = np.full((t, t), NODATA, dtype=np.uint16)
    lab_tile[: y1 - y0, : x1 - x0] = labels.ids[y0:y1, x0:x1]
    return emb_tile, lab_tile


def extract_pixels(
    emb: EmbeddingRaster,
    labels: LabelRaster,
    split: SplitAssignment,
    which: SplitKind,
) -> PixelDataset:
    """All non-nodata pixels of the requested tiles, in deterministic order.

    Rows follow row-major tile order, then row-major order inside each
    tile. Provenance records (tile index, in-tile offset) so a shuffled
    copy of the dataset can be restored to this canonical order.
    """
    validate_pair(emb, labels)
    grid = split.grid
    feats: list[np.ndarray] = []
    targs: list[np.ndarray] = []
    prov: list[np.ndarray] = []
    for row in range(grid.rows):
        for col in range(grid.cols):
            if split.kinds[row, col] != int(which):
                continue
            x0, y0, x1, y1 = grid.tile_bounds(col, row)
            lab = labels.ids[y0:y1, x0:x1]
            mask = lab != NODATA
            if not mask.any():
                continue
            rr, cc = np.nonzero(mask)  # row-major within the tile
            block = emb.values[:, y0:y1, x0:x1]
            feats.append(block[:, rr, cc].T.astype(np.float64))
            targs.append(lab[rr, cc].astype(np.int64))
            idx = grid.tile_index(col, row)
            offsets = rr.astype(np.int64) * grid.tile + cc.astype(np.int64)
            prov.append(np.column_stack([np.full(len(offsets), idx, dtype=np.int64), offsets]))
    if not feats:
        raise DataError(f"no unmasked pixels in any {which.name.lower()} tile")
    return PixelDataset(
        features=np.concatenate(feats, axis=0),
        targets=np.concatenate(targs, axis=0),
        provenance=np.concatenate(prov, axis=0),
    )


def assign_bands(height: int, spec: BandSpec) -> np.ndarray:
    """Band index per row; rows outside every band get -1 (excluded)."""
    spec.validate(height)
    out = np.full(height, -1, dtype=np.int64)
    for i, (lo, hi) in enumerate(zip(spec.edges, spec.edges[1:])):
        out[lo:hi] = i
    return out
