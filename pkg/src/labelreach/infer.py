"""Deployment path: probability rasters and argmax class maps.

Pixel models run directly over the flattened raster. Tile models run on
a sliding grid of tile origins; with stride < tile the tiles overlap and
each pixel's probability vector is the arithmetic mean over every
covering tile, accumulated in row-major tile order and renormalized.
Tile origins near the border are clamped in-bounds (overlapping the
previous tile more) so no data is invented outside the raster.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .grid import NODATA, EmbeddingRaster, LabelRaster, read_grid, write_grid
from .models.io import check_compatible


@dataclass(frozen=True, eq=False)
class ProbabilityRaster:
    """Per-pixel class probabilities, class-sequential planes plus validity."""

    probs: np.ndarray  # (C, H, W) float32
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float32))
        v = np.ascontiguousarray(np.asarray(self.valid, dtype=bool))
        if p.ndim != 3 or v.shape != p.shape[1:]:
            raise DataError(f"probability shape {p.shape} does not match validity {v.shape}")
        p.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "valid", v)

    @property
    def n_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]


def predict_raster_pixelwise(
    model, emb: EmbeddingRaster, mask: LabelRaster | None = None
) -> ProbabilityRaster:
    """predict_proba per pixel; masked (nodata) pixels become invalid zero vectors."""
    check_compatible(model, emb)
    h, w = emb.height, emb.width
    x = emb.pixel_matrix()
    p = model.predict_proba(x).T.reshape(model.n_classes, h, w).astype(np.float32)
    if mask is not None:
        if mask.height != h or mask.width != w:
            raise DataError(f"mask {mask.width}x{mask.height} does not match raster {w}x{h}")
        valid = mask.valid_mask()
        p = p.copy()
        p[:, ~valid] = 0.0
    else:
        valid = np.ones((h, w), dtype=bool)
    return ProbabilityRaster(probs=p, valid=valid)


def tile_origins(extent: int, tile: int, stride: int) -> list[int]:
    """Origins i*stride covering [0, extent); the final origin is clamped in-bounds."""
    xs = list(range(0, extent - tile + 1, stride))
    if xs[-1] != extent - tile:
        xs.append(extent - tile)
    return xs


def predict_raster_tiled(model, emb: EmbeddingRaster, tile: int, stride: int) -> ProbabilityRaster:
    """Overlap-tiled inference with probability averaging.

    Accumulation follows row-major tile order with a fixed summation
    order, so output bits do not depend on scheduling.
    """
    if not 1 <= stride <= tile:
        raise ConfigError(f"stride must satisfy 1 <= stride <= tile, got stride={stride} tile={tile}")
    if tile > emb.width or tile > emb.height:
        raise DataError(f"tile {tile} exceeds raster {emb.width}x{emb.height}")
    check_compatible(model, emb)

    h, w, c = emb.height, emb.width, model.n_classes
    acc = np.zeros((c, h, w), dtype=np.float64)
    cover = np.zeros((h, w), dtype=np.int64)
    for oy in tile_origins(h, tile, stride):
        for ox in tile_origins(w, tile, stride):
            block = emb.values[:, oy : oy + tile, ox : ox + tile].astype(np.float64)
            p = model.predict_tile_proba(block)  # (tile, tile, C)
            acc[:, oy : oy + tile, ox : ox + tile] += np.transpose(p, (2, 0, 1))
            cover[oy : oy + tile, ox : ox + tile] += 1
    mean = acc / cover
    total = mean.sum(axis=0)
    probs = (mean / total).astype(np.float32)
    return ProbabilityRaster(probs=probs, valid=np.ones((h, w), dtype=bool))


class PixelTileAdapter:
    """Lift a pixel model to the tile-model interface."""

    def __init__(self, model):
        self.model = model
        self.n_classes = model.n_classes
        self.n_features = model.n_features

    def predict_tile_proba(self, emb_tile: np.ndarray) -> np.ndarray:
        d, th, tw = emb_tile.shape
        x = emb_tile.reshape(d, -1).T
        return self.model.predict_proba(x).reshape(th, tw, self.n_classes)


def as_tile_model(model):
    """Return a tile-capable view of any classifier."""
    if hasattr(model, "predict_tile_proba"):
        return model
    return PixelTileAdapter(model)


def argmax_map(probs: ProbabilityRaster) -> LabelRaster:
    """Highest-probability class per pixel; ties to the lowest id, invalid to nodata."""
    ids = np.argmax(probs.probs, axis=0).astype(np.uint16)
    ids[~probs.valid] = NODATA
    return LabelRaster(ids)


def write_probability_raster(pr: ProbabilityRaster, path: str | Path) -> None:
    """GRD1 float32 file with bands = C plus a <path>.mask validity bitmap.

    The bitmap is the row-major validity flags bit-packed MSB-first
    (numpy packbits order).
    """
    write_grid(EmbeddingRaster(pr.probs), path)
    Path(str(path) + ".mask").write_bytes(np.packbits(pr.valid.reshape(-1)).tobytes())


def read_probability_raster(path: str | Path) -> ProbabilityRaster:
    grid = read_grid(path)
    if not isinstance(grid, EmbeddingRaster):
        raise DataError(f"{path}: expected a float32 probability raster")
    mask_path = Path(str(path) + ".mask")
    n = grid.height * grid.width
    bits = np.unpackbits(np.frombuffer(mask_path.read_bytes(), dtype=np.uint8))[:n]
    valid = bits.astype(bool).reshape(grid.height, grid.width)
    return ProbabilityRaster(probs=grid.values, valid=valid)
