"""Synthetic embedding/label worlds with a closed-form Bayes oracle.

Labels come from the argmax of smoothed white-noise fields, one per
class, which produces contiguous patches. Embeddings are isotropic
Gaussians around per-class means, optionally shifted along a fixed
direction as a linear function of the pixel row. Row position plays the
role of geographic distance, so a nonzero drift creates a controlled
distribution shift between the top and bottom of the grid.

Because the generator is a known Gaussian mixture, the optimal decision
rule is nearest-class-mean after removing the row shift; ``bayes_predict``
implements it exactly and upper-bounds every trainable model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .filters import box_mean
from .grid import EmbeddingRaster, LabelRaster


@dataclass(frozen=True)
class SynthConfig:
    width: int = 128
    height: int = 128
    dims: int = 8
    classes: int = 5
    seed: int = 42
    smooth_radius: int = 6
    sep: float = 4.0
    noise_sigma: float = 0.5
    drift: float = 0.0
    rare_boost: tuple[tuple[int, float], ...] | None = None

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigError("width and height must be >= 1")
        if self.dims < 1:
            raise ConfigError("dims must be >= 1")
        if self.classes < 2:
            raise ConfigError("classes must be >= 2")
        if self.smooth_radius < 0:
            raise ConfigError("smooth_radius must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.rare_boost is not None:
            for cid, w in self.rare_boost:
                if not 0 <= cid < self.classes:
                    raise ConfigError(f"rare_boost class {cid} outside [0, {self.classes})")
                if w <= 0:
                    raise ConfigError("rare_boost weights must be > 0")

    def to_dict(self) -> dict:
        d = {
            "width": self.width,
            "height": self.height,
            "dims": self.dims,
            "classes": self.classes,
            "seed": self.seed,
            "smooth_radius": self.smooth_radius,
            "sep": self.sep,
            "noise_sigma": self.noise_sigma,
            "drift": self.drift,
        }
        if self.rare_boost is not None:
            d["rare_boost"] = [list(p) for p in self.rare_boost]
        return d


@dataclass(frozen=True)
class SynthWorld:
    embeddings: EmbeddingRaster
    labels: LabelRaster
    means: np.ndarray  # (classes, dims) float64
    drift_dir: np.ndarray  # (dims,) unit vector


def class_means(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Means sep * e_(c mod D); mixed by a seeded random orthogonal map when C > D."""
    c, d = config.classes, config.dims
    base = np.zeros((c, d))
    for i in range(c):
        base[i, i % d] = config.sep
    if c <= d:
        return base
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))  # fix signs so the factorization is unique
    return base @ q.T


def generate_world(config: SynthConfig) -> SynthWorld:
    """Deterministic world synthesis; identical config and seed give identical bits."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    h, w, c, d = config.height, config.width, config.classes, config.dims

    fields = rng.standard_normal((c, h, w))
    smoothed = np.stack([box_mean(fields[i], config.smooth_radius) for i in range(c)])
    if config.rare_boost:
        for cid, weight in config.rare_boost:
            smoothed[cid] += np.log(weight)
    labels = np.argmax(smoothed, axis=0).astype(np.uint16)  # argmax ties pick lowest id

    means = class_means(config, rng)

    drift_dir = rng.standard_normal(d)
    norm = np.linalg.norm(drift_dir)
    if norm < 1e-12:
        drift_dir = np.zeros(d)
        drift_dir[0] = 1.0
    else:
        drift_dir = drift_dir / norm

    shift = config.drift * (np.arange(h, dtype=np.float64) / h)
    emb = means[labels]  # (h, w, d)
    emb = emb + shift[:, None, None] * drift_dir
    emb = emb + rng.normal(0.0, config.noise_sigma, size=(h, w, d))

    return SynthWorld(
        embeddings=EmbeddingRaster(np.transpose(emb, (2, 0, 1)).astype(np.float32)),
        labels=LabelRaster(labels),
        means=means,
        drift_dir=drift_dir,
    )


def bayes_predict_batch(
    world: SynthWorld, config: SynthConfig, x: np.ndarray, rows: np.ndarray | Sequence[int]
) -> np.ndarray:
    """Exact Bayes rule for a batch: argmin_c ||x - mu_c - shift(row)||^2, ties to lowest id."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != world.means.shape[1]:
        raise DataError(f"expected (n, {world.means.shape[1]}) features, got shape {x.shape}")
    rows = np.asarray(rows)
    shift = config.drift * (rows.astype(np.float64) / config.height)
    centered = x - shift[:, None] * world.drift_dir
    # ||y - mu_c||^2 expanded; the ||y||^2 term is constant in c and dropped
    scores = -2.0 * centered @ world.means.T + np.sum(world.means**2, axis=1)
    return np.argmin(scores, axis=1).astype(np.uint16)


def bayes_predict(world: SynthWorld, config: SynthConfig, emb_pixel: np.ndarray, row: int) -> int:
    """Optimal class for one embedding vector observed at the given row."""
    return int(bayes_predict_batch(world, config, np.asarray(emb_pixel, dtype=np.float64)[None, :], [row])[0])


def bayes_predict_raster(world: SynthWorld, config: SynthConfig) -> LabelRaster:
    """Bayes prediction for every pixel of the world."""
    h, w = world.labels.height, world.labels.width
    x = world.embeddings.pixel_matrix()
    rows = np.repeat(np.arange(h), w)
    out = bayes_predict_batch(world, config, x, rows).reshape(h, w)
    return LabelRaster(out)
