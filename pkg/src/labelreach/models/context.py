"""Tile-context classifier: the stand-in for a segmentation network.

It keeps the full segmentation training loop (tile iteration, geometric
augmentation, epoch-wise updates, validation early stopping) on top of a
linear core. Per-pixel features are the raw bands concatenated with the
per-band mean over a k x k neighborhood, computed inside each tile with
border windows clipped to the available neighbors. Inference goes
through overlap-tiled prediction like any tile model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..filters import box_mean
from ..grid import NODATA, EmbeddingRaster, LabelRaster, validate_pair
from ..prep import SplitAssignment, SplitKind, tile_arrays
from .base import ContextConfig
from .logreg import LogRegModel, _loss_only, descend


def augment_tile(
    emb_tile: np.ndarray, label_tile: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Apply h-flip, v-flip, rot90, transpose, each with probability 1/2.

    The four draws come from the rng in that fixed order and the same
    transform hits both tiles. Rotation and transpose require square
    tiles.
    """
    if emb_tile.shape[-2:] != label_tile.shape[-2:]:
        raise DataError("embedding and label tiles differ in shape")
    h, w = label_tile.shape[-2:]
    do_h, do_v, do_rot, do_tr = (rng.random() < 0.5 for _ in range(4))
    if (do_rot or do_tr) and h != w:
        raise DataError(f"rotation/transpose need a square tile, got {h}x{w}")
    e, lab = emb_tile, label_tile
    if do_h:
        e, lab = np.flip(e, axis=-1), np.flip(lab, axis=-1)
    if do_v:
        e, lab = np.flip(e, axis=-2), np.flip(lab, axis=-2)
    if do_rot:
        e, lab = np.rot90(e, axes=(-2, -1)), np.rot90(lab, axes=(-2, -1))
    if do_tr:
        e, lab = np.swapaxes(e, -2, -1), np.swapaxes(lab, -2, -1)
    return np.ascontiguousarray(e), np.ascontiguousarray(lab)


def context_features(emb_tile: np.ndarray, window: int) -> np.ndarray:
    """(2D, h, w) feature stack: raw bands plus k x k neighborhood means."""
    radius = (window - 1) // 2
    smoothed = np.stack([box_mean(band, radius) for band in emb_tile])
    return np.concatenate([np.asarray(emb_tile, dtype=np.float64), smoothed], axis=0)


@dataclass
class ContextModel:
    core: LogRegModel
    window: int
    n_features: int  # raw embedding bands (the core sees 2x this)
    training_history: list[float] = field(default_factory=list)
    validation_history: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.core.n_classes

    def predict_tile_proba(self, emb_tile: np.ndarray) -> np.ndarray:
        """Per-pixel probabilities for one (D, h, w) tile; returns (h, w, C)."""
        if emb_tile.shape[0] != self.n_features:
            raise DataError(f"tile has {emb_tile.shape[0]} bands, model expects {self.n_features}")
        feats = context_features(emb_tile, self.window)
        _, h, w = feats.shape
        x = feats.reshape(feats.shape[0], -1).T
        return self.core.predict_proba(x).reshape(h, w, self.core.n_classes)


def _tile_pixels(
    emb_tile: np.ndarray, lab_tile: np.ndarray, window: int
) -> tuple[np.ndarray, np.ndarray]:
    feats = context_features(emb_tile, window)
    mask = lab_tile != NODATA
    rr, cc = np.nonzero(mask)
    return feats[:, rr, cc].T, lab_tile[rr, cc].astype(np.int64)


def _featurize(
    emb: EmbeddingRaster,
    labels: LabelRaster,
    split: SplitAssignment,
    which: SplitKind,
    window: int,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack features over the tiles of one split kind, in row-major tile order."""
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    for col, row in split.tiles_of(which):
        emb_tile, lab_tile = tile_arrays(emb, labels, split.grid, col, row)
        if rng is not None:
            emb_tile, lab_tile = augment_tile(emb_tile, lab_tile, rng)
        x, y = _tile_pixels(emb_tile, lab_tile, window)
        if len(y):
            xs.append(x)
            ys.append(y)
    if not xs:
        raise DataError(f"no unmasked pixels in any {which.name.lower()} tile")
    return np.concatenate(xs, axis=0), np.concatenate(ys, axis=0)


def fit_context(
    emb: EmbeddingRaster,
    labels: LabelRaster,
    split: SplitAssignment,
    cfg: ContextConfig | None = None,
) -> ContextModel:
    """Epoch-wise full-batch training over train tiles with early stopping.

    Each epoch re-materializes the train tiles (augmented when enabled),
    takes one halve-and-rollback gradient step, and evaluates the
    validation loss. Training stops once validation fails to improve for
    `patience` epochs or at the epoch cap; the parameters from the best
    validation epoch are returned.
    """
    cfg = cfg or ContextConfig()
    cfg.validate()
    validate_pair(emb, labels)
    if not split.tiles_of(SplitKind.TRAIN):
        raise DataError("no train tiles in the split")

    rng = np.random.default_rng(cfg.seed)
    x0, y0 = _featurize(emb, labels, split, SplitKind.TRAIN, cfg.window, None)
    if np.unique(y0).size < 2:
        raise DataError("train tiles contain a single class; need at least 2")
    n_classes = int(y0.max()) + 1

    has_val = bool(split.tiles_of(SplitKind.VAL))
    if has_val:
        try:
            xv, yv = _featurize(emb, labels, split, SplitKind.VAL, cfg.window, None)
        except DataError:
            has_val = False
        else:
            keep = yv < n_classes  # classes unseen in training have no loss
            xv, yv = xv[keep], yv[keep]
            has_val = bool(len(yv))

    w = np.zeros((n_classes, x0.shape[1]))
    b = np.zeros(n_classes)
    step = 1.0
    train_hist: list[float] = []
    val_hist: list[float] = []
    best = (np.inf, w.copy(), b.copy())
    stale = 0

    for epoch in range(cfg.epochs):
        if cfg.augment:
            x, y = _featurize(emb, labels, split, SplitKind.TRAIN, cfg.window, rng)
        else:
            x, y = x0, y0
        w, b, hist, step = descend(
            x, y, n_classes, cfg.l2, max_iters=1, tol=0.0, weights=w, bias=b, step=step
        )
        train_hist.append(hist[-1])
        if has_val:
            vloss = _loss_only(w, b, xv, yv, cfg.l2)
            val_hist.append(vloss)
            if vloss < best[0]:
                best = (vloss, w.copy(), b.copy())
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break

    if has_val and np.isfinite(best[0]):
        _, w, b = best
    core = LogRegModel(weights=w, bias=b, training_history=train_hist)
    return ContextModel(
        core=core,
        window=cfg.window,
        n_features=emb.bands,
        training_history=train_hist,
        validation_history=val_hist,
    )
