"""Shared classifier machinery: configs, softmax, canonical row order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..prep import PixelDataset


@runtime_checkable
class PixelClassifier(Protocol):
    """Contract every pixel model family satisfies."""

    n_classes: int
    n_features: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LogRegConfig:
    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-7

    def validate(self) -> None:
        if self.l2 < 0 or self.max_iters < 0 or self.tol < 0:
            raise ValueError("logreg config values must be non-negative")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    mtry: int | None = None  # None -> floor(sqrt(D))
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1 or self.min_samples_leaf < 1:
            raise ValueError("forest config values must be positive")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def resolve_mtry(self, n_features: int) -> int:
        m = self.mtry if self.mtry is not None else int(math.floor(math.sqrt(n_features)))
        return max(1, min(m, n_features))


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_hessian: float = 1e-3
    l2: float = 1.0
    bins: int = 255

    def validate(self) -> None:
        if self.n_rounds < 0 or self.learning_rate < 0:
            raise ValueError("gbt rounds and learning rate must be non-negative")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if not 2 <= self.bins <= 255:
            raise ValueError("bins must be in [2, 255]")
        if self.min_hessian < 0 or self.l2 < 0:
            raise ValueError("regularization values must be non-negative")


@dataclass(frozen=True)
class ContextConfig:
    window: int = 3
    augment: bool = True
    epochs: int = 350
    patience: int = 15
    l2: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("context window must be odd and >= 1")
        if self.epochs < 0 or self.patience < 1:
            raise ValueError("epochs must be >= 0 and patience >= 1")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def canonical_order(ds: PixelDataset) -> np.ndarray:
    """Row permutation restoring provenance order (tile index, then offset).

    Tree-ensemble fits apply this first, so shuffling dataset rows can
    never change a fitted forest or boosted model.
    """
    if ds.provenance is None:
        return np.arange(len(ds))
    return np.lexsort((ds.provenance[:, 1], ds.provenance[:, 0]))
