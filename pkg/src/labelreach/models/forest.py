"""Random forest: bootstrapped CART trees with soft voting.

Each tree gets seed + tree_index and a size-N bootstrap drawn over the
dataset's canonical (provenance) row order, so neither thread count nor
the order rows happen to arrive in can change the fitted model.
Probabilities are the mean of the trees' normalized leaf histograms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..prep import PixelDataset
from .base import ForestConfig, canonical_order
from .tree import DecisionTree, grow_tree


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    mtry: int
    seed: int
    n_classes: int
    n_features: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        acc = np.zeros((x.shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.predict_proba(x)
        return acc / len(self.trees)


def fit_random_forest(ds: PixelDataset, cfg: ForestConfig | None = None) -> RandomForestModel:
    cfg = cfg or ForestConfig()
    cfg.validate()
    if len(ds) == 0:
        raise DataError("cannot fit on an empty dataset")
    order = canonical_order(ds)
    x = ds.features[order]
    y = ds.targets[order]
    n = x.shape[0]
    n_classes = int(y.max()) + 1
    mtry = cfg.resolve_mtry(x.shape[1])

    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(cfg.seed + t)
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(x[boot], y[boot], n_classes, cfg, rng))
    return RandomForestModel(
        trees=trees, mtry=mtry, seed=cfg.seed, n_classes=n_classes, n_features=x.shape[1]
    )
