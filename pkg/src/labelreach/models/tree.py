"""CART classification trees with Gini split search.

Split candidates are midpoints between consecutive distinct sorted
feature values; at each node only a random subsample of `mtry` features
is searched. Ties are broken toward the lowest feature index and then
the lowest threshold, so growth is fully deterministic given the RNG.
A node splits whenever any candidate boundary exists (zero Gini gain is
allowed), which lets unlimited-depth trees memorize their training set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..prep import PixelDataset
from .base import ForestConfig

LEAF = -1


@dataclass
class DecisionTree:
    """Flat-array tree: node i is a leaf iff feature[i] == -1."""

    feature: np.ndarray  # (n_nodes,) int32
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray  # (n_nodes,) int32
    right: np.ndarray  # (n_nodes,) int32
    counts: np.ndarray  # (n_nodes, C) float64 class counts (leaves only)
    n_features: int

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index for every row of x."""
        node = np.zeros(x.shape[0], dtype=np.int32)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while active.size:
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        leaves = self.apply(x)
        c = self.counts[leaves]
        return c / c.sum(axis=1, keepdims=True)


def _best_split(
    x: np.ndarray,
    idx: np.ndarray,
    y_node: np.ndarray,
    feats: np.ndarray,
    n_classes: int,
    min_samples_leaf: int,
) -> tuple[int, float] | None:
    """Deterministic best (feature, threshold) by Gini decrease, or None."""
    n = y_node.shape[0]
    total = np.bincount(y_node, minlength=n_classes).astype(np.int64)
    sum_sq_total = float(np.sum(total.astype(np.float64) ** 2))
    gini_parent = 1.0 - sum_sq_total / (float(n) * float(n))

    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y_node] = 1

    best: tuple[float, int, float] | None = None
    for f in feats:
        xf = x[idx, f]
        order = np.argsort(xf, kind="stable")
        xs = xf[order]
        if xs[0] == xs[-1]:
            continue
        boundary = np.nonzero(xs[1:] != xs[:-1])[0]  # split after position i
        cum = np.cumsum(onehot[order], axis=0)
        nl = boundary + 1
        nr = n - nl
        if min_samples_leaf > 1:
            ok = (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
            if not ok.any():
                continue
            boundary = boundary[ok]
            nl = nl[ok]
            nr = nr[ok]
        lc = cum[boundary].astype(np.float64)
        sl = np.sum(lc**2, axis=1)
        sr = np.sum((total.astype(np.float64) - lc) ** 2, axis=1)
        nlf = nl.astype(np.float64)
        nrf = nr.astype(np.float64)
        child = (nlf - sl / nlf) + (nrf - sr / nrf)
        decrease = gini_parent - child / n
        k = int(np.argmax(decrease))  # first max -> lowest threshold
        if best is None or decrease[k] > best[0]:
            i = boundary[k]
            thr = (xs[i] + xs[i + 1]) / 2.0
            if thr == xs[i + 1]:  # midpoint rounded up to the right value
                thr = float(xs[i])
            best = (float(decrease[k]), int(f), float(thr))
    if best is None:
        return None
    return best[1], best[2]


def grow_tree(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    cfg: ForestConfig,
    rng: np.random.Generator,
) -> DecisionTree:
    """Grow one tree over float64 features x and int targets y."""
    n_features = x.shape[1]
    mtry = cfg.resolve_mtry(n_features)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.zeros(n_classes))
        return len(feature) - 1

    root = new_node()
    # LIFO stack, left child pushed last: deterministic preorder growth
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(x.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        y_node = y[idx]
        hist = np.bincount(y_node, minlength=n_classes).astype(np.float64)
        pure = np.count_nonzero(hist) <= 1
        depth_capped = cfg.max_depth is not None and depth >= cfg.max_depth
        too_small = idx.size < 2 * cfg.min_samples_leaf
        split = None
        if not (pure or depth_capped or too_small):
            if mtry < n_features:
                feats = np.sort(rng.choice(n_features, size=mtry, replace=False))
            else:
                feats = np.arange(n_features)
            split = _best_split(x, idx, y_node, feats, n_classes, cfg.min_samples_leaf)
        if split is None:
            counts[node] = hist
            continue
        f, thr = split
        go_left = x[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        node_l = new_node()
        node_r = new_node()
        left[node] = node_l
        right[node] = node_r
        stack.append((node_r, idx[~go_left], depth + 1))
        stack.append((node_l, idx[go_left], depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        counts=np.vstack(counts),
        n_features=n_features,
    )


def fit_tree(ds: PixelDataset, cfg: ForestConfig | None = None, seed: int = 0) -> DecisionTree:
    """Fit a single CART tree on the dataset with the given RNG seed."""
    cfg = cfg or ForestConfig()
    cfg.validate()
    if len(ds) == 0:
        raise DataError("cannot fit on an empty dataset")
    n_classes = int(ds.targets.max()) + 1
    rng = np.random.default_rng(seed)
    return grow_tree(ds.features, ds.targets, n_classes, cfg, rng)
