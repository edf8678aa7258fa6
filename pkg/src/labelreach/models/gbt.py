"""Histogram gradient-boosted trees with multiclass softmax boosting.

Features are pre-bucketed into at most `bins` quantile bins. Every round
fits one regression tree per class on the softmax gradients/hessians,
growing leaf-wise by best gain up to `max_leaves`:

    gain(split) = GL^2/(HL + l2) + GR^2/(HR + l2) - G^2/(H + l2)
    leaf value  = -G/(H + l2)

Raw scores start at the log class priors and each tree adds
learning_rate times its leaf values. Training cross-entropy is recorded
after every round and is non-increasing up to 1e-9 slack.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..prep import PixelDataset
from .base import GbtConfig, canonical_order, log_softmax, softmax
from .tree import LEAF

_PRIOR_FLOOR = 1e-12  # keeps log() finite for class ids absent from training


@dataclass
class RegressionTree:
    """Flat-array regression tree splitting on raw feature thresholds."""

    feature: np.ndarray  # int32, -1 for leaf
    threshold: np.ndarray  # float64 raw-value cut
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64 leaf output

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int32)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while active.size:
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return self.value[node]


@dataclass
class GbtModel:
    base_score: np.ndarray  # (C,) log priors
    learning_rate: float
    rounds: list[list[RegressionTree]]  # one tree per class per round
    cuts: list[np.ndarray]  # per-feature bin cut points
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.base_score.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.cuts)

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        raw = np.tile(self.base_score, (x.shape[0], 1))
        for round_trees in self.rounds:
            for c, tree in enumerate(round_trees):
                raw[:, c] += self.learning_rate * tree.predict(x)
        return raw

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.raw_scores(x))


def quantile_cuts(x: np.ndarray, bins: int) -> list[np.ndarray]:
    """Per-feature cut points from training quantiles, at most bins-1 each."""
    qs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    return [np.unique(np.quantile(x[:, f], qs)).astype(np.float64) for f in range(x.shape[1])]


def bin_features(x: np.ndarray, cuts: list[np.ndarray]) -> np.ndarray:
    """Bin codes; code <= b exactly when value <= cuts[b]."""
    codes = np.empty(x.shape, dtype=np.uint8)
    for f, c in enumerate(cuts):
        codes[:, f] = np.searchsorted(c, x[:, f], side="left").astype(np.uint8)
    return codes


@dataclass(eq=False)
class _Leaf:
    order: int  # creation index; breaks equal-gain ties toward older leaves
    node: int  # slot in the tree arrays
    idx: np.ndarray
    grad_hist: np.ndarray  # (D, nb)
    hess_hist: np.ndarray  # (D, nb)
    g: float
    h: float
    split: tuple[float, int, int] | None = None  # (gain, feature, bin)


def _histograms(
    codes: np.ndarray, idx: np.ndarray, g: np.ndarray, h: np.ndarray, nb: int
) -> tuple[np.ndarray, np.ndarray]:
    gh = np.empty((codes.shape[1], nb))
    hh = np.empty((codes.shape[1], nb))
    for f in range(codes.shape[1]):
        col = codes[idx, f]
        gh[f] = np.bincount(col, weights=g[idx], minlength=nb)
        hh[f] = np.bincount(col, weights=h[idx], minlength=nb)
    return gh, hh


def _best_split(leaf: _Leaf, cfg: GbtConfig) -> tuple[float, int, int] | None:
    """(gain, feature, bin) with the largest gain, or None if nothing helps."""
    gl = np.cumsum(leaf.grad_hist[:, :-1], axis=1)
    if gl.size == 0:
        return None
    hl = np.cumsum(leaf.hess_hist[:, :-1], axis=1)
    gr = leaf.g - gl
    hr = leaf.h - hl
    parent = leaf.g**2 / (leaf.h + cfg.l2)
    gain = gl**2 / (hl + cfg.l2) + gr**2 / (hr + cfg.l2) - parent
    gain[(hl < cfg.min_hessian) | (hr < cfg.min_hessian)] = -np.inf
    flat = int(np.argmax(gain))  # first max: lowest feature, then lowest bin
    best = float(gain.flat[flat])
    if not np.isfinite(best) or best <= 1e-12:
        return None
    nb1 = gain.shape[1]
    return best, flat // nb1, flat % nb1


def grow_regression_tree(
    codes: np.ndarray,
    cuts: list[np.ndarray],
    g: np.ndarray,
    h: np.ndarray,
    cfg: GbtConfig,
    nb: int,
) -> tuple[RegressionTree, np.ndarray]:
    """Leaf-wise growth; returns the tree and each training row's raw output."""
    n = codes.shape[0]
    feature = [LEAF]
    threshold = [0.0]
    left = [LEAF]
    right = [LEAF]
    value = [0.0]

    def alloc() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    all_idx = np.arange(n)
    gh, hh = _histograms(codes, all_idx, g, h, nb)
    root = _Leaf(0, 0, all_idx, gh, hh, g=float(g.sum()), h=float(h.sum()))
    leaves: list[_Leaf] = [root]
    heap: list[tuple[float, int, _Leaf]] = []  # order is unique, leaf never compared

    def offer(leaf: _Leaf) -> None:
        leaf.split = _best_split(leaf, cfg)
        if leaf.split is not None:
            heapq.heappush(heap, (-leaf.split[0], leaf.order, leaf))

    offer(root)
    next_order = 1
    while len(leaves) < cfg.max_leaves and heap:
        _, _, leaf = heapq.heappop(heap)
        _, f, b = leaf.split
        go_left = codes[leaf.idx, f] <= b
        idx_l = leaf.idx[go_left]
        idx_r = leaf.idx[~go_left]

        # histogram subtraction: build the smaller child, derive the sibling
        if idx_l.size <= idx_r.size:
            gh_l, hh_l = _histograms(codes, idx_l, g, h, nb)
            gh_r, hh_r = leaf.grad_hist - gh_l, leaf.hess_hist - hh_l
        else:
            gh_r, hh_r = _histograms(codes, idx_r, g, h, nb)
            gh_l, hh_l = leaf.grad_hist - gh_r, leaf.hess_hist - hh_r

        node_l = alloc()
        node_r = alloc()
        feature[leaf.node] = f
        threshold[leaf.node] = float(cuts[f][b])
        left[leaf.node] = node_l
        right[leaf.node] = node_r

        child_l = _Leaf(next_order, node_l, idx_l, gh_l, hh_l,
                        g=float(g[idx_l].sum()), h=float(h[idx_l].sum()))
        child_r = _Leaf(next_order + 1, node_r, idx_r, gh_r, hh_r,
                        g=float(g[idx_r].sum()), h=float(h[idx_r].sum()))
        next_order += 2
        leaves.remove(leaf)
        leaves.extend([child_l, child_r])
        offer(child_l)
        offer(child_r)

    outputs = np.zeros(n)
    for leaf in leaves:
        v = -leaf.g / (leaf.h + cfg.l2)
        value[leaf.node] = v
        outputs[leaf.idx] = v

    tree = RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )
    return tree, outputs


def fit_gbt(ds: PixelDataset, cfg: GbtConfig | None = None) -> GbtModel:
    """Boost from log-prior base scores; deterministic in the dataset contents."""
    cfg = cfg or GbtConfig()
    cfg.validate()
    if len(ds) == 0:
        raise DataError("cannot fit on an empty dataset")
    if np.unique(ds.targets).size < 2:
        raise DataError("dataset contains a single class; need at least 2")

    order = canonical_order(ds)
    x = ds.features[order]
    y = ds.targets[order]
    n, _ = x.shape
    n_classes = int(y.max()) + 1

    cuts = quantile_cuts(x, cfg.bins)
    codes = bin_features(x, cuts)
    nb = max((len(c) for c in cuts), default=0) + 1

    priors = np.bincount(y, minlength=n_classes) / n
    base = np.log(np.maximum(priors, _PRIOR_FLOOR))
    raw = np.tile(base, (n, 1))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    def mean_ce() -> float:
        return float(-log_softmax(raw)[np.arange(n), y].mean())

    history = [mean_ce()]
    rounds: list[list[RegressionTree]] = []
    for _ in range(cfg.n_rounds):
        p = softmax(raw)
        round_trees = []
        for c in range(n_classes):
            g = p[:, c] - onehot[:, c]
            h = p[:, c] * (1.0 - p[:, c])
            tree, outputs = grow_regression_tree(codes, cuts, g, h, cfg, nb)
            raw[:, c] += cfg.learning_rate * outputs
            round_trees.append(tree)
        rounds.append(round_trees)
        history.append(mean_ce())

    return GbtModel(
        base_score=base,
        learning_rate=cfg.learning_rate,
        rounds=rounds,
        cuts=cuts,
        loss_history=history,
    )
