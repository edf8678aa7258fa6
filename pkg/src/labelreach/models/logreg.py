"""Multinomial logistic regression trained by full-batch gradient descent.

The optimizer is deliberately plain: start from zero, take the analytic
gradient step, and whenever the loss would increase, halve the step and
roll back. That guarantees a non-increasing recorded loss history and
removes every tuning knob except the stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..prep import PixelDataset
from .base import LogRegConfig, log_softmax, softmax


@dataclass
class LogRegModel:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    training_history: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(np.asarray(x, dtype=np.float64)))


def _loss_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    n = x.shape[0]
    logp = log_softmax(x @ weights.T + bias)
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(weights**2))
    p = np.exp(logp)
    p[np.arange(n), y] -= 1.0
    grad_w = p.T @ x / n + l2 * weights
    grad_b = p.mean(axis=0)
    return float(loss), grad_w, grad_b


def _loss_only(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    n = x.shape[0]
    logp = log_softmax(x @ weights.T + bias)
    return float(-logp[np.arange(n), y].mean() + 0.5 * l2 * np.sum(weights**2))


def logreg_loss_and_grad(
    model: LogRegModel, ds: PixelDataset, l2: float
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Softmax cross-entropy with L2 on the weights (not the bias) and its exact gradient."""
    if len(ds) == 0:
        raise DataError("empty dataset")
    if ds.n_features != model.n_features:
        raise DataError(f"feature dim {ds.n_features} does not match model ({model.n_features})")
    loss, gw, gb = _loss_grad(model.weights, model.bias, ds.features, ds.targets, l2)
    return loss, (gw, gb)


def descend(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    l2: float,
    max_iters: int,
    tol: float,
    weights: np.ndarray | None = None,
    bias: np.ndarray | None = None,
    history: list[float] | None = None,
    step: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, list[float], float]:
    """Gradient descent with halve-and-rollback step control.

    Returns the parameters, the accepted-loss history (including the
    starting loss), and the final step size so callers iterating over
    epochs can carry the step across calls.
    """
    d = x.shape[1]
    w = np.zeros((n_classes, d)) if weights is None else weights.copy()
    b = np.zeros(n_classes) if bias is None else bias.copy()
    hist = [] if history is None else history

    loss, gw, gb = _loss_grad(w, b, x, y, l2)
    if not hist:
        hist.append(loss)
    for _ in range(max_iters):
        while True:
            w2 = w - step * gw
            b2 = b - step * gb
            trial = _loss_only(w2, b2, x, y, l2)
            if trial <= loss or step < 1e-16:
                break
            step *= 0.5
        if trial > loss:  # step underflowed without improvement
            break
        w, b = w2, b2
        improved = loss - trial
        loss = trial
        hist.append(loss)
        if improved < tol * max(1.0, abs(loss)):
            break
        _, gw, gb = _loss_grad(w, b, x, y, l2)
    return w, b, hist, step


def fit_logreg(ds: PixelDataset, cfg: LogRegConfig | None = None) -> LogRegModel:
    """Fit from zero init on the full batch; see `descend` for the step rule."""
    cfg = cfg or LogRegConfig()
    cfg.validate()
    if len(ds) == 0:
        raise DataError("cannot fit on an empty dataset")
    classes = np.unique(ds.targets)
    if classes.size < 2:
        raise DataError("dataset contains a single class; need at least 2")
    n_classes = int(ds.targets.max()) + 1
    w, b, hist, _ = descend(ds.features, ds.targets, n_classes, cfg.l2, cfg.max_iters, cfg.tol)
    return LogRegModel(weights=w, bias=b, training_history=hist)
