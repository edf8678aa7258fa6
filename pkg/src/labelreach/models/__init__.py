"""Classifier families behind one contract: fit on pixels or tiles, emit
per-pixel class probabilities."""

from .base import (
    ContextConfig,
    ForestConfig,
    GbtConfig,
    LogRegConfig,
    PixelClassifier,
    canonical_order,
    softmax,
)
from .context import ContextModel, augment_tile, context_features, fit_context
from .forest import RandomForestModel, fit_random_forest
from .gbt import GbtModel, fit_gbt
from .io import check_compatible, load_model, model_family, save_model
from .logreg import LogRegModel, fit_logreg, logreg_loss_and_grad
from .tree import DecisionTree, fit_tree

__all__ = [
    "ContextConfig",
    "ContextModel",
    "DecisionTree",
    "ForestConfig",
    "GbtConfig",
    "GbtModel",
    "LogRegConfig",
    "LogRegModel",
    "PixelClassifier",
    "RandomForestModel",
    "augment_tile",
    "canonical_order",
    "check_compatible",
    "context_features",
    "fit_context",
    "fit_gbt",
    "fit_logreg",
    "fit_random_forest",
    "fit_tree",
    "load_model",
    "logreg_loss_and_grad",
    "model_family",
    "save_model",
    "softmax",
]
