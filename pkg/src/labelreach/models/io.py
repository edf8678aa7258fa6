"""Model serialization: one JSON document per fitted model.

Every file carries a format version plus a compatibility tag (family,
n_features, n_classes) that inference checks before running a model on
a raster, refusing feature dimensions it was not trained for.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..grid import EmbeddingRaster
from .base import ContextConfig, ForestConfig, GbtConfig, LogRegConfig
from .context import ContextModel
from .forest import RandomForestModel
from .gbt import GbtModel, RegressionTree
from .logreg import LogRegModel
from .tree import DecisionTree

MODEL_FORMAT_VERSION = 1


def _tree_doc(t: DecisionTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "counts": t.counts.tolist(),
    }


def _tree_from_doc(doc: dict, n_features: int) -> DecisionTree:
    return DecisionTree(
        feature=np.asarray(doc["feature"], dtype=np.int32),
        threshold=np.asarray(doc["threshold"], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int32),
        right=np.asarray(doc["right"], dtype=np.int32),
        counts=np.asarray(doc["counts"], dtype=np.float64),
        n_features=n_features,
    )


def _regtree_doc(t: RegressionTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
    }


def _regtree_from_doc(doc: dict) -> RegressionTree:
    return RegressionTree(
        feature=np.asarray(doc["feature"], dtype=np.int32),
        threshold=np.asarray(doc["threshold"], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int32),
        right=np.asarray(doc["right"], dtype=np.int32),
        value=np.asarray(doc["value"], dtype=np.float64),
    )


def model_family(model) -> str:
    if isinstance(model, LogRegModel):
        return "logreg"
    if isinstance(model, RandomForestModel):
        return "forest"
    if isinstance(model, GbtModel):
        return "gbt"
    if isinstance(model, ContextModel):
        return "context"
    raise DataError(f"unknown model type {type(model).__name__}")


def save_model(model, path: str | Path, config=None) -> None:
    family = model_family(model)
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "family": family,
        "n_features": int(model.n_features),
        "n_classes": int(model.n_classes),
        "config": asdict(config) if config is not None else None,
    }
    if family == "logreg":
        doc["parameters"] = {
            "weights": model.weights.tolist(),
            "bias": model.bias.tolist(),
            "training_history": model.training_history,
        }
    elif family == "forest":
        doc["parameters"] = {
            "mtry": model.mtry,
            "seed": model.seed,
            "trees": [_tree_doc(t) for t in model.trees],
        }
    elif family == "gbt":
        doc["parameters"] = {
            "base_score": model.base_score.tolist(),
            "learning_rate": model.learning_rate,
            "cuts": [c.tolist() for c in model.cuts],
            "rounds": [[_regtree_doc(t) for t in rnd] for rnd in model.rounds],
            "loss_history": model.loss_history,
        }
    elif family == "context":
        doc["parameters"] = {
            "window": model.window,
            "weights": model.core.weights.tolist(),
            "bias": model.core.bias.tolist(),
            "training_history": model.training_history,
            "validation_history": model.validation_history,
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not a model file ({e})") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise DataError(f"{path}: not a model file")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {doc['format_version']}")
    family = doc.get("family")
    params = doc["parameters"]
    if family == "logreg":
        return LogRegModel(
            weights=np.asarray(params["weights"], dtype=np.float64),
            bias=np.asarray(params["bias"], dtype=np.float64),
            training_history=list(params["training_history"]),
        )
    if family == "forest":
        return RandomForestModel(
            trees=[_tree_from_doc(t, doc["n_features"]) for t in params["trees"]],
            mtry=params["mtry"],
            seed=params["seed"],
            n_classes=doc["n_classes"],
            n_features=doc["n_features"],
        )
    if family == "gbt":
        return GbtModel(
            base_score=np.asarray(params["base_score"], dtype=np.float64),
            learning_rate=params["learning_rate"],
            rounds=[[_regtree_from_doc(t) for t in rnd] for rnd in params["rounds"]],
            cuts=[np.asarray(c, dtype=np.float64) for c in params["cuts"]],
            loss_history=list(params["loss_history"]),
        )
    if family == "context":
        core = LogRegModel(
            weights=np.asarray(params["weights"], dtype=np.float64),
            bias=np.asarray(params["bias"], dtype=np.float64),
            training_history=list(params["training_history"]),
        )
        return ContextModel(
            core=core,
            window=params["window"],
            n_features=doc["n_features"],
            training_history=list(params["training_history"]),
            validation_history=list(params["validation_history"]),
        )
    raise DataError(f"{path}: unknown model family {family!r}")


def check_compatible(model, emb: EmbeddingRaster) -> None:
    """Deployment guard: refuse rasters whose band count the model was not trained on."""
    if model.n_features != emb.bands:
        raise DataError(
            f"model expects {model.n_features} bands but raster has {emb.bands}; "
            "refusing to deploy an incompatible model"
        )
