"""Run configuration: one JSON document drives the whole pipeline.

Every section is optional with documented defaults; unknown keys are
rejected so typos fail loudly instead of silently running defaults.
CLI flags override config values (flags win).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .models.base import ContextConfig, ForestConfig, GbtConfig, LogRegConfig
from .synth import SynthConfig

FAMILIES = ("logreg", "forest", "gbt", "context")


@dataclass(frozen=True)
class PrepConfig:
    threshold: float = 0.001
    tile: int = 64
    fractions: tuple[float, float] = (0.9, 0.1)
    seed: int = 1234
    remap_path: str | None = None


@dataclass(frozen=True)
class InferConfig:
    stride: int | None = None  # None -> tile // 2 (50% overlap)


@dataclass(frozen=True)
class EvalConfig:
    bands: tuple[int, ...] | None = None  # row edges for band-wise evaluation


@dataclass(frozen=True)
class PathsConfig:
    workdir: str = "."
    manifest: str = "manifest.json"


@dataclass(frozen=True)
class TrainConfig:
    family: str = "logreg"
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    context: ContextConfig = field(default_factory=ContextConfig)

    def for_family(self, family: str):
        if family not in FAMILIES:
            raise ConfigError(f"unknown model family {family!r}; choose one of {', '.join(FAMILIES)}")
        return getattr(self, family)


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    prep: PrepConfig = field(default_factory=PrepConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    infer: InferConfig = field(default_factory=InferConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


def _build(cls, data: dict, where: str):
    """Instantiate a flat dataclass from a JSON mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"section '{where}' must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown key '{key}' in section '{where}'")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in section '{where}': {e}") from None


def _build_train(data: dict) -> TrainConfig:
    if not isinstance(data, dict):
        raise ConfigError("section 'train' must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key == "family":
            if value not in FAMILIES:
                raise ConfigError(f"unknown model family {value!r}; choose one of {', '.join(FAMILIES)}")
            kwargs[key] = value
        elif key == "logreg":
            kwargs[key] = _build(LogRegConfig, value, "train.logreg")
        elif key == "forest":
            kwargs[key] = _build(ForestConfig, value, "train.forest")
        elif key == "gbt":
            kwargs[key] = _build(GbtConfig, value, "train.gbt")
        elif key == "context":
            kwargs[key] = _build(ContextConfig, value, "train.context")
        else:
            raise ConfigError(f"unknown key '{key}' in section 'train'")
    return TrainConfig(**kwargs)


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for key, value in doc.items():
        if key == "synth":
            kwargs[key] = _build(SynthConfig, value, "synth")
        elif key == "prep":
            kwargs[key] = _build(PrepConfig, value, "prep")
        elif key == "train":
            kwargs[key] = _build_train(value)
        elif key == "infer":
            kwargs[key] = _build(InferConfig, value, "infer")
        elif key == "eval":
            kwargs[key] = _build(EvalConfig, value, "eval")
        elif key == "paths":
            kwargs[key] = _build(PathsConfig, value, "paths")
        else:
            raise ConfigError(f"unknown config section '{key}'")
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return parse_config(doc)


def thread_cap() -> int:
    """Parse LABELREACH_THREADS (0 = auto). Compute kernels are sequential and
    deterministic, so the cap never changes results; it exists to bound any
    future worker pools."""
    raw = os.environ.get("LABELREACH_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"LABELREACH_THREADS must be an integer >= 0, got {raw!r}") from None
    if value < 0:
        raise ConfigError(f"LABELREACH_THREADS must be an integer >= 0, got {raw!r}")
    return value
