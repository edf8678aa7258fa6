"""labelreach: extend labeled raster datasets to unlabeled regions.

Train pixel or tile classifiers on embedding rasters, run
overlap-smoothed inference, and evaluate geographic generalization with
macro-averaged metrics. A synthetic world generator with a closed-form
Bayes oracle makes the whole pipeline verifiable end to end.
"""

from .grid import (
    NODATA,
    ClassEntry,
    ClassTable,
    EmbeddingRaster,
    GridFormatError,
    GridManifest,
    LabelRaster,
    read_grid,
    validate_pair,
    write_grid,
)
from .errors import ConfigError, DataError, LabelReachError
from .synth import SynthConfig, SynthWorld, bayes_predict, bayes_predict_raster, generate_world

__version__ = "0.1.0"

__all__ = [
    "NODATA",
    "ClassEntry",
    "ClassTable",
    "ConfigError",
    "DataError",
    "EmbeddingRaster",
    "GridFormatError",
    "GridManifest",
    "LabelRaster",
    "LabelReachError",
    "SynthConfig",
    "SynthWorld",
    "bayes_predict",
    "bayes_predict_raster",
    "generate_world",
    "read_grid",
    "validate_pair",
    "write_grid",
    "__version__",
]
