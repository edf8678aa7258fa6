"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 2,
DataError -> 3, plain OSError -> 1.
"""


class LabelReachError(ValueError):
    """Base class for all labelreach errors."""


class ConfigError(LabelReachError):
    """Invalid configuration value, unknown config key, or bad CLI option."""


class DataError(LabelReachError):
    """Inputs are structurally valid but unusable: dimension mismatches,
    degenerate datasets, incompatible models, malformed data files."""
