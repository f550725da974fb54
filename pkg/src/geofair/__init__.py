"""GeoFair - income-fairness toolkit for image classification models."""

try:
    from ._version import version as __version__
except ImportError:
    # Package is not installed, so version is not available
    __version__ = "0.0.0+unknown"

from .core import (
    DEFAULT_INCOME_TABLE,
    Continent,
    ContinentIncomeTable,
    DatasetManifest,
    ExperimentService,
    FairnessReport,
    GeoFairError,
    Method,
    MlpConfig,
    MlpModel,
    Rng,
    Sample,
    SynthConfig,
)

__all__ = [
    "__version__",
    "ExperimentService",
    "GeoFairError",
    # Domain types
    "Continent",
    "ContinentIncomeTable",
    "DEFAULT_INCOME_TABLE",
    "Sample",
    "DatasetManifest",
    "SynthConfig",
    "Method",
    "FairnessReport",
    # Models
    "MlpConfig",
    "MlpModel",
    "Rng",
]
