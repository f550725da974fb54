"""Core domain for GeoFair."""

from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    GeoFairError,
    ManifestParseError,
    NotFoundError,
    NumericError,
    ShapeError,
    StorageIOError,
    ValidationError,
)
from .evaluation import FairnessReport, build_report, topk_hits
from .models import (
    DEFAULT_INCOME_TABLE,
    Continent,
    ContinentIncomeTable,
    DatasetManifest,
    Sample,
    SynthConfig,
)
from .numerics import MlpConfig, MlpModel, Rng
from .service import ExperimentService
from .training import Method

__all__ = [
    "GeoFairError",
    "ValidationError",
    "ShapeError",
    "ConfigError",
    "ManifestParseError",
    "ContractError",
    "NumericError",
    "CheckpointError",
    "StorageIOError",
    "NotFoundError",
    "Continent",
    "ContinentIncomeTable",
    "DEFAULT_INCOME_TABLE",
    "Sample",
    "DatasetManifest",
    "SynthConfig",
    "MlpConfig",
    "MlpModel",
    "Rng",
    "Method",
    "FairnessReport",
    "build_report",
    "topk_hits",
    "ExperimentService",
]
