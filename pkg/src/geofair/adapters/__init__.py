"""Adapters for GeoFair."""

from .clock_utc import UtcClockAdapter
from .hash_sha import Sha256Adapter
from .logger_std import StdLoggerAdapter
from .metrics_logging import LoggingMetricsAdapter
from .metrics_noop import NoopMetricsAdapter
from .store_fs import FsArtifactStore

__all__ = [
    "FsArtifactStore",
    "LoggingMetricsAdapter",
    "NoopMetricsAdapter",
    "Sha256Adapter",
    "StdLoggerAdapter",
    "UtcClockAdapter",
]
