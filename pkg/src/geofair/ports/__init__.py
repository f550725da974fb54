"""Port interfaces for GeoFair."""

from .clock import ClockPort
from .hash import HashPort
from .logger import LoggerPort
from .metrics import MetricsPort
from .storage import ArtifactStorePort

__all__ = [
    "ArtifactStorePort",
    "ClockPort",
    "HashPort",
    "LoggerPort",
    "MetricsPort",
]
