"""Pytest configuration and fixtures."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from geofair.adapters import (
    FsArtifactStore,
    NoopMetricsAdapter,
    Sha256Adapter,
    StdLoggerAdapter,
    UtcClockAdapter,
)
from geofair.core import ExperimentService
from geofair.core.dataset import generate_synthetic
from geofair.core.models import Continent, DatasetManifest, Sample, SynthConfig
from geofair.core.numerics import MlpConfig, MlpModel, Rng


@pytest.fixture
def temp_dir():
    """Create temporary directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def real_hasher():
    """Create real SHA256 hasher."""
    return Sha256Adapter()


@pytest.fixture
def clock_adapter():
    """Create UTC clock adapter."""
    return UtcClockAdapter()


@pytest.fixture
def logger_adapter():
    """Create logger adapter."""
    return StdLoggerAdapter(level="DEBUG")


@pytest.fixture
def metrics_adapter():
    """Create metrics adapter."""
    return NoopMetricsAdapter()


@pytest.fixture
def store(temp_dir):
    """Artifact store rooted in the temp dir."""
    return FsArtifactStore(temp_dir)


@pytest.fixture
def service(store, real_hasher, clock_adapter, logger_adapter, metrics_adapter):
    """Create ExperimentService with test adapters."""
    return ExperimentService(
        store=store,
        hasher=real_hasher,
        clock=clock_adapter,
        logger=logger_adapter,
        metrics=metrics_adapter,
    )


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def small_synth():
    """A synthetic config small enough for per-test training runs."""
    return SynthConfig(num_classes=4, feature_dim=6, samples_per_run=400, seed=3)


@pytest.fixture
def small_manifest(small_synth) -> DatasetManifest:
    return generate_synthetic(small_synth)


@pytest.fixture
def tiny_model(rng):
    """2-hidden-layer network with narrow layers for gradient checks."""
    config = MlpConfig(input_dim=4, output_dim=3, hidden_dims=(5, 4), dropout_prob=0.0)
    return MlpModel.initialize(config, rng)


def _make_sample(
    sample_id: str,
    income: float | None,
    label: int = 0,
    features=(0.0, 0.0),
    continent: Continent | None = None,
    latitude: float | None = None,
    longitude: float | None = None,
) -> Sample:
    return Sample(
        sample_id=sample_id,
        features=np.asarray(features, dtype=np.float64),
        label=label,
        income=income,
        latitude=latitude,
        longitude=longitude,
        continent=continent,
    )


def _write_config(path: Path, **values) -> Path:
    path.write_text(json.dumps(values), encoding="utf-8")
    return path


@pytest.fixture
def make_sample():
    """Factory for hand-built samples."""
    return _make_sample


@pytest.fixture
def write_config():
    """Write an experiment config JSON file."""
    return _write_config
