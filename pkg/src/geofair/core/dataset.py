"""Income binning, threshold resampling, the synthetic generator and holdouts."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..ports.hash import HashPort
from .errors import ValidationError
from .geo import continent_for_income
from .models import (
    DEFAULT_INCOME_TABLE,
    ContinentIncomeTable,
    DatasetManifest,
    IncomeBinning,
    Sample,
    SynthConfig,
)
from .numerics import Rng

DEFAULT_BIN_WIDTH = 300.0
DEFAULT_SAMPLING_THRESHOLD = 5000
DEFAULT_HOLDOUT_FRACTION = 0.2
CLASS_MEAN_RADIUS = 3.0

# Child stream keys of the synthetic generator.
_MEANS, _LABELS, _INCOMES, _NOISE, _DIRECTION, _SHIFT_NOISE = range(1, 7)


def bin_by_income(manifest: DatasetManifest, bin_width: float = DEFAULT_BIN_WIDTH) -> IncomeBinning:
    """Assign every sample to bin floor(income / bin_width)."""
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise ValidationError(f"bin_width must be positive, got {bin_width}")
    incomes = manifest.incomes
    assignment = np.floor(incomes / bin_width).astype(np.int64)
    members: dict[int, list[int]] = defaultdict(list)
    for index, bin_index in enumerate(assignment.tolist()):
        members[bin_index].append(index)
    return IncomeBinning(
        bin_width=bin_width,
        assignment=tuple(assignment.tolist()),
        bins={b: tuple(members[b]) for b in sorted(members)},
    )


def draw_resample_indices(
    binning: IncomeBinning, threshold: int, rng: Rng
) -> dict[int, list[int]]:
    """Per-bin sample indices after balancing every bin to ``threshold``.

    Larger bins are undersampled without replacement, smaller ones
    oversampled with replacement. A bin already at the threshold comes back
    as a permutation of its members.
    """
    if threshold < 1:
        raise ValidationError(f"sampling threshold must be >= 1, got {threshold}")
    drawn: dict[int, list[int]] = {}
    for bin_index, members in binning.bins.items():
        population = np.asarray(members, dtype=np.int64)
        if len(members) == threshold:
            picks = population[rng.permutation(threshold)]
        else:
            picks = rng.choice(population, threshold, replace=len(members) < threshold)
        drawn[bin_index] = [int(i) for i in picks]
    return drawn


def resample_to_threshold(
    manifest: DatasetManifest,
    binning: IncomeBinning,
    threshold: int = DEFAULT_SAMPLING_THRESHOLD,
    rng: Rng | None = None,
) -> DatasetManifest:
    """Flatten the income histogram: exactly ``threshold`` samples per non-empty bin.

    Output is bin-major in ascending bin order, then draw order.
    """
    if len(manifest) == 0:
        raise ValidationError("cannot resample an empty manifest")
    if len(binning.assignment) != len(manifest):
        raise ValidationError("binning does not belong to this manifest")
    drawn = draw_resample_indices(binning, threshold, rng or Rng(0))
    return manifest.subset(index for bin_index in sorted(drawn) for index in drawn[bin_index])


def class_probabilities(num_classes: int, imbalance_exponent: float) -> np.ndarray:
    weights = np.arange(1, num_classes + 1, dtype=np.float64) ** (-imbalance_exponent)
    return weights / weights.sum()


def synthetic_class_means(config: SynthConfig) -> np.ndarray:
    """Class centroids on a sphere of radius 3, one row per class."""
    rng = Rng(config.seed).child(_MEANS)
    raw = rng.normal((config.num_classes, config.feature_dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return CLASS_MEAN_RADIUS * raw / norms


def generate_synthetic(
    config: SynthConfig, table: ContinentIncomeTable = DEFAULT_INCOME_TABLE
) -> DatasetManifest:
    """Seeded benchmark where lower income means a larger domain shift.

    Samples below the median income are rotated by ``shift_strength * pi/12``
    in the plane of features 0 and 1, translated by ``shift_strength`` along a
    fixed unit direction and given extra noise of standard deviation
    ``shift_strength * (1 - income / median)``.
    """
    root = Rng(config.seed)
    n, dim = config.samples_per_run, config.feature_dim
    means = synthetic_class_means(config)

    probs = class_probabilities(config.num_classes, config.imbalance_exponent)
    labels = root.child(_LABELS).choice(np.arange(config.num_classes), n, replace=True, p=probs)

    low, high = config.income_range
    incomes = np.exp(root.child(_INCOMES).uniform(math.log(low), math.log(high), n))
    features = means[labels] + root.child(_NOISE).normal((n, dim))

    direction = root.child(_DIRECTION).normal(dim)
    direction /= np.linalg.norm(direction)
    shift_noise = root.child(_SHIFT_NOISE).normal((n, dim))

    median = float(np.median(incomes))
    shifted = incomes < median
    if config.shift_strength > 0 and shifted.any():
        angle = config.shift_strength * math.pi / 12.0
        cos, sin = math.cos(angle), math.sin(angle)
        x0 = features[shifted, 0].copy()
        x1 = features[shifted, 1].copy()
        features[shifted, 0] = cos * x0 - sin * x1
        features[shifted, 1] = sin * x0 + cos * x1
        features[shifted] += config.shift_strength * direction
        scale = config.shift_strength * (1.0 - incomes[shifted] / median)
        features[shifted] += shift_noise[shifted] * scale[:, None]

    samples = []
    for index in range(n):
        income = float(incomes[index])
        samples.append(
            Sample(
                sample_id=f"s{index:06d}",
                features=features[index],
                label=int(labels[index]),
                income=income,
                continent=continent_for_income(income, table) if config.assign_continents else None,
            )
        )
    return DatasetManifest(
        samples=tuple(samples), num_classes=config.num_classes, feature_dim=dim
    )


def in_holdout(sample_id: str, hasher: HashPort, fraction: float = DEFAULT_HOLDOUT_FRACTION) -> bool:
    """Validation membership from the first 8 hex digits of sha256(id)."""
    bucket = int(hasher.sha256_text(sample_id)[:8], 16) % 100
    return bucket < round(fraction * 100)


def holdout_split(
    manifest: DatasetManifest,
    hasher: HashPort,
    fraction: float = DEFAULT_HOLDOUT_FRACTION,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic (train, validation) split by hashed sample id."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"holdout fraction must be in (0, 1), got {fraction}")
    train: list[Sample] = []
    validation: list[Sample] = []
    for sample in manifest.samples:
        (validation if in_holdout(sample.sample_id, hasher, fraction) else train).append(sample)
    return manifest.replace_samples(train), manifest.replace_samples(validation)
