"""Core domain models."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from types import MappingProxyType
from typing import Any

import numpy as np

from .errors import ValidationError
from .numerics import Matrix, Vector

UNKNOWN_CONTINENT = "unknown"


class Continent(StrEnum):
    """The six inhabited continents; Antarctica has no income proxy."""

    AFRICA = "Africa"
    ASIA = "Asia"
    EUROPE = "Europe"
    NORTH_AMERICA = "NorthAmerica"
    SOUTH_AMERICA = "SouthAmerica"
    OCEANIA = "Oceania"

    @classmethod
    def parse(cls, value: str) -> Continent:
        """Accept the canonical name, ignoring case, spaces and underscores."""
        wanted = value.replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == wanted:
                return member
        raise ValidationError(f"unknown continent: {value!r}")


@dataclass(frozen=True)
class ContinentIncomeTable:
    """Nominal GDP per capita (USD) by continent, used as an income proxy."""

    values: Mapping[Continent, float]

    def __post_init__(self) -> None:
        values = {Continent(k): float(v) for k, v in self.values.items()}
        if set(values) != set(Continent):
            missing = sorted(set(Continent) - set(values))
            raise ValidationError(f"income table needs all six continents, missing {missing}")
        if any(not math.isfinite(v) or v <= 0 for v in values.values()):
            raise ValidationError("income table values must be positive")
        object.__setattr__(self, "values", MappingProxyType(values))

    def income_for(self, continent: Continent) -> float:
        return self.values[continent]

    def ranked(self) -> list[Continent]:
        """Continents by income, richest first."""
        return sorted(self.values, key=lambda c: (-self.values[c], c.value))

    def to_dict(self) -> dict[str, float]:
        return {c.value: self.values[c] for c in self.ranked()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ContinentIncomeTable:
        return cls(values={Continent.parse(k): float(v) for k, v in data.items()})


DEFAULT_INCOME_TABLE = ContinentIncomeTable(
    values={
        Continent.OCEANIA: 53220.0,
        Continent.NORTH_AMERICA: 49240.0,
        Continent.EUROPE: 29410.0,
        Continent.SOUTH_AMERICA: 8560.0,
        Continent.ASIA: 7350.0,
        Continent.AFRICA: 1930.0,
    }
)


@dataclass(frozen=True, eq=False)
class Sample:
    """One labeled example.

    ``income`` is monthly household income in USD (PPP semantics). It may be
    None only while a raw row awaits geographic enrichment.
    """

    sample_id: str
    features: Vector
    label: int
    income: float | None
    latitude: float | None = None
    longitude: float | None = None
    continent: Continent | None = None

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, copy=True).reshape(-1)
        features.setflags(write=False)
        object.__setattr__(self, "features", features)
        if not self.sample_id:
            raise ValidationError("sample id must be non-empty")
        if self.label < 0:
            raise ValidationError(f"sample {self.sample_id}: label must be >= 0")
        if not np.all(np.isfinite(features)):
            raise ValidationError(f"sample {self.sample_id}: features must be finite")
        if self.income is not None and not (math.isfinite(self.income) and self.income > 0):
            raise ValidationError(f"sample {self.sample_id}: income must be > 0, got {self.income}")
        if (self.latitude is None) != (self.longitude is None):
            raise ValidationError(f"sample {self.sample_id}: latitude and longitude go together")
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"sample {self.sample_id}: latitude {self.latitude} out of range")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(
                f"sample {self.sample_id}: longitude {self.longitude} out of range"
            )

    @property
    def has_coordinates(self) -> bool:
        return self.latitude is not None

    def require_income(self) -> float:
        if self.income is None:
            raise ValidationError(f"sample {self.sample_id} has no income")
        return self.income

    def with_income(self, income: float) -> Sample:
        return Sample(
            sample_id=self.sample_id,
            features=self.features,
            label=self.label,
            income=income,
            latitude=self.latitude,
            longitude=self.longitude,
            continent=self.continent,
        )

    def with_continent(self, continent: Continent) -> Sample:
        return Sample(
            sample_id=self.sample_id,
            features=self.features,
            label=self.label,
            income=self.income,
            latitude=self.latitude,
            longitude=self.longitude,
            continent=continent,
        )


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Ordered samples plus class count and feature width."""

    samples: tuple[Sample, ...]
    num_classes: int
    feature_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.num_classes < 1 or self.feature_dim < 1:
            raise ValidationError("num_classes and feature_dim must be positive")
        for sample in self.samples:
            if sample.features.shape[0] != self.feature_dim:
                raise ValidationError(
                    f"sample {sample.sample_id}: {sample.features.shape[0]} features, "
                    f"expected {self.feature_dim}"
                )
            if sample.label >= self.num_classes:
                raise ValidationError(
                    f"sample {sample.sample_id}: label {sample.label} >= {self.num_classes}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def features(self) -> Matrix:
        if not self.samples:
            return np.zeros((0, self.feature_dim))
        return np.vstack([s.features for s in self.samples])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def incomes(self) -> Vector:
        return np.array([s.require_income() for s in self.samples], dtype=np.float64)

    @property
    def sample_ids(self) -> list[str]:
        return [s.sample_id for s in self.samples]

    def subset(self, indices: Iterable[int]) -> DatasetManifest:
        """Samples at ``indices`` in the given order (repeats allowed)."""
        return self.replace_samples(self.samples[i] for i in indices)

    def replace_samples(self, samples: Iterable[Sample]) -> DatasetManifest:
        return DatasetManifest(
            samples=tuple(samples), num_classes=self.num_classes, feature_dim=self.feature_dim
        )

    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.num_classes).tolist()


@dataclass(frozen=True)
class IncomeBinning:
    """Fixed-width income bins: bin = floor(income / bin_width).

    ``bins`` is sparse and sorted by bin index; empty bins have no entry.
    """

    bin_width: float
    assignment: tuple[int, ...]
    bins: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.bin_width) and self.bin_width > 0):
            raise ValidationError(f"bin_width must be positive, got {self.bin_width}")

    def counts(self) -> dict[int, int]:
        return {b: len(members) for b, members in self.bins.items()}

    def bounds(self, bin_index: int) -> tuple[float, float]:
        return bin_index * self.bin_width, (bin_index + 1) * self.bin_width


@dataclass(frozen=True)
class SynthConfig:
    """Seeded synthetic benchmark with an income-driven domain shift."""

    num_classes: int = 10
    feature_dim: int = 16
    samples_per_run: int = 10000
    income_range: tuple[float, float] = (100.0, 20000.0)
    shift_strength: float = 2.0
    imbalance_exponent: float = 1.0
    seed: int = 0
    assign_continents: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "income_range", tuple(float(v) for v in self.income_range))
        low, high = self.income_range
        if min(self.num_classes, self.feature_dim, self.samples_per_run) < 1:
            raise ValidationError("num_classes, feature_dim and samples_per_run must be positive")
        if self.feature_dim < 2:
            raise ValidationError("feature_dim must be >= 2 for the rotation plane")
        if not 0 < low < high:
            raise ValidationError(f"income_range must satisfy 0 < min < max, got {self.income_range}")
        if self.shift_strength < 0 or self.imbalance_exponent < 0:
            raise ValidationError("shift_strength and imbalance_exponent must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "samples_per_run": self.samples_per_run,
            "income_range": list(self.income_range),
            "shift_strength": self.shift_strength,
            "imbalance_exponent": self.imbalance_exponent,
            "seed": self.seed,
            "assign_continents": self.assign_continents,
        }


def continent_counts(samples: Sequence[Sample]) -> dict[str, int]:
    out: dict[str, int] = {}
    for sample in samples:
        name = sample.continent.value if sample.continent else UNKNOWN_CONTINENT
        out[name] = out.get(name, 0) + 1
    return out
