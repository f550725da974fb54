"""Top-k hits, income-bucket accuracy curves and the fairness report."""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError
from .losses import as_labels, as_logits
from .models import (
    DEFAULT_INCOME_TABLE,
    UNKNOWN_CONTINENT,
    ContinentIncomeTable,
    DatasetManifest,
    Sample,
)
from .numerics import Matrix, MlpModel, forward

DEFAULT_TOPK = 5
DEFAULT_WINDOW = 10
# Fixed shard size keeps logits independent of the worker count.
EVAL_SHARD_ROWS = 1024


def topk_hits(logits: ArrayLike, labels: ArrayLike, k: int) -> NDArray[np.bool_]:
    """True where the label ranks within the top ``k`` logits.

    A class outranks the label if its logit is larger, or equal with a lower
    class index.
    """
    z = as_logits(logits)
    y = as_labels(labels, z)
    num_classes = z.shape[1]
    if not 1 <= k < num_classes:
        raise ValidationError(f"k must be in [1, {num_classes}), got {k}")
    true_logit = z[np.arange(y.shape[0]), y][:, None]
    lower_index = np.arange(num_classes)[None, :] < y[:, None]
    rank = (z > true_logit).sum(axis=1) + ((z == true_logit) & lower_index).sum(axis=1)
    return rank < k


def effective_k(k: int, num_classes: int) -> int:
    """Clamp k below the class count so small problems still get a score."""
    if num_classes < 2:
        raise ValidationError("top-k accuracy needs at least 2 classes")
    return max(1, min(k, num_classes - 1))


def predict(models: Sequence[MlpModel], features: ArrayLike) -> Matrix:
    """Evaluation-mode logits of a model chain (encoder, classifier, ...)."""
    activation = np.asarray(features, dtype=np.float64)
    for model in models:
        activation, _ = forward(model, activation)
    return activation


def sharded_predict(
    models: Sequence[MlpModel], features: ArrayLike, max_workers: int = 1
) -> Matrix:
    """:func:`predict` over fixed-size row shards, reassembled in shard order."""
    x = np.asarray(features, dtype=np.float64)
    shards = [x[i : i + EVAL_SHARD_ROWS] for i in range(0, len(x), EVAL_SHARD_ROWS)] or [x]
    if max_workers <= 1 or len(shards) == 1:
        return np.vstack([predict(models, shard) for shard in shards])
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return np.vstack(list(pool.map(lambda shard: predict(models, shard), shards)))


def topk_accuracy(
    models: Sequence[MlpModel], manifest: DatasetManifest, k: int, max_workers: int = 1
) -> float:
    if len(manifest) == 0:
        raise ValidationError("cannot score an empty manifest")
    logits = sharded_predict(models, manifest.features, max_workers)
    return float(np.mean(topk_hits(logits, manifest.labels, k)))


@dataclass(frozen=True)
class BinRecord:
    bin_lower: float
    bin_upper: float
    count: int
    hits: int

    @property
    def accuracy(self) -> float:
        return self.hits / self.count


@dataclass(frozen=True)
class CurvePoint:
    bin_lower: float
    smoothed_accuracy: float


@dataclass(frozen=True)
class ContinentRecord:
    continent: str
    count: int
    hits: int

    @property
    def accuracy(self) -> float:
        return self.hits / self.count


def _aligned_hits(samples: Sequence[Sample], hits: ArrayLike) -> NDArray[np.bool_]:
    flags = np.asarray(hits, dtype=bool)
    if flags.shape != (len(samples),):
        raise ValidationError(f"expected {len(samples)} hit flags, got shape {flags.shape}")
    return flags


def binned_accuracy(
    samples: Sequence[Sample], hits: ArrayLike, bin_width: float = 300.0
) -> list[BinRecord]:
    """Accuracy per non-empty income bucket, ascending."""
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise ValidationError(f"bin_width must be positive, got {bin_width}")
    flags = _aligned_hits(samples, hits)
    counts: dict[int, list[int]] = {}
    for sample, hit in zip(samples, flags, strict=True):
        bucket = counts.setdefault(math.floor(sample.require_income() / bin_width), [0, 0])
        bucket[0] += 1
        bucket[1] += int(hit)
    return [
        BinRecord(
            bin_lower=b * bin_width,
            bin_upper=(b + 1) * bin_width,
            count=counts[b][0],
            hits=counts[b][1],
        )
        for b in sorted(counts)
    ]


def moving_average_curve(
    records: Sequence[BinRecord], window: int = DEFAULT_WINDOW
) -> list[CurvePoint]:
    """Trailing mean over up to ``window`` non-empty bins, current bin included.

    Each bin counts once regardless of its sample count.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    lowers = [r.bin_lower for r in records]
    if any(b <= a for a, b in zip(lowers, lowers[1:], strict=False)):
        raise ValidationError("bin records must be sorted by bin_lower")
    accuracies = [r.accuracy for r in records]
    curve = []
    for j, record in enumerate(records):
        span = accuracies[max(0, j - window + 1) : j + 1]
        curve.append(CurvePoint(record.bin_lower, math.fsum(span) / len(span)))
    return curve


def continent_accuracy(
    samples: Sequence[Sample],
    hits: ArrayLike,
    table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
) -> list[ContinentRecord]:
    """Accuracy per continent present, richest first; untagged samples go to "unknown"."""
    flags = _aligned_hits(samples, hits)
    counts: dict[str, list[int]] = {}
    for sample, hit in zip(samples, flags, strict=True):
        name = sample.continent.value if sample.continent else UNKNOWN_CONTINENT
        bucket = counts.setdefault(name, [0, 0])
        bucket[0] += 1
        bucket[1] += int(hit)
    order = [c.value for c in table.ranked()] + [UNKNOWN_CONTINENT]
    return [
        ContinentRecord(continent=name, count=counts[name][0], hits=counts[name][1])
        for name in order
        if name in counts
    ]


def accuracy_range(curve: Sequence[CurvePoint]) -> float:
    if not curve:
        return 0.0
    values = [p.smoothed_accuracy for p in curve]
    return max(values) - min(values)


def low_high_gap(curve: Sequence[CurvePoint]) -> float:
    """Mean smoothed accuracy of the richer half of bins minus the poorer half.

    With an odd bin count the middle bin is left out; fewer than two bins
    give 0.
    """
    half = len(curve) // 2
    if half == 0:
        return 0.0
    values = [p.smoothed_accuracy for p in curve]
    return math.fsum(values[-half:]) / half - math.fsum(values[:half]) / half


@dataclass(frozen=True)
class FairnessReport:
    overall_topk: float
    k: int
    bin_width: float
    window: int
    sample_count: int
    per_bin: tuple[BinRecord, ...]
    moving_avg_curve: tuple[CurvePoint, ...]
    per_continent: tuple[ContinentRecord, ...]
    accuracy_range: float
    low_high_gap: float

    @property
    def continent_gap(self) -> float:
        """Best minus worst per-continent accuracy, ignoring "unknown"."""
        values = [r.accuracy for r in self.per_continent if r.continent != UNKNOWN_CONTINENT]
        return max(values) - min(values) if values else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall_topk": self.overall_topk,
            "k": self.k,
            "bin_width": self.bin_width,
            "window": self.window,
            "sample_count": self.sample_count,
            "accuracy_range": self.accuracy_range,
            "low_high_gap": self.low_high_gap,
            "continent_gap": self.continent_gap,
            "per_bin": [
                {
                    "bin_lower": r.bin_lower,
                    "bin_upper": r.bin_upper,
                    "n": r.count,
                    "hits": r.hits,
                    "accuracy": r.accuracy,
                }
                for r in self.per_bin
            ],
            "moving_avg_curve": [
                {"bin_lower": p.bin_lower, "moving_avg": p.smoothed_accuracy}
                for p in self.moving_avg_curve
            ],
            "per_continent": {
                r.continent: {"n": r.count, "hits": r.hits, "accuracy": r.accuracy}
                for r in self.per_continent
            },
        }


def assemble_report(
    samples: Sequence[Sample],
    hits: ArrayLike,
    k: int,
    bin_width: float = 300.0,
    window: int = DEFAULT_WINDOW,
    table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
) -> FairnessReport:
    """Report from precomputed hit flags."""
    flags = _aligned_hits(samples, hits)
    if not len(samples):
        raise ValidationError("cannot report on an empty sample set")
    per_bin = binned_accuracy(samples, flags, bin_width)
    curve = moving_average_curve(per_bin, window)
    return FairnessReport(
        overall_topk=float(np.mean(flags)),
        k=k,
        bin_width=float(bin_width),
        window=window,
        sample_count=len(samples),
        per_bin=tuple(per_bin),
        moving_avg_curve=tuple(curve),
        per_continent=tuple(continent_accuracy(samples, flags, table)),
        accuracy_range=accuracy_range(curve),
        low_high_gap=low_high_gap(curve),
    )


def build_report(
    models: Sequence[MlpModel],
    manifest: DatasetManifest,
    k: int = DEFAULT_TOPK,
    bin_width: float = 300.0,
    window: int = DEFAULT_WINDOW,
    max_workers: int = 1,
    table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
) -> tuple[FairnessReport, NDArray[np.bool_]]:
    """Evaluate a model chain on ``manifest``; returns the report and per-sample hits."""
    if len(manifest) == 0:
        raise ValidationError("cannot report on an empty manifest")
    logits = sharded_predict(models, manifest.features, max_workers)
    hits = topk_hits(logits, manifest.labels, k)
    return assemble_report(manifest.samples, hits, k, bin_width, window, table), hits
