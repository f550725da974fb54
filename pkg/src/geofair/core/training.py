"""Supervised fitting of model chains and mitigation-method dispatch."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..ports.metrics import MetricsPort
from .dataset import DEFAULT_BIN_WIDTH, DEFAULT_SAMPLING_THRESHOLD, bin_by_income, resample_to_threshold
from .errors import NumericError, ValidationError
from .evaluation import DEFAULT_TOPK, effective_k, predict, topk_hits
from .losses import BatchLossResult, FocalConfig, focal_loss, nll_loss, weighted_batch_loss
from .models import DatasetManifest
from .numerics import (
    ActivationCache,
    AdamState,
    Matrix,
    MlpConfig,
    MlpModel,
    Rng,
    Vector,
    adam_step,
    backward,
    forward,
)

# Child stream keys under the training seed.
INIT_STREAM, SHUFFLE_STREAM, DROPOUT_STREAM, RESAMPLE_STREAM = range(4)


class Method(StrEnum):
    """Mitigation method used for supervised training."""

    BASELINE = "baseline"
    WEIGHTED = "weighted"
    SAMPLED = "sampled"
    FOCAL = "focal"


Objective = Callable[[Matrix, NDArray[np.int64], Vector], BatchLossResult]


def objective_for(method: Method, focal_gamma: float = 2.0) -> Objective:
    """Batch loss for a method; ``sampled`` trains with plain NLL on resampled data."""
    if method is Method.WEIGHTED:
        return weighted_batch_loss
    if method is Method.FOCAL:
        focal = FocalConfig(gamma=focal_gamma)
        return lambda logits, labels, incomes: focal_loss(logits, labels, focal)
    return lambda logits, labels, incomes: nll_loss(logits, labels)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    topk: int = DEFAULT_TOPK
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.topk < 1:
            raise ValidationError(f"topk must be >= 1, got {self.topk}")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValidationError(f"max_steps must be >= 0, got {self.max_steps}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    steps: int
    mean_loss: float
    train_topk: float
    val_topk: float | None


@dataclass(frozen=True)
class FitResult:
    models: tuple[MlpModel, ...]
    step_losses: tuple[float, ...]
    history: tuple[EpochRecord, ...]
    k: int

    @property
    def steps(self) -> int:
        return len(self.step_losses)


@dataclass(frozen=True)
class LabeledFeatures:
    """Inputs of a fitting run: features, labels and (for weighting) incomes."""

    features: Matrix
    labels: NDArray[np.int64]
    incomes: Vector
    num_classes: int

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> LabeledFeatures:
        return cls(
            features=manifest.features,
            labels=manifest.labels,
            incomes=manifest.incomes,
            num_classes=manifest.num_classes,
        )

    def __len__(self) -> int:
        return int(self.features.shape[0])


def _score(models: Sequence[MlpModel], data: LabeledFeatures, k: int) -> float:
    return float(np.mean(topk_hits(predict(models, data.features), data.labels, k)))


def fit(
    models: Sequence[MlpModel],
    train: LabeledFeatures,
    config: TrainConfig,
    objective: Objective,
    validation: LabeledFeatures | None = None,
    metrics: MetricsPort | None = None,
    metric_prefix: str = "train",
) -> FitResult:
    """Train a chain of models jointly with Adam on shuffled minibatches.

    Each model gets its own optimizer state; the loss gradient flows back
    through the whole chain. Zero epochs (or ``max_steps=0``) return the
    input models untouched.
    """
    if len(train) == 0:
        raise ValidationError("cannot train on an empty dataset")
    chain = list(models)
    k = effective_k(config.topk, train.num_classes)
    root = Rng(config.seed)
    shuffle_rng = root.child(SHUFFLE_STREAM)
    dropout_rng = root.child(DROPOUT_STREAM)
    states = [AdamState(learning_rate=config.learning_rate) for _ in chain]

    step_losses: list[float] = []
    history: list[EpochRecord] = []
    budget = config.max_steps
    for epoch in range(1, config.epochs + 1):
        if budget is not None and len(step_losses) >= budget:
            break
        order = shuffle_rng.permutation(len(train))
        epoch_losses: list[float] = []
        for start in range(0, len(train), config.batch_size):
            if budget is not None and len(step_losses) >= budget:
                break
            batch = order[start : start + config.batch_size]
            activation = train.features[batch]
            caches: list[ActivationCache] = []
            for model in chain:
                activation, cache = forward(model, activation, training=True, rng=dropout_rng)
                caches.append(cache)
            result = objective(activation, train.labels[batch], train.incomes[batch])
            if not math.isfinite(result.value):
                raise NumericError(f"non-finite loss at step {len(step_losses) + 1}")

            grad = result.dloss_dlogits
            for index in reversed(range(len(chain))):
                grads = backward(chain[index], caches[index], grad)
                grad = grads.inputs
                chain[index], states[index] = adam_step(chain[index], grads, states[index])

            step_losses.append(result.value)
            epoch_losses.append(result.value)
            if metrics is not None:
                metrics.gauge(f"{metric_prefix}.step_loss", result.value)

        record = EpochRecord(
            epoch=epoch,
            steps=len(step_losses),
            mean_loss=math.fsum(epoch_losses) / len(epoch_losses) if epoch_losses else math.nan,
            train_topk=_score(chain, train, k),
            val_topk=_score(chain, validation, k) if validation is not None and len(validation) else None,
        )
        history.append(record)
        if metrics is not None:
            metrics.gauge(f"{metric_prefix}.train_topk", record.train_topk)
            if record.val_topk is not None:
                metrics.gauge(f"{metric_prefix}.val_topk", record.val_topk)

    return FitResult(
        models=tuple(chain), step_losses=tuple(step_losses), history=tuple(history), k=k
    )


def default_head_config(manifest: DatasetManifest) -> MlpConfig:
    """Two hidden layers of 256 ReLU units with dropout 0.3."""
    return MlpConfig(input_dim=manifest.feature_dim, output_dim=manifest.num_classes)


def prepare_training_set(
    manifest: DatasetManifest,
    method: Method,
    seed: int = 0,
    sampling_threshold: int = DEFAULT_SAMPLING_THRESHOLD,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> DatasetManifest:
    """The training manifest a method actually sees (resampled for ``sampled``)."""
    if method is not Method.SAMPLED:
        return manifest
    binning = bin_by_income(manifest, bin_width)
    return resample_to_threshold(
        manifest, binning, sampling_threshold, Rng(seed).child(RESAMPLE_STREAM)
    )


def train_classifier(
    train: DatasetManifest,
    method: Method,
    config: TrainConfig,
    focal_gamma: float = 2.0,
    validation: DatasetManifest | None = None,
    head: MlpConfig | None = None,
    metrics: MetricsPort | None = None,
) -> FitResult:
    """Initialize a classifier head from the seed and fit it with ``method``'s objective.

    ``train`` must already be the prepared set (see :func:`prepare_training_set`).
    """
    model = MlpModel.initialize(head or default_head_config(train), Rng(config.seed).child(INIT_STREAM))
    return fit(
        [model],
        LabeledFeatures.from_manifest(train),
        config,
        objective_for(method, focal_gamma),
        LabeledFeatures.from_manifest(validation) if validation is not None else None,
        metrics,
    )
