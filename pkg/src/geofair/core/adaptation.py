"""Adversarial discriminative domain adaptation across an income split.

Pipeline: train a source encoder and classifier on the richer domain, then
train a target encoder (started from the source weights) until a
discriminator cannot tell its features from the frozen source encoder's,
optionally fine-tune the classifier on target features, and score the
combinations on both domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..ports.metrics import MetricsPort
from .errors import NumericError, ValidationError
from .evaluation import DEFAULT_TOPK, predict, topk_hits
from .losses import bce_with_logits, nll_loss
from .models import DatasetManifest
from .numerics import AdamState, MlpConfig, MlpModel, Rng, adam_step, backward, forward
from .training import FitResult, LabeledFeatures, TrainConfig, fit

DEFAULT_SPLIT_INCOME = 600.0

# ADDA streams live under their own key, disjoint from the streams ``fit``
# derives from the same seed.
ADDA_NAMESPACE = 100

# Child stream keys under the ADDA namespace.
(
    ENCODER_STREAM,
    CLASSIFIER_STREAM,
    DISCRIMINATOR_STREAM,
    BATCH_STREAM,
    DROPOUT_STREAM,
    TARGET_ONLY_STREAM,
) = range(1, 7)


def adda_root(seed: int) -> Rng:
    """Root of every stream the ADDA pipeline draws from for ``seed``."""
    return Rng(seed).child(ADDA_NAMESPACE)


@dataclass(frozen=True)
class DomainSplit:
    """Source: income > split_income. Target: income <= split_income."""

    source: DatasetManifest
    target: DatasetManifest
    split_income: float = DEFAULT_SPLIT_INCOME

    def __post_init__(self) -> None:
        if not len(self.source):
            raise ValidationError("source domain empty")
        if not len(self.target):
            raise ValidationError("target domain empty")
        if any(s.require_income() <= self.split_income for s in self.source.samples):
            raise ValidationError(f"source sample at or below split income {self.split_income}")
        if any(s.require_income() > self.split_income for s in self.target.samples):
            raise ValidationError(f"target sample above split income {self.split_income}")


def split_domains(
    manifest: DatasetManifest, split_income: float = DEFAULT_SPLIT_INCOME
) -> DomainSplit:
    """Partition by income, preserving order on each side."""
    if not (math.isfinite(split_income) and split_income > 0):
        raise ValidationError(f"split income must be positive, got {split_income}")
    if not len(manifest):
        raise ValidationError("cannot split an empty manifest")
    source = [s for s in manifest.samples if s.require_income() > split_income]
    target = [s for s in manifest.samples if s.require_income() <= split_income]
    return DomainSplit(
        source=manifest.replace_samples(source),
        target=manifest.replace_samples(target),
        split_income=split_income,
    )


@dataclass(frozen=True)
class AddaConfig:
    encoder: MlpConfig
    classifier: MlpConfig
    discriminator: MlpConfig
    adversarial_steps: int = 500
    disc_steps_per_gen_step: int = 1
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    train_target_encoder: bool = True

    def __post_init__(self) -> None:
        if self.discriminator.num_layers != 3:
            raise ValidationError(
                f"discriminator must have exactly 3 layers, got {self.discriminator.num_layers}"
            )
        if self.discriminator.output_dim != 1:
            raise ValidationError("discriminator must have a scalar output")
        width = self.encoder.output_dim
        if self.classifier.input_dim != width or self.discriminator.input_dim != width:
            raise ValidationError(
                f"classifier and discriminator inputs must equal encoder output width {width}"
            )
        if self.adversarial_steps < 0 or self.disc_steps_per_gen_step < 1 or self.batch_size < 1:
            raise ValidationError("adversarial_steps >= 0, disc_steps_per_gen_step >= 1, batch_size >= 1")

    @classmethod
    def default(cls, feature_dim: int, num_classes: int, **overrides: object) -> AddaConfig:
        """Encoder input->[64]->32, classifier 32->[64, 64]->classes, discriminator 32->[256, 256]->1."""
        return cls(
            encoder=MlpConfig(input_dim=feature_dim, hidden_dims=(64,), output_dim=32, dropout_prob=0.0),
            classifier=MlpConfig(input_dim=32, hidden_dims=(64, 64), output_dim=num_classes),
            discriminator=MlpConfig(input_dim=32, hidden_dims=(256, 256), output_dim=1, dropout_prob=0.0),
            **overrides,  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class SourceTrainingResult:
    encoder: MlpModel
    classifier: MlpModel
    train_accuracy: float
    val_accuracy: float | None
    fit: FitResult


@dataclass(frozen=True)
class AdversarialStep:
    step: int
    disc_loss: float
    gen_loss: float
    disc_acc: float


@dataclass(frozen=True)
class AddaResult:
    source_encoder: MlpModel
    target_encoder: MlpModel
    discriminator: MlpModel
    classifier: MlpModel | None = None
    history: tuple[AdversarialStep, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class TransferAccuracy:
    source: float
    target: float
    k: int


def _top1(models: list[MlpModel], manifest: DatasetManifest) -> float:
    return float(np.mean(topk_hits(predict(models, manifest.features), manifest.labels, 1)))


def train_source(
    split: DomainSplit,
    config: AddaConfig,
    train_config: TrainConfig,
    validation: DomainSplit | None = None,
    metrics: MetricsPort | None = None,
) -> SourceTrainingResult:
    """Fit encoder and classifier jointly with NLL on the source domain only."""
    root = adda_root(config.seed)
    encoder = MlpModel.initialize(config.encoder, root.child(ENCODER_STREAM))
    classifier = MlpModel.initialize(config.classifier, root.child(CLASSIFIER_STREAM))
    result = fit(
        [encoder, classifier],
        LabeledFeatures.from_manifest(split.source),
        train_config,
        lambda logits, labels, incomes: nll_loss(logits, labels),
        LabeledFeatures.from_manifest(validation.source) if validation else None,
        metrics,
        metric_prefix="adda.source",
    )
    encoder, classifier = result.models
    return SourceTrainingResult(
        encoder=encoder,
        classifier=classifier,
        train_accuracy=_top1([encoder, classifier], split.source),
        val_accuracy=_top1([encoder, classifier], validation.source) if validation else None,
        fit=result,
    )


def _batch(rng: Rng, size: int, batch_size: int) -> np.ndarray:
    return rng.integers(size, batch_size)


def adapt_target(
    split: DomainSplit,
    source_encoder: MlpModel,
    config: AddaConfig,
    rng: Rng | None = None,
    classifier: MlpModel | None = None,
    metrics: MetricsPort | None = None,
) -> AddaResult:
    """Adversarial phase with the inverted-label generator objective.

    The discriminator learns source features -> 1, target features -> 0. The
    target encoder then learns to make its features score 1. The source
    encoder is only read.
    """
    if source_encoder.config != config.encoder:
        raise ValidationError("source encoder architecture does not match the ADDA config")
    root = rng or adda_root(config.seed)
    batch_rng = root.child(BATCH_STREAM)
    dropout_rng = root.child(DROPOUT_STREAM)

    target_encoder = source_encoder.copy()
    discriminator = MlpModel.initialize(config.discriminator, root.child(DISCRIMINATOR_STREAM))
    disc_state = AdamState(learning_rate=config.learning_rate)
    gen_state = AdamState(learning_rate=config.learning_rate)

    source_features, _ = forward(source_encoder, split.source.features)
    target_inputs = split.target.features
    half = config.batch_size
    domain_labels = np.concatenate([np.ones(half), np.zeros(half)])
    fooled = np.ones(half)

    history: list[AdversarialStep] = []
    for step in range(1, config.adversarial_steps + 1):
        for _ in range(config.disc_steps_per_gen_step):
            src = source_features[_batch(batch_rng, len(split.source), half)]
            tgt, _ = forward(target_encoder, target_inputs[_batch(batch_rng, len(split.target), half)])
            logits, cache = forward(
                discriminator, np.vstack([src, tgt]), training=True, rng=dropout_rng
            )
            disc = bce_with_logits(logits, domain_labels)
            if not math.isfinite(disc.value):
                raise NumericError(f"non-finite discriminator loss at adversarial step {step}")
            disc_acc = float(np.mean((logits[:, 0] > 0.0) == (domain_labels == 1.0)))
            grads = backward(discriminator, cache, disc.dloss_dlogits)
            discriminator, disc_state = adam_step(discriminator, grads, disc_state)

        gen_inputs = target_inputs[_batch(batch_rng, len(split.target), half)]
        features, enc_cache = forward(target_encoder, gen_inputs, training=True, rng=dropout_rng)
        logits, disc_cache = forward(discriminator, features)
        gen = bce_with_logits(logits, fooled)
        if not math.isfinite(gen.value):
            raise NumericError(f"non-finite generator loss at adversarial step {step}")
        if config.train_target_encoder:
            through_disc = backward(discriminator, disc_cache, gen.dloss_dlogits)
            enc_grads = backward(target_encoder, enc_cache, through_disc.inputs)
            target_encoder, gen_state = adam_step(target_encoder, enc_grads, gen_state)

        record = AdversarialStep(step=step, disc_loss=disc.value, gen_loss=gen.value, disc_acc=disc_acc)
        history.append(record)
        if metrics is not None:
            metrics.gauge("adda.disc_loss", record.disc_loss)
            metrics.gauge("adda.gen_loss", record.gen_loss)
            metrics.gauge("adda.disc_acc", record.disc_acc)

    return AddaResult(
        source_encoder=source_encoder,
        target_encoder=target_encoder,
        discriminator=discriminator,
        classifier=classifier,
        history=tuple(history),
    )


def evaluate_transfer(
    split: DomainSplit, encoder: MlpModel, classifier: MlpModel, k: int = DEFAULT_TOPK
) -> TransferAccuracy:
    """Top-k accuracy of one encoder/classifier pair on both domains of ``split``."""
    num_classes = split.source.num_classes
    if not 1 <= k < num_classes:
        raise ValidationError(f"k must be in [1, {num_classes}), got {k}")
    models = [encoder, classifier]
    return TransferAccuracy(
        source=float(np.mean(topk_hits(predict(models, split.source.features), split.source.labels, k))),
        target=float(np.mean(topk_hits(predict(models, split.target.features), split.target.labels, k))),
        k=k,
    )


def finetune_classifier_on_target(
    target_encoder: MlpModel,
    classifier: MlpModel,
    split: DomainSplit,
    train_config: TrainConfig,
    metrics: MetricsPort | None = None,
) -> FitResult:
    """Retrain the classifier with NLL on frozen target-encoder features."""
    encoded, _ = forward(target_encoder, split.target.features)
    data = LabeledFeatures(
        features=encoded,
        labels=split.target.labels,
        incomes=split.target.incomes,
        num_classes=split.target.num_classes,
    )
    return fit(
        [classifier],
        data,
        train_config,
        lambda logits, labels, incomes: nll_loss(logits, labels),
        metrics=metrics,
        metric_prefix="adda.finetune",
    )


def train_on_domain(
    manifest: DatasetManifest,
    config: AddaConfig,
    train_config: TrainConfig,
    metrics: MetricsPort | None = None,
) -> FitResult:
    """Fresh encoder and classifier trained on one domain (the target-only baseline)."""
    root = adda_root(config.seed).child(TARGET_ONLY_STREAM)
    encoder = MlpModel.initialize(config.encoder, root.child(ENCODER_STREAM))
    classifier = MlpModel.initialize(config.classifier, root.child(CLASSIFIER_STREAM))
    return fit(
        [encoder, classifier],
        LabeledFeatures.from_manifest(manifest),
        train_config,
        lambda logits, labels, incomes: nll_loss(logits, labels),
        metrics=metrics,
        metric_prefix="adda.target_only",
    )
