"""Core ExperimentService orchestration."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from .. import __version__
from ..ports import ArtifactStorePort, ClockPort, HashPort, LoggerPort, MetricsPort
from .adaptation import (
    adapt_target,
    evaluate_transfer,
    finetune_classifier_on_target,
    split_domains,
    train_on_domain,
    train_source,
)
from .checkpoint import decode_model, encode_model
from .config import DEFAULT_FOCAL_GAMMA, ExperimentConfig
from .dataset import DEFAULT_SAMPLING_THRESHOLD, bin_by_income, generate_synthetic, holdout_split
from .errors import CheckpointError, NotFoundError
from .evaluation import FairnessReport, build_report, effective_k
from .geo import ContinentPolygons
from .manifest_io import parse_manifest, write_manifest
from .models import DEFAULT_INCOME_TABLE, ContinentIncomeTable, DatasetManifest, continent_counts
from .numerics import MlpModel
from .report_io import (
    adversarial_history_csv,
    curve_csv,
    curve_svg,
    hits_csv,
    report_json,
    step_loss_csv,
    training_log_csv,
)
from .training import Method, prepare_training_set, train_classifier

MANIFEST_FILE = "manifest.csv"
MODEL_FILE = "model.ckpt"
ADDA_CHECKPOINTS = ("source_encoder", "target_encoder", "classifier", "discriminator")


@dataclass(frozen=True)
class GenerateSummary:
    manifest_path: str
    rows: int
    shift_strength: float
    bin_width: float
    bin_counts: dict[float, int]
    class_counts: list[int]


@dataclass(frozen=True)
class IngestSummary:
    manifest_path: str
    rows: int
    num_classes: int
    continent_counts: dict[str, int]


@dataclass(frozen=True)
class TrainSummary:
    method: Method
    checkpoint_path: str
    train_rows: int
    validation_rows: int
    steps: int
    k: int
    final_loss: float | None
    val_topk: float | None
    outputs: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class AdaptSummary:
    source_rows: int
    target_rows: int
    transfer: dict[str, float]
    k: int
    final_disc_acc: float | None
    outputs: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ReportSummary:
    report: FairnessReport
    outputs: list[str] = field(default_factory=list)


class ExperimentService:
    """Runs experiment stages and writes their artifacts through the store."""

    def __init__(
        self,
        store: ArtifactStorePort,
        hasher: HashPort,
        clock: ClockPort,
        logger: LoggerPort,
        metrics: MetricsPort,
        eval_workers: int = 1,
        table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
        geo_table: ContinentPolygons | None = None,
    ):
        self.store = store
        self.hasher = hasher
        self.clock = clock
        self.logger = logger
        self.metrics = metrics
        self.eval_workers = eval_workers
        self.table = table
        self.geo_table = geo_table

    def manifest_location(self, config: ExperimentConfig, output_dir: str) -> str:
        return config.paths.manifest or self.store.join(output_dir, MANIFEST_FILE)

    def load_manifest(self, location: str) -> DatasetManifest:
        return self._read_manifest(location)[0]

    def _read_manifest(self, location: str) -> tuple[DatasetManifest, str]:
        """Parsed manifest plus the SHA-256 of its text."""
        text = self.store.read_text(location)
        return parse_manifest(text), self.hasher.sha256_text(text)

    def generate(self, config: ExperimentConfig, output_dir: str) -> GenerateSummary:
        """Write a seeded synthetic manifest."""
        start = self.clock.now()
        manifest = generate_synthetic(config.synth, self.table)
        location = self.manifest_location(config, output_dir)
        self.store.write_text(location, write_manifest(manifest))

        binning = bin_by_income(manifest, config.bin_width)
        summary = GenerateSummary(
            manifest_path=location,
            rows=len(manifest),
            shift_strength=config.synth.shift_strength,
            bin_width=config.bin_width,
            bin_counts={binning.bounds(b)[0]: n for b, n in binning.counts().items()},
            class_counts=manifest.class_counts(),
        )
        duration = self.clock.elapsed(start)
        self.logger.log_operation(
            op="generate",
            dataset=location,
            sizes={"rows": summary.rows, "bins": len(summary.bin_counts)},
            durations={"total": duration},
        )
        self.metrics.timing("geofair.generate.duration", duration * 1000)
        return summary

    def ingest(
        self,
        source: str,
        destination: str,
        override_income: bool = False,
        num_classes: int | None = None,
    ) -> IngestSummary:
        """Validate a manifest, fill continents and incomes, and write it back out."""
        start = self.clock.now()
        manifest = parse_manifest(
            self.store.read_text(source),
            num_classes=num_classes,
            enrich=True,
            override_income=override_income,
            table=self.table,
            geo_table=self.geo_table,
        )
        self.store.write_text(destination, write_manifest(manifest))
        summary = IngestSummary(
            manifest_path=destination,
            rows=len(manifest),
            num_classes=manifest.num_classes,
            continent_counts=continent_counts(manifest.samples),
        )
        duration = self.clock.elapsed(start)
        self.logger.log_operation(
            op="ingest",
            dataset=source,
            sizes={"rows": summary.rows},
            durations={"total": duration},
        )
        self.metrics.timing("geofair.ingest.duration", duration * 1000)
        return summary

    def train(self, config: ExperimentConfig, output_dir: str) -> TrainSummary:
        """Fit a classifier head with the configured mitigation method."""
        start = self.clock.now()
        location = self.manifest_location(config, output_dir)
        manifest, digest = self._read_manifest(location)
        train_set, validation = holdout_split(manifest, self.hasher, config.holdout_fraction)
        prepared = prepare_training_set(
            train_set,
            config.method,
            seed=config.seed,
            sampling_threshold=config.sampling_threshold or DEFAULT_SAMPLING_THRESHOLD,
            bin_width=config.bin_width,
        )
        loaded = self.clock.now()
        self.logger.info(
            "Training",
            method=config.method.value,
            train_rows=len(prepared),
            validation_rows=len(validation),
            seed=config.seed,
        )

        result = train_classifier(
            prepared,
            config.method,
            config.train_config(),
            focal_gamma=config.focal_gamma if config.focal_gamma is not None else DEFAULT_FOCAL_GAMMA,
            validation=validation if len(validation) else None,
            metrics=self.metrics,
        )
        trained = self.clock.now()

        join = self.store.join
        outputs = {
            join(output_dir, "train_manifest.csv"): write_manifest(prepared),
            join(output_dir, "training_log.csv"): training_log_csv(result.history),
            join(output_dir, "step_losses.csv"): step_loss_csv(result.step_losses),
        }
        for path, text in outputs.items():
            self.store.write_text(path, text)
        checkpoint = join(output_dir, MODEL_FILE)
        self.store.write_bytes(checkpoint, encode_model(result.models[0]))

        last = result.history[-1] if result.history else None
        summary = TrainSummary(
            method=config.method,
            checkpoint_path=checkpoint,
            train_rows=len(prepared),
            validation_rows=len(validation),
            steps=result.steps,
            k=result.k,
            final_loss=last.mean_loss if last else None,
            val_topk=last.val_topk if last else None,
            outputs=[*outputs, checkpoint],
        )
        experiment = join(output_dir, "experiment.json")
        self.store.write_text(
            experiment,
            _json(
                {
                    "geofair_version": __version__,
                    "config": config.to_dict(),
                    "manifest": location,
                    "manifest_sha256": digest,
                    "num_classes": manifest.num_classes,
                    "feature_dim": manifest.feature_dim,
                    "train_rows": summary.train_rows,
                    "validation_rows": summary.validation_rows,
                    "steps": summary.steps,
                    "k": summary.k,
                    "final_loss": summary.final_loss,
                    "val_topk": summary.val_topk,
                }
            ),
        )
        summary.outputs.append(experiment)

        total = self.clock.elapsed(start)
        self.logger.log_operation(
            op="train",
            dataset=location,
            sizes={"train_rows": summary.train_rows, "steps": summary.steps},
            durations={
                "load": self.clock.elapsed(start, loaded),
                "fit": self.clock.elapsed(loaded, trained),
                "total": total,
            },
        )
        self.metrics.timing("geofair.train.duration", total * 1000, tags={"method": config.method.value})
        self.metrics.increment("geofair.train.completed", tags={"method": config.method.value})
        return summary

    def adapt(self, config: ExperimentConfig, output_dir: str) -> AdaptSummary:
        """Source training, adversarial adaptation, optional fine-tuning and the transfer table."""
        start = self.clock.now()
        location = self.manifest_location(config, output_dir)
        manifest, digest = self._read_manifest(location)
        settings = config.adda_settings()
        adda_config = settings.to_adda_config(
            manifest.feature_dim,
            manifest.num_classes,
            config.batch_size,
            config.learning_rate,
            config.seed,
        )
        train_set, validation = holdout_split(manifest, self.hasher, config.holdout_fraction)
        split = split_domains(train_set, settings.split_income)
        held_out = split_domains(validation, settings.split_income)
        k = effective_k(config.topk, manifest.num_classes)
        train_config = config.train_config()
        self.logger.info(
            "Adapting",
            source_rows=len(split.source),
            target_rows=len(split.target),
            split_income=settings.split_income,
            adversarial_steps=adda_config.adversarial_steps,
        )

        source = train_source(split, adda_config, train_config, held_out, self.metrics)
        adapted = adapt_target(
            split, source.encoder, adda_config, classifier=source.classifier, metrics=self.metrics
        )
        classifier = source.classifier
        if settings.finetune and settings.finetune_epochs > 0:
            tuned = finetune_classifier_on_target(
                adapted.target_encoder,
                source.classifier,
                split,
                config.train_config(epochs=settings.finetune_epochs),
                self.metrics,
            )
            classifier = tuned.models[0]
        target_only = train_on_domain(split.target, adda_config, train_config, self.metrics)

        source_only = evaluate_transfer(held_out, source.encoder, source.classifier, k)
        own = evaluate_transfer(held_out, *target_only.models, k=k)
        after = evaluate_transfer(held_out, adapted.target_encoder, classifier, k)
        transfer = {
            "source_to_source": source_only.source,
            "target_to_target": own.target,
            "source_to_target": source_only.target,
            "adapted_to_target": after.target,
        }

        join = self.store.join
        models = dict(
            zip(
                ADDA_CHECKPOINTS,
                (source.encoder, adapted.target_encoder, classifier, adapted.discriminator),
                strict=True,
            )
        )
        outputs: list[str] = []
        for name, model in models.items():
            path = join(output_dir, f"{name}.ckpt")
            self.store.write_bytes(path, encode_model(model))
            outputs.append(path)
        texts = {
            join(output_dir, "adversarial_history.csv"): adversarial_history_csv(adapted.history),
            join(output_dir, "source_training_log.csv"): training_log_csv(source.fit.history),
            join(output_dir, "transfer.json"): _json(
                {
                    "manifest": location,
                    "manifest_sha256": digest,
                    "k": k,
                    "split_income": settings.split_income,
                    "source_rows": len(split.source),
                    "target_rows": len(split.target),
                    "validation_source_rows": len(held_out.source),
                    "validation_target_rows": len(held_out.target),
                    "source_train_accuracy": source.train_accuracy,
                    "source_val_accuracy": source.val_accuracy,
                    "finetuned": settings.finetune and settings.finetune_epochs > 0,
                    "transfer": transfer,
                }
            ),
        }
        for path, text in texts.items():
            self.store.write_text(path, text)
        outputs.extend(texts)

        summary = AdaptSummary(
            source_rows=len(split.source),
            target_rows=len(split.target),
            transfer=transfer,
            k=k,
            final_disc_acc=adapted.history[-1].disc_acc if adapted.history else None,
            outputs=outputs,
        )
        duration = self.clock.elapsed(start)
        self.logger.log_operation(
            op="adapt",
            dataset=location,
            sizes={
                "source_rows": summary.source_rows,
                "target_rows": summary.target_rows,
                "adversarial_steps": len(adapted.history),
            },
            durations={"total": duration},
        )
        self.metrics.timing("geofair.adapt.duration", duration * 1000)
        return summary

    def load_chain(self, locations: Sequence[str], manifest: DatasetManifest) -> list[MlpModel]:
        """Decode checkpoints and check they compose into a manifest classifier."""
        if not locations:
            raise CheckpointError("no checkpoint given")
        missing = [location for location in locations if not self.store.exists(location)]
        if missing:
            raise NotFoundError(f"checkpoint not found: {', '.join(missing)}")
        models = []
        for location in locations:
            try:
                models.append(decode_model(self.store.read_bytes(location)))
            except CheckpointError as e:
                raise CheckpointError(f"{location}: {e}") from e
        width = manifest.feature_dim
        for location, model in zip(locations, models, strict=True):
            if model.config.input_dim != width:
                raise CheckpointError(
                    f"{location}: expects {model.config.input_dim} inputs, got {width}"
                )
            width = model.config.output_dim
        if width != manifest.num_classes:
            raise CheckpointError(
                f"{locations[-1]}: produces {width} classes, manifest has {manifest.num_classes}"
            )
        return models

    def report(
        self,
        config: ExperimentConfig,
        output_dir: str,
        checkpoints: Sequence[str] = (),
        svg: bool = True,
    ) -> ReportSummary:
        """Fairness report of a checkpoint chain on the validation holdout."""
        start = self.clock.now()
        location = self.manifest_location(config, output_dir)
        manifest, digest = self._read_manifest(location)
        chain_paths = list(checkpoints) or [self.store.join(output_dir, MODEL_FILE)]
        models = self.load_chain(chain_paths, manifest)
        _, validation = holdout_split(manifest, self.hasher, config.holdout_fraction)
        k = effective_k(config.topk, manifest.num_classes)
        if k != config.topk:
            self.logger.warning("Clamped top-k to the class count", requested=config.topk, k=k)

        report, hits = build_report(
            models,
            validation,
            k=k,
            bin_width=config.bin_width,
            window=config.window,
            max_workers=self.eval_workers,
            table=self.table,
        )
        join = self.store.join
        texts = {
            join(output_dir, "report.json"): report_json(
                report,
                {
                    "checkpoints": chain_paths,
                    "manifest": location,
                    "manifest_sha256": digest,
                    "split": "validation",
                },
            ),
            join(output_dir, "curve.csv"): curve_csv(report),
            join(output_dir, "hits.csv"): hits_csv(validation.samples, hits),
        }
        if svg:
            texts[join(output_dir, "curve.svg")] = curve_svg(report)
        for path, text in texts.items():
            self.store.write_text(path, text)

        duration = self.clock.elapsed(start)
        self.logger.log_operation(
            op="report",
            dataset=location,
            sizes={"validation_rows": report.sample_count, "bins": len(report.per_bin)},
            durations={"total": duration},
        )
        self.metrics.gauge("geofair.report.accuracy_range", report.accuracy_range)
        self.metrics.gauge("geofair.report.low_high_gap", report.low_high_gap)
        return ReportSummary(report=report, outputs=list(texts))


def _json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2) + "\n"
