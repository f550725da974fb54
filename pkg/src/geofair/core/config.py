"""Environment settings and experiment configuration."""

from __future__ import annotations

import json
import logging
import math
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .adaptation import DEFAULT_SPLIT_INCOME, AddaConfig
from .dataset import DEFAULT_BIN_WIDTH, DEFAULT_HOLDOUT_FRACTION, DEFAULT_SAMPLING_THRESHOLD
from .errors import ConfigError, NotFoundError, StorageIOError, ValidationError
from .evaluation import DEFAULT_TOPK, DEFAULT_WINDOW
from .models import SynthConfig
from .numerics import MlpConfig
from .training import Method, TrainConfig

DEFAULT_OUTPUT_DIR = "geofair-out"
DEFAULT_FOCAL_GAMMA = 2.0


@dataclass(slots=True)
class GeoFairConfig:
    """Process-level settings.

    Environment variables (all optional):
        GF_LOG_LEVEL:     Logging level. Default "INFO".
        GF_OUTPUT_DIR:    Output directory when the experiment config names none.
                          Default "geofair-out".
        GF_METRICS:       Metrics backend: "noop" or "logging" (default).
        GF_EVAL_WORKERS:  Threads for sharded evaluation. Default 1.
    """

    log_level: str = "INFO"
    output_dir: str = DEFAULT_OUTPUT_DIR
    metrics_type: str = "logging"
    eval_workers: int = 1

    @classmethod
    def from_env(cls, *, log_level: str = "INFO") -> GeoFairConfig:
        """Build config from environment variables + explicit overrides."""
        try:
            workers = int(os.environ.get("GF_EVAL_WORKERS", "1"))
        except ValueError as e:
            raise ConfigError(f"GF_EVAL_WORKERS must be an integer: {e}") from e
        level = os.environ.get("GF_LOG_LEVEL", log_level)
        if level.upper() not in logging.getLevelNamesMapping():
            raise ConfigError(f"GF_LOG_LEVEL must be a logging level name, got {level!r}")
        metrics_type = os.environ.get("GF_METRICS", "logging")
        if metrics_type not in ("noop", "logging"):
            raise ConfigError(f"GF_METRICS must be 'noop' or 'logging', got {metrics_type!r}")
        return cls(
            log_level=level.upper(),
            output_dir=os.environ.get("GF_OUTPUT_DIR", DEFAULT_OUTPUT_DIR),
            metrics_type=metrics_type,
            eval_workers=max(1, workers),
        )


def _take(data: dict[str, Any], key: str, kind: type, default: Any, where: str) -> Any:
    if key not in data:
        return default
    value = data.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        raise ConfigError(f"{where}{key} must be {kind.__name__}, got {value!r}")
    return value


def _int_tuple(data: dict[str, Any], key: str, default: tuple[int, ...], where: str) -> tuple[int, ...]:
    value = _take(data, key, list, list(default), where)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{where}{key} must be a list of integers, got {value!r}")
    return tuple(value)


def _no_leftovers(data: dict[str, Any], where: str) -> None:
    if data:
        raise ConfigError(f"unknown config key(s): {', '.join(where + k for k in sorted(data))}")


@dataclass(frozen=True)
class AddaSettings:
    split_income: float = DEFAULT_SPLIT_INCOME
    adversarial_steps: int = 500
    disc_steps_per_gen_step: int = 1
    finetune: bool = True
    finetune_epochs: int = 5
    encoder_hidden: tuple[int, ...] = (64,)
    feature_width: int = 32
    classifier_hidden: tuple[int, ...] = (64, 64)
    discriminator_hidden: tuple[int, ...] = (256, 256)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> AddaSettings:
        data = dict(raw)
        w = "adda."
        settings = cls(
            split_income=_take(data, "split_income", float, DEFAULT_SPLIT_INCOME, w),
            adversarial_steps=_take(data, "adversarial_steps", int, 500, w),
            disc_steps_per_gen_step=_take(data, "disc_steps_per_gen_step", int, 1, w),
            finetune=_take(data, "finetune", bool, True, w),
            finetune_epochs=_take(data, "finetune_epochs", int, 5, w),
            encoder_hidden=_int_tuple(data, "encoder_hidden", (64,), w),
            feature_width=_take(data, "feature_width", int, 32, w),
            classifier_hidden=_int_tuple(data, "classifier_hidden", (64, 64), w),
            discriminator_hidden=_int_tuple(data, "discriminator_hidden", (256, 256), w),
        )
        _no_leftovers(data, w)
        if len(settings.discriminator_hidden) != 2:
            raise ConfigError("adda.discriminator_hidden must list exactly 2 widths (3-layer discriminator)")
        if settings.finetune_epochs < 0:
            raise ConfigError("adda.finetune_epochs must be >= 0")
        return settings

    def to_dict(self) -> dict[str, Any]:
        return {
            "split_income": self.split_income,
            "adversarial_steps": self.adversarial_steps,
            "disc_steps_per_gen_step": self.disc_steps_per_gen_step,
            "finetune": self.finetune,
            "finetune_epochs": self.finetune_epochs,
            "encoder_hidden": list(self.encoder_hidden),
            "feature_width": self.feature_width,
            "classifier_hidden": list(self.classifier_hidden),
            "discriminator_hidden": list(self.discriminator_hidden),
        }

    def to_adda_config(
        self, feature_dim: int, num_classes: int, batch_size: int, learning_rate: float, seed: int
    ) -> AddaConfig:
        return AddaConfig(
            encoder=MlpConfig(
                input_dim=feature_dim,
                hidden_dims=self.encoder_hidden,
                output_dim=self.feature_width,
                dropout_prob=0.0,
            ),
            classifier=MlpConfig(
                input_dim=self.feature_width,
                hidden_dims=self.classifier_hidden,
                output_dim=num_classes,
            ),
            discriminator=MlpConfig(
                input_dim=self.feature_width,
                hidden_dims=self.discriminator_hidden,
                output_dim=1,
                dropout_prob=0.0,
            ),
            adversarial_steps=self.adversarial_steps,
            disc_steps_per_gen_step=self.disc_steps_per_gen_step,
            batch_size=batch_size,
            learning_rate=learning_rate,
            seed=seed,
        )


@dataclass(frozen=True)
class PathsConfig:
    manifest: str | None = None
    output_dir: str | None = None

    def to_dict(self) -> dict[str, str]:
        out = {"manifest": self.manifest, "output_dir": self.output_dir}
        return {key: value for key, value in out.items() if value is not None}


def _synth_from_dict(raw: Mapping[str, Any], seed: int) -> SynthConfig:
    data = dict(raw)
    w = "synth."
    income_range = _take(data, "income_range", list, [100.0, 20000.0], w)
    if len(income_range) != 2 or not all(isinstance(v, int | float) for v in income_range):
        raise ConfigError(f"synth.income_range must be [min, max], got {income_range!r}")
    config = SynthConfig(
        num_classes=_take(data, "num_classes", int, 10, w),
        feature_dim=_take(data, "feature_dim", int, 16, w),
        samples_per_run=_take(data, "samples_per_run", int, 10000, w),
        income_range=(float(income_range[0]), float(income_range[1])),
        shift_strength=_take(data, "shift_strength", float, 2.0, w),
        imbalance_exponent=_take(data, "imbalance_exponent", float, 1.0, w),
        seed=_take(data, "seed", int, seed, w),
        assign_continents=_take(data, "assign_continents", bool, True, w),
    )
    _no_leftovers(data, w)
    return config


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, loaded from a single JSON file.

    ``focal_gamma`` belongs to ``method=focal`` and ``sampling_threshold`` to
    ``method=sampled``; either one set under another method is an error.
    """

    method: Method = Method.BASELINE
    focal_gamma: float | None = None
    sampling_threshold: int | None = None
    batch_size: int = 128
    learning_rate: float = 1e-3
    epochs: int = 10
    seed: int = 0
    bin_width: float = DEFAULT_BIN_WIDTH
    topk: int = DEFAULT_TOPK
    window: int = DEFAULT_WINDOW
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION
    synth: SynthConfig = field(default_factory=SynthConfig)
    adda: AddaSettings | None = None
    paths: PathsConfig = field(default_factory=PathsConfig)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ExperimentConfig:
        data = dict(raw)
        method_name = _take(data, "method", str, "baseline", "")
        try:
            method = Method(method_name)
        except ValueError as e:
            choices = ", ".join(m.value for m in Method)
            raise ConfigError(f"method must be one of {choices}, got {method_name!r}") from e

        focal_gamma = _take(data, "focal_gamma", float, None, "")
        if focal_gamma is not None and method is not Method.FOCAL:
            raise ConfigError("focal_gamma is only valid with method=focal")
        if method is Method.FOCAL and focal_gamma is None:
            focal_gamma = DEFAULT_FOCAL_GAMMA
        if focal_gamma is not None and not (math.isfinite(focal_gamma) and focal_gamma >= 0):
            raise ConfigError(f"focal_gamma must be finite and >= 0, got {focal_gamma}")

        threshold = _take(data, "sampling_threshold", int, None, "")
        if threshold is not None and method is not Method.SAMPLED:
            raise ConfigError("sampling_threshold is only valid with method=sampled")
        if method is Method.SAMPLED and threshold is None:
            threshold = DEFAULT_SAMPLING_THRESHOLD
        if threshold is not None and threshold < 1:
            raise ConfigError(f"sampling_threshold must be >= 1, got {threshold}")

        seed = _take(data, "seed", int, 0, "")
        synth_raw = _take(data, "synth", dict, {}, "")
        adda_raw = _take(data, "adda", dict, None, "")
        paths_raw = dict(_take(data, "paths", dict, {}, ""))
        paths = PathsConfig(
            manifest=_take(paths_raw, "manifest", str, None, "paths."),
            output_dir=_take(paths_raw, "output_dir", str, None, "paths."),
        )
        _no_leftovers(paths_raw, "paths.")

        try:
            config = cls(
                method=method,
                focal_gamma=focal_gamma,
                sampling_threshold=threshold,
                batch_size=_take(data, "batch_size", int, 128, ""),
                learning_rate=_take(data, "learning_rate", float, 1e-3, ""),
                epochs=_take(data, "epochs", int, 10, ""),
                seed=seed,
                bin_width=_take(data, "bin_width", float, DEFAULT_BIN_WIDTH, ""),
                topk=_take(data, "topk", int, DEFAULT_TOPK, ""),
                window=_take(data, "window", int, DEFAULT_WINDOW, ""),
                holdout_fraction=_take(data, "holdout_fraction", float, DEFAULT_HOLDOUT_FRACTION, ""),
                synth=_synth_from_dict(synth_raw, seed),
                adda=AddaSettings.from_dict(adda_raw) if adda_raw is not None else None,
                paths=paths,
            )
            _no_leftovers(data, "")
            config.train_config()
        except ConfigError:
            raise
        except ValidationError as e:
            raise ConfigError(str(e)) from e
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not (math.isfinite(config.bin_width) and config.bin_width > 0):
            raise ConfigError(f"bin_width must be positive, got {config.bin_width}")
        if config.window < 1:
            raise ConfigError(f"window must be >= 1, got {config.window}")
        if not 0.0 < config.holdout_fraction < 1.0:
            raise ConfigError(f"holdout_fraction must be in (0, 1), got {config.holdout_fraction}")
        return config

    @classmethod
    def from_file(
        cls,
        path: str | Path | None,
        overrides: Iterable[str] = (),
        **flags: Any,
    ) -> ExperimentConfig:
        """Load JSON, apply ``key.sub=value`` overrides, then non-None ``flags``."""
        raw: dict[str, Any] = {}
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except FileNotFoundError as e:
                raise NotFoundError(f"config file not found: {path}") from e
            except OSError as e:
                raise StorageIOError(f"cannot read config file {path}: {e.strerror or e}") from e
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON: {e}") from e
            if not isinstance(raw, dict):
                raise ConfigError(f"{path}: top level must be a JSON object")
        for item in overrides:
            apply_override(raw, item)
        for key, value in flags.items():
            if value is not None:
                raw[key] = value
        return cls.from_dict(raw)

    def train_config(self, epochs: int | None = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs if epochs is None else epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            topk=self.topk,
        )

    def adda_settings(self) -> AddaSettings:
        return self.adda or AddaSettings()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"method": self.method.value}
        if self.focal_gamma is not None:
            out["focal_gamma"] = self.focal_gamma
        if self.sampling_threshold is not None:
            out["sampling_threshold"] = self.sampling_threshold
        out.update(
            {
                "batch_size": self.batch_size,
                "learning_rate": self.learning_rate,
                "epochs": self.epochs,
                "seed": self.seed,
                "bin_width": self.bin_width,
                "topk": self.topk,
                "window": self.window,
                "holdout_fraction": self.holdout_fraction,
                "synth": self.synth.to_dict(),
                "paths": self.paths.to_dict(),
            }
        )
        if self.adda is not None:
            out["adda"] = self.adda.to_dict()
        return out


def apply_override(raw: dict[str, Any], item: str) -> None:
    """Set ``a.b.c=value`` in a nested dict; the value is parsed as JSON when possible."""
    key, sep, text = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value, got {item!r}")
    try:
        value: Any = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set {key}: {part} is not a section")
        node = child
    node[parts[-1]] = value
