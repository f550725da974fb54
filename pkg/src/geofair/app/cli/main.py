"""CLI main entry point."""

import logging
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from typing import Any, NoReturn, TypeVar

import click

from ... import __version__
from ...adapters import (
    FsArtifactStore,
    LoggingMetricsAdapter,
    NoopMetricsAdapter,
    Sha256Adapter,
    StdLoggerAdapter,
    UtcClockAdapter,
)
from ...core import ExperimentService
from ...core.config import ExperimentConfig, GeoFairConfig
from ...core.errors import GeoFairError, NumericError, StorageIOError
from ...ports import MetricsPort

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

F = TypeVar("F", bound=Callable[..., Any])


def create_service(config: GeoFairConfig) -> ExperimentService:
    """Create service with wired adapters."""
    metrics: MetricsPort
    if config.metrics_type == "logging":
        metrics = LoggingMetricsAdapter()
    else:
        metrics = NoopMetricsAdapter()

    return ExperimentService(
        store=FsArtifactStore(),
        hasher=Sha256Adapter(),
        clock=UtcClockAdapter(),
        logger=StdLoggerAdapter(level=config.log_level),
        metrics=metrics,
        eval_workers=config.eval_workers,
    )


def exit_code_for(error: GeoFairError) -> int:
    if isinstance(error, StorageIOError):
        return EXIT_IO
    if isinstance(error, NumericError):
        return EXIT_NUMERIC
    return EXIT_VALIDATION


def _fail(error: GeoFairError) -> NoReturn:
    click.echo(f"Error: {error}", err=True)
    sys.exit(exit_code_for(error))


@contextmanager
def _errors_to_exit_codes() -> Iterator[None]:
    try:
        yield
    except GeoFairError as e:
        _fail(e)


class CliState:
    """Process settings plus a lazily built service."""

    def __init__(self, settings: GeoFairConfig):
        self.settings = settings
        self._service: ExperimentService | None = None

    @property
    def service(self) -> ExperimentService:
        if self._service is None:
            self._service = create_service(self.settings)
        return self._service

    def output_dir(self, flag: str | None, config: ExperimentConfig) -> str:
        """``--output-dir`` beats ``paths.output_dir``, which beats GF_OUTPUT_DIR."""
        return flag or config.paths.output_dir or self.settings.output_dir


def _version_callback(ctx: click.Context, param: click.Parameter, value: bool) -> None:
    """Callback for --version option."""
    if value:
        click.echo(f"geofair {__version__}")
        ctx.exit(0)


def experiment_options(func: F) -> F:
    """Options shared by every command that reads an experiment config."""
    func = click.option(
        "--output-dir", "-o", help="Directory for outputs (default: paths.output_dir or GF_OUTPUT_DIR)"
    )(func)
    func = click.option("--seed", type=int, help="Override the experiment seed")(func)
    func = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config key, e.g. --set synth.samples_per_run=1000",
    )(func)
    func = click.option("--config", "-c", "config_path", help="Experiment config (JSON)")(func)
    return func


def load_config(
    config_path: str | None, overrides: tuple[str, ...], **flags: Any
) -> ExperimentConfig:
    return ExperimentConfig.from_file(config_path, overrides, **flags)


@click.group()
@click.option("--debug", is_flag=True, help="Enable debug logging")
@click.option(
    "--version",
    is_flag=True,
    is_eager=True,
    expose_value=False,
    callback=_version_callback,
    help="Show version and exit",
)
@click.pass_context
def cli(ctx: click.Context, debug: bool) -> None:
    """GeoFair - measure and mitigate income bias in classifiers."""
    with _errors_to_exit_codes():
        settings = GeoFairConfig.from_env(log_level="DEBUG" if debug else "INFO")
    ctx.obj = CliState(settings)
    logging.getLogger("geofair").debug("geofair %s", __version__)


@cli.command()
@experiment_options
@click.pass_obj
def generate(
    state: CliState,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: str | None,
) -> None:
    """Generate a seeded synthetic manifest.

    Examples:
        geofair generate -c experiment.json
        geofair generate --seed 7 --set synth.samples_per_run=1000
    """
    with _errors_to_exit_codes():
        config = load_config(config_path, overrides, seed=seed)
        summary = state.service.generate(config, state.output_dir(output_dir, config))

    click.echo(f"Wrote {summary.rows} samples to {summary.manifest_path}")
    click.echo(f"shift_strength: {summary.shift_strength!r}")
    click.echo(f"Samples per income bin (width {summary.bin_width:g}):")
    for lower, count in summary.bin_counts.items():
        click.echo(f"  [{lower:g}, {lower + summary.bin_width:g}): {count}")
    click.echo("Samples per class:")
    for label, count in enumerate(summary.class_counts):
        click.echo(f"  {label}: {count}")


@cli.command()
@click.argument("source")
@click.option("--output", help="Enriched manifest path (default: paths.manifest or <output-dir>/manifest.csv)")
@click.option(
    "--override-income",
    is_flag=True,
    help="Replace existing incomes with the continent table value",
)
@click.option("--num-classes", type=int, help="Class count (default: largest label + 1)")
@experiment_options
@click.pass_obj
def ingest(
    state: CliState,
    source: str,
    output: str | None,
    override_income: bool,
    num_classes: int | None,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: str | None,
) -> None:
    """Validate a manifest CSV and fill continents and incomes from coordinates.

    Examples:
        geofair ingest raw.csv
        geofair ingest raw.csv --override-income --output data/manifest.csv
    """
    with _errors_to_exit_codes():
        config = load_config(config_path, overrides, seed=seed)
        destination = output or state.service.manifest_location(
            config, state.output_dir(output_dir, config)
        )
        summary = state.service.ingest(source, destination, override_income, num_classes)

    click.echo(f"Ingested {summary.rows} samples ({summary.num_classes} classes) into {summary.manifest_path}")
    for continent, count in summary.continent_counts.items():
        click.echo(f"  {continent}: {count}")


@cli.command()
@click.option(
    "--method",
    help="Mitigation method: baseline, weighted, sampled or focal (overrides the config)",
)
@experiment_options
@click.pass_obj
def train(
    state: CliState,
    method: str | None,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: str | None,
) -> None:
    """Train a classifier with the selected mitigation method.

    Examples:
        geofair train -c experiment.json
        geofair train -c experiment.json --method focal --set focal_gamma=5
    """
    with _errors_to_exit_codes():
        config = load_config(config_path, overrides, seed=seed, method=method)
        summary = state.service.train(config, state.output_dir(output_dir, config))

    click.echo(
        f"Trained {summary.method.value} on {summary.train_rows} samples "
        f"for {summary.steps} steps"
    )
    if summary.final_loss is not None:
        click.echo(f"final epoch loss: {summary.final_loss!r}")
    if summary.val_topk is not None:
        click.echo(f"validation top-{summary.k}: {summary.val_topk!r}")
    click.echo(f"Checkpoint: {summary.checkpoint_path}")


@cli.command()
@experiment_options
@click.pass_obj
def adapt(
    state: CliState,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: str | None,
) -> None:
    """Adapt a poorer-income target domain to a richer source domain.

    Examples:
        geofair adapt -c experiment.json
        geofair adapt -c experiment.json --set adda.split_income=800
    """
    with _errors_to_exit_codes():
        config = load_config(config_path, overrides, seed=seed)
        summary = state.service.adapt(config, state.output_dir(output_dir, config))

    click.echo(f"source samples: {summary.source_rows}, target samples: {summary.target_rows}")
    click.echo(f"Top-{summary.k} accuracy on the validation holdout:")
    for row, accuracy in summary.transfer.items():
        click.echo(f"  {row}: {accuracy!r}")
    if summary.final_disc_acc is not None:
        click.echo(f"final discriminator accuracy: {summary.final_disc_acc!r}")


@cli.command()
@click.option(
    "--checkpoint",
    "checkpoints",
    multiple=True,
    help="Checkpoint to evaluate; repeat to chain an encoder and a classifier "
    "(default: <output-dir>/model.ckpt)",
)
@click.option("--svg/--no-svg", default=True, help="Also plot curve.svg")
@experiment_options
@click.pass_obj
def report(
    state: CliState,
    checkpoints: tuple[str, ...],
    svg: bool,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: str | None,
) -> None:
    """Write the income-fairness report for a trained model.

    Examples:
        geofair report -c experiment.json
        geofair report -c experiment.json \\
            --checkpoint out/target_encoder.ckpt --checkpoint out/classifier.ckpt
    """
    with _errors_to_exit_codes():
        config = load_config(config_path, overrides, seed=seed)
        summary = state.service.report(
            config, state.output_dir(output_dir, config), checkpoints, svg
        )

    result = summary.report
    click.echo(f"top-{result.k} accuracy: {result.overall_topk!r} on {result.sample_count} samples")
    click.echo(f"accuracy_range: {result.accuracy_range!r}")
    click.echo(f"low_high_gap: {result.low_high_gap!r}")
    for path in summary.outputs:
        click.echo(f"Wrote {path}")


def main() -> None:
    """Main entry point."""
    cli()


__all__ = ["cli", "create_service", "exit_code_for", "main"]
