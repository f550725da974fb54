"""Integration tests for the geofair command line."""

import json

import pytest
from click.testing import CliRunner

from geofair.app.cli.main import cli

SMALL = {
    "seed": 5,
    "epochs": 1,
    "batch_size": 64,
    "learning_rate": 0.01,
    "topk": 2,
    "synth": {"num_classes": 4, "feature_dim": 6, "samples_per_run": 300},
    "adda": {
        "adversarial_steps": 3,
        "encoder_hidden": [8],
        "feature_width": 8,
        "classifier_hidden": [8],
        "discriminator_hidden": [8, 8],
        "finetune": False,
    },
}


@pytest.fixture
def runner(monkeypatch, logger_adapter):
    """CLI runner with quiet metrics; the geofair logger already has its handler."""
    monkeypatch.setenv("GF_METRICS", "noop")
    monkeypatch.delenv("GF_OUTPUT_DIR", raising=False)
    return CliRunner()


@pytest.fixture
def config_file(temp_dir, write_config):
    return str(write_config(temp_dir / "experiment.json", **SMALL))


@pytest.fixture
def out(temp_dir):
    return str(temp_dir / "out")


def _run(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


class TestCliBasics:
    """Test global options."""

    def test_version(self, runner):
        result = _run(runner, "--version")
        assert result.exit_code == 0
        assert result.output.startswith("geofair ")

    def test_help_lists_commands(self, runner):
        result = _run(runner, "--help")
        assert result.exit_code == 0
        for command in ("generate", "ingest", "train", "adapt", "report"):
            assert command in result.output


class TestGenerateCommand:
    """Test the generate command."""

    def test_prints_histograms(self, runner, config_file, out):
        result = _run(runner, "generate", "-c", config_file, "-o", out)

        assert result.exit_code == 0, result.output
        assert "Wrote 300 samples" in result.output
        assert "shift_strength: 2.0" in result.output
        assert "Samples per income bin (width 300):" in result.output
        assert "Samples per class:" in result.output

    def test_same_seed_same_bytes(self, runner, config_file, temp_dir):
        for name in ("a", "b"):
            result = _run(runner, "generate", "-c", config_file, "-o", temp_dir / name)
            assert result.exit_code == 0, result.output

        first = (temp_dir / "a" / "manifest.csv").read_bytes()
        assert first == (temp_dir / "b" / "manifest.csv").read_bytes()

    def test_seed_flag_changes_output(self, runner, config_file, temp_dir):
        _run(runner, "generate", "-c", config_file, "-o", temp_dir / "a")
        _run(runner, "generate", "-c", config_file, "-o", temp_dir / "b", "--seed", 6)

        first = (temp_dir / "a" / "manifest.csv").read_bytes()
        assert first != (temp_dir / "b" / "manifest.csv").read_bytes()

    def test_set_override(self, runner, config_file, out):
        result = _run(
            runner, "generate", "-c", config_file, "-o", out, "--set", "synth.samples_per_run=50"
        )
        assert result.exit_code == 0, result.output
        assert "Wrote 50 samples" in result.output


class TestTrainAndReport:
    """Test train followed by report."""

    @pytest.mark.parametrize(
        ("method", "extra"),
        [
            ("baseline", ()),
            ("weighted", ()),
            ("sampled", ("--set", "sampling_threshold=20")),
            ("focal", ()),
        ],
    )
    def test_train_then_report(self, runner, config_file, out, temp_dir, method, extra):
        assert _run(runner, "generate", "-c", config_file, "-o", out).exit_code == 0

        trained = _run(runner, "train", "-c", config_file, "-o", out, "--method", method, *extra)
        assert trained.exit_code == 0, trained.output
        assert f"Trained {method}" in trained.output
        assert "Checkpoint:" in trained.output

        reported = _run(runner, "report", "-c", config_file, "-o", out)
        assert reported.exit_code == 0, reported.output
        assert "top-2 accuracy:" in reported.output
        assert "accuracy_range:" in reported.output
        assert "low_high_gap:" in reported.output
        for name in ("report.json", "curve.csv", "hits.csv", "curve.svg"):
            assert (temp_dir / "out" / name).is_file()

    def test_report_is_reproducible(self, runner, config_file, temp_dir):
        for name in ("a", "b"):
            target = temp_dir / name
            _run(runner, "generate", "-c", config_file, "-o", target)
            _run(runner, "train", "-c", config_file, "-o", target)
            result = _run(runner, "report", "-c", config_file, "-o", target)
            assert result.exit_code == 0, result.output

        # report.json records absolute paths, so only the path-free artifacts are compared.
        for name in ("curve.csv", "hits.csv", "curve.svg"):
            assert (temp_dir / "a" / name).read_bytes() == (temp_dir / "b" / name).read_bytes()

    def test_focal_gamma_override(self, runner, config_file, out):
        _run(runner, "generate", "-c", config_file, "-o", out)
        result = _run(
            runner, "train", "-c", config_file, "-o", out, "--method", "focal", "--set", "focal_gamma=5"
        )
        assert result.exit_code == 0, result.output


class TestAdaptCommand:
    """Test the adapt command."""

    def test_adapt_prints_transfer_table(self, runner, config_file, out, temp_dir):
        _run(runner, "generate", "-c", config_file, "-o", out)
        result = _run(runner, "adapt", "-c", config_file, "-o", out)

        assert result.exit_code == 0, result.output
        for row in ("source_to_source", "target_to_target", "source_to_target", "adapted_to_target"):
            assert row in result.output
        transfer = json.loads((temp_dir / "out" / "transfer.json").read_text())
        assert transfer["finetuned"] is False

        chained = _run(
            runner,
            "report",
            "-c",
            config_file,
            "-o",
            out,
            "--checkpoint",
            temp_dir / "out" / "target_encoder.ckpt",
            "--checkpoint",
            temp_dir / "out" / "classifier.ckpt",
            "--no-svg",
        )
        assert chained.exit_code == 0, chained.output
        assert not (temp_dir / "out" / "curve.svg").exists()


class TestIngestCommand:
    """Test the ingest command."""

    def test_ingest(self, runner, temp_dir, out):
        raw = temp_dir / "raw.csv"
        raw.write_text(
            "id,label,income,latitude,longitude,continent,f0,f1\n"
            "a,0,,48.85,2.35,,0,1\n"
            "b,1,,,,Oceania,1,0\n",
            encoding="utf-8",
        )

        result = _run(runner, "ingest", raw, "-o", out, "--num-classes", 5)

        assert result.exit_code == 0, result.output
        assert "Ingested 2 samples (5 classes)" in result.output
        assert "Europe: 1" in result.output
        assert (temp_dir / "out" / "manifest.csv").is_file()

    def test_bad_row_names_line_and_column(self, runner, temp_dir, out):
        raw = temp_dir / "raw.csv"
        raw.write_text(
            "id,label,income,latitude,longitude,continent,f0\na,zero,100,,,,0\n",
            encoding="utf-8",
        )

        result = _run(runner, "ingest", raw, "-o", out)

        assert result.exit_code == 1
        assert "line 2, column 'label'" in result.output


class TestExitCodes:
    """Test error to exit code mapping."""

    def test_invalid_method_is_validation_error(self, runner, config_file, out):
        result = _run(runner, "train", "-c", config_file, "-o", out, "--method", "magic")
        assert result.exit_code == 1
        assert "Error: method must be one of" in result.output

    def test_unknown_config_key(self, runner, config_file, out):
        result = _run(runner, "generate", "-c", config_file, "-o", out, "--set", "epoch=3")
        assert result.exit_code == 1
        assert "unknown config key(s): epoch" in result.output

    def test_missing_config_is_io_error(self, runner, temp_dir, out):
        result = _run(runner, "generate", "-c", temp_dir / "absent.json", "-o", out)
        assert result.exit_code == 2
        assert "config file not found" in result.output

    def test_missing_checkpoint_names_path(self, runner, config_file, out, temp_dir):
        _run(runner, "generate", "-c", config_file, "-o", out)
        missing = temp_dir / "out" / "nothing.ckpt"

        result = _run(runner, "report", "-c", config_file, "-o", out, "--checkpoint", missing)

        assert result.exit_code == 2
        assert str(missing) in result.output

    def test_diverging_training_is_numeric_error(self, runner, config_file, out):
        _run(runner, "generate", "-c", config_file, "-o", out)

        result = _run(runner, "train", "-c", config_file, "-o", out, "--set", "learning_rate=1e300")

        assert result.exit_code == 3
        assert "non-finite" in result.output

    def test_bad_environment(self, runner, monkeypatch):
        monkeypatch.setenv("GF_EVAL_WORKERS", "lots")
        result = _run(runner, "generate")
        assert result.exit_code == 1
        assert "GF_EVAL_WORKERS" in result.output
