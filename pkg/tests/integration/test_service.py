"""Integration tests for ExperimentService stages wired to real adapters."""

import hashlib
import io
import json
import logging

import pandas as pd
import pytest

from geofair.core.checkpoint import decode_model, encode_model
from geofair.core.config import ExperimentConfig
from geofair.core.dataset import bin_by_income, holdout_split
from geofair.core.errors import CheckpointError, NotFoundError
from geofair.core.numerics import MlpConfig, MlpModel, Rng
from geofair.core.service import ADDA_CHECKPOINTS

SMALL = {
    "seed": 11,
    "epochs": 2,
    "batch_size": 64,
    "learning_rate": 0.01,
    "topk": 3,
    "synth": {"num_classes": 4, "feature_dim": 6, "samples_per_run": 400},
    "adda": {
        "adversarial_steps": 5,
        "encoder_hidden": [16],
        "feature_width": 8,
        "classifier_hidden": [16],
        "discriminator_hidden": [16, 16],
        "finetune_epochs": 1,
    },
}


def _config(**changes):
    return ExperimentConfig.from_dict({**SMALL, **changes})


def _manifest_digest(temp_dir):
    return hashlib.sha256((temp_dir / "out" / "manifest.csv").read_bytes()).hexdigest()


@pytest.fixture
def generated(service):
    config = _config()
    service.generate(config, "out")
    return config


def test_generate_writes_manifest(service, temp_dir):
    """Generate writes a parseable manifest and summarises it."""
    summary = service.generate(_config(), "out")

    assert summary.manifest_path == "out/manifest.csv"
    assert summary.rows == 400
    assert sum(summary.bin_counts.values()) == 400
    assert sum(summary.class_counts) == 400
    assert summary.shift_strength == 2.0
    manifest = service.load_manifest(summary.manifest_path)
    assert len(manifest) == 400
    assert (temp_dir / "out" / "manifest.csv").is_file()


def test_generate_is_byte_identical_across_runs(service, temp_dir):
    service.generate(_config(), "a")
    service.generate(_config(), "b")

    first = (temp_dir / "a" / "manifest.csv").read_bytes()
    assert first == (temp_dir / "b" / "manifest.csv").read_bytes()


def test_paths_manifest_overrides_output_dir(service, temp_dir):
    config = _config(paths={"manifest": "data/shared.csv"})
    summary = service.generate(config, "out")

    assert summary.manifest_path == "data/shared.csv"
    assert (temp_dir / "data" / "shared.csv").is_file()


def test_ingest_enriches_rows(service, temp_dir):
    """Ingest fills continents and incomes, then writes a clean manifest."""
    (temp_dir / "raw.csv").write_text(
        "id,label,income,latitude,longitude,continent,f0,f1\n"
        "paris,0,,48.85,2.35,,0.1,0.2\n"
        "nairobi,2,,-1.29,36.82,,0.3,0.4\n"
        "known,1,75,,,Asia,0.5,0.6\n",
        encoding="utf-8",
    )

    summary = service.ingest("raw.csv", "clean/manifest.csv")

    assert summary.rows == 3
    assert summary.num_classes == 3
    assert summary.continent_counts == {"Europe": 1, "Africa": 1, "Asia": 1}
    manifest = service.load_manifest("clean/manifest.csv")
    assert [s.income for s in manifest.samples] == [29410.0, 1930.0, 75.0]


def test_ingest_missing_source(service):
    with pytest.raises(NotFoundError, match="nope.csv"):
        service.ingest("nope.csv", "out/manifest.csv")


def test_train_writes_all_artifacts(service, generated, temp_dir, real_hasher):
    """Train fits on the non-holdout rows and writes checkpoint and logs."""
    summary = service.train(generated, "out")

    manifest = service.load_manifest("out/manifest.csv")
    train_set, validation = holdout_split(manifest, real_hasher)
    assert summary.train_rows == len(train_set)
    assert summary.validation_rows == len(validation)
    assert summary.steps == 2 * -(-len(train_set) // 64)
    assert summary.k == 3
    assert summary.val_topk is not None

    model = decode_model((temp_dir / "out" / "model.ckpt").read_bytes())
    assert model.config.layer_dims == (6, 256, 256, 4)

    log = pd.read_csv(temp_dir / "out" / "training_log.csv")
    assert log["epoch"].tolist() == [1, 2]
    losses = pd.read_csv(temp_dir / "out" / "step_losses.csv")
    assert len(losses) == summary.steps

    experiment = json.loads((temp_dir / "out" / "experiment.json").read_text())
    assert experiment["config"]["method"] == "baseline"
    assert experiment["steps"] == summary.steps
    assert experiment["num_classes"] == 4
    assert experiment["manifest_sha256"] == _manifest_digest(temp_dir)
    assert "out/experiment.json" in summary.outputs


def test_train_is_deterministic(service, generated, temp_dir):
    service.train(generated, "run1")
    service.train(generated, "run2")
    first = (temp_dir / "run1" / "model.ckpt").read_bytes()
    assert first == (temp_dir / "run2" / "model.ckpt").read_bytes()


def test_train_without_manifest(service):
    with pytest.raises(NotFoundError, match="out/manifest.csv"):
        service.train(_config(), "out")


def test_sampled_training_set(service, generated, temp_dir, real_hasher):
    """Every occupied income bin of the training split lands on the threshold."""
    config = _config(method="sampled", sampling_threshold=20, epochs=1)
    summary = service.train(config, "out")

    train_set, _ = holdout_split(service.load_manifest("out/manifest.csv"), real_hasher)
    bins = len(bin_by_income(train_set).counts())
    assert summary.train_rows == 20 * bins

    # Oversampled bins repeat ids, so read the training manifest as a plain table.
    frame = pd.read_csv(temp_dir / "out" / "train_manifest.csv")
    assert len(frame) == 20 * bins
    per_bin = (frame["income"] // 300.0).value_counts()
    assert set(per_bin.tolist()) == {20}


@pytest.mark.parametrize("method", ["weighted", "focal"])
def test_other_methods_train(service, generated, method):
    summary = service.train(_config(method=method, epochs=1), "out")
    assert summary.method.value == method
    assert summary.steps > 0


def test_report_after_train(service, generated, temp_dir):
    """Report scores the validation holdout and writes every artifact."""
    trained = service.train(generated, "out")
    summary = service.report(generated, "out")

    report = summary.report
    assert report.sample_count == trained.validation_rows
    assert report.k == 3
    assert sorted(p.split("/")[-1] for p in summary.outputs) == [
        "curve.csv",
        "curve.svg",
        "hits.csv",
        "report.json",
    ]
    payload = json.loads((temp_dir / "out" / "report.json").read_text())
    assert payload["checkpoints"] == ["out/model.ckpt"]
    assert payload["split"] == "validation"
    assert payload["manifest_sha256"] == _manifest_digest(temp_dir)
    assert payload["overall_topk"] == report.overall_topk

    hits = pd.read_csv(io.StringIO((temp_dir / "out" / "hits.csv").read_text()))
    assert hits["hit"].mean() == report.overall_topk


def test_report_without_svg(service, generated, temp_dir):
    service.train(generated, "out")
    service.report(generated, "out", svg=False)
    assert not (temp_dir / "out" / "curve.svg").exists()


def test_report_clamps_k(service, generated, caplog):
    service.train(generated, "out")
    config = _config(topk=5)

    with caplog.at_level(logging.WARNING, logger="geofair"):
        summary = service.report(config, "out")

    assert summary.report.k == 3
    assert any("Clamped top-k" in r.getMessage() for r in caplog.records)


def test_report_missing_checkpoint_names_path(service, generated):
    with pytest.raises(NotFoundError, match="out/model.ckpt"):
        service.report(generated, "out")


def test_report_names_every_missing_checkpoint(service, generated, store):
    head = MlpModel.initialize(MlpConfig(input_dim=6, output_dim=4, hidden_dims=(4,)), Rng(0))
    store.write_bytes("out/head.ckpt", encode_model(head))

    with pytest.raises(NotFoundError) as info:
        service.report(generated, "out", ["out/encoder.ckpt", "out/head.ckpt", "out/extra.ckpt"])

    assert str(info.value) == "checkpoint not found: out/encoder.ckpt, out/extra.ckpt"


def test_report_rejects_chain_that_does_not_fit(service, generated, store):
    wrong = MlpModel.initialize(MlpConfig(input_dim=6, output_dim=7, hidden_dims=(4,)), Rng(0))
    store.write_bytes("out/wrong.ckpt", encode_model(wrong))

    with pytest.raises(CheckpointError, match="out/wrong.ckpt: produces 7 classes"):
        service.report(generated, "out", ["out/wrong.ckpt"])


def test_report_rejects_corrupt_checkpoint(service, generated, store):
    store.write_bytes("out/model.ckpt", b"not a checkpoint")

    with pytest.raises(CheckpointError, match="out/model.ckpt: .*bad magic"):
        service.report(generated, "out")


def test_adapt_then_report_on_adapted_chain(service, generated, temp_dir):
    """ADDA writes its checkpoints and the transfer table, and the chain reports."""
    summary = service.adapt(generated, "out")

    assert set(summary.transfer) == {
        "source_to_source",
        "target_to_target",
        "source_to_target",
        "adapted_to_target",
    }
    assert all(0.0 <= v <= 1.0 for v in summary.transfer.values())
    assert summary.final_disc_acc is not None
    for name in ADDA_CHECKPOINTS:
        assert (temp_dir / "out" / f"{name}.ckpt").is_file()

    history = pd.read_csv(temp_dir / "out" / "adversarial_history.csv")
    assert history["step"].tolist() == [1, 2, 3, 4, 5]
    transfer = json.loads((temp_dir / "out" / "transfer.json").read_text())
    assert transfer["transfer"] == summary.transfer
    assert transfer["finetuned"] is True
    assert transfer["manifest_sha256"] == _manifest_digest(temp_dir)

    chain = ["out/target_encoder.ckpt", "out/classifier.ckpt"]
    report = service.report(generated, "out", chain).report
    assert 0.0 <= report.overall_topk <= 1.0


def test_adapt_is_deterministic(service, generated, temp_dir):
    first = service.adapt(generated, "a")
    second = service.adapt(generated, "b")

    assert first.transfer == second.transfer
    for name in ADDA_CHECKPOINTS:
        assert (temp_dir / "a" / f"{name}.ckpt").read_bytes() == (
            temp_dir / "b" / f"{name}.ckpt"
        ).read_bytes()
