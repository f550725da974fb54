"""Unit tests for training objectives."""

import numpy as np
import pytest
from scipy.special import log_softmax

from geofair.core.errors import ShapeError, ValidationError
from geofair.core.losses import (
    FocalConfig,
    bce_with_logits,
    focal_loss,
    income_weighted_sum,
    income_weights,
    nll_loss,
    stable_softmax,
    weighted_batch_loss,
)
from geofair.core.numerics import MlpConfig, MlpModel, Rng, gradient_check


@pytest.fixture
def batch():
    rng = Rng(11)
    return rng.normal((8, 5), scale=2.0), rng.integers(5, 8), rng.uniform(100.0, 9000.0, 8)


def _linear_head(seed=0):
    config = MlpConfig(
        input_dim=4, output_dim=5, hidden_dims=(6, 6), dropout_prob=0.0, use_relu=(False, False)
    )
    return MlpModel.initialize(config, Rng(seed))


class TestNll:
    def test_matches_log_softmax(self, batch):
        logits, labels, _ = batch
        expected = -np.mean(log_softmax(logits, axis=1)[np.arange(8), labels])
        assert nll_loss(logits, labels).value == pytest.approx(expected, rel=1e-14)

    def test_gradient_rows_sum_to_zero(self, batch):
        logits, labels, _ = batch
        grad = nll_loss(logits, labels).dloss_dlogits
        assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-15)

    def test_large_logits_stay_finite(self):
        result = nll_loss(np.array([[1000.0, -1000.0, 0.0]]), [1])
        assert np.isfinite(result.value)
        assert result.value == pytest.approx(2000.0)

    def test_label_out_of_range(self, batch):
        logits, _, _ = batch
        with pytest.raises(ValidationError, match="outside"):
            nll_loss(logits, np.full(8, 5))

    def test_label_count_mismatch(self, batch):
        logits, labels, _ = batch
        with pytest.raises(ShapeError):
            nll_loss(logits, labels[:3])

    def test_float_labels_rejected(self, batch):
        logits, _, _ = batch
        with pytest.raises(ValidationError, match="integers"):
            nll_loss(logits, np.zeros(8))

    def test_softmax_rows_normalized(self, batch):
        logits, _, _ = batch
        assert np.allclose(stable_softmax(logits).sum(axis=1), 1.0)


class TestIncomeWeighting:
    def test_equal_incomes_give_summed_nll(self, batch):
        logits, labels, _ = batch
        weighted = weighted_batch_loss(logits, labels, np.full(8, 750.0))
        plain = nll_loss(logits, labels)
        assert weighted.value == pytest.approx(plain.value * 8, abs=1e-12)
        assert np.allclose(weighted.dloss_dlogits, plain.dloss_dlogits * 8, atol=1e-12)

    @pytest.mark.parametrize("scale", [1e-3, 0.5, 7.0, 1e4])
    def test_income_scale_invariance(self, batch, scale):
        logits, labels, incomes = batch
        base = weighted_batch_loss(logits, labels, incomes)
        scaled = weighted_batch_loss(logits, labels, incomes * scale)
        assert scaled.value == pytest.approx(base.value, abs=1e-10)
        assert np.allclose(scaled.dloss_dlogits, base.dloss_dlogits, atol=1e-10)

    def test_poorer_sample_weighs_more(self):
        weights = income_weights([100.0, 900.0], 2)
        assert weights[0] == pytest.approx(5.0)
        assert weights[1] == pytest.approx(500.0 / 900.0)

    def test_weighted_sum_helper(self):
        assert income_weighted_sum([1.0, 1.0], [100.0, 300.0]) == pytest.approx(200 / 100 + 200 / 300)

    @pytest.mark.parametrize("incomes", [[0.0, 1.0], [-5.0, 1.0], [np.nan, 1.0]])
    def test_invalid_incomes(self, incomes):
        with pytest.raises(ValidationError):
            income_weights(incomes, 2)

    def test_per_sample_losses_are_unweighted(self, batch):
        logits, labels, incomes = batch
        weighted = weighted_batch_loss(logits, labels, incomes)
        assert np.array_equal(weighted.per_sample_losses, nll_loss(logits, labels).per_sample_losses)


class TestFocal:
    def test_gamma_zero_equals_nll(self):
        rng = Rng(99)
        for _ in range(1000):
            logits = rng.normal((4, 6), scale=2.0)
            labels = rng.integers(6, 4)
            focal = focal_loss(logits, labels, FocalConfig(gamma=0.0))
            plain = nll_loss(logits, labels)
            assert abs(focal.value - plain.value) <= 1e-12
            assert np.max(np.abs(focal.dloss_dlogits - plain.dloss_dlogits)) <= 1e-12

    def test_down_weights_confident_samples(self):
        logits = np.array([[6.0, 0.0, 0.0], [0.2, 0.0, 0.0]])
        labels = [0, 0]
        nll = nll_loss(logits, labels).per_sample_losses
        focal = focal_loss(logits, labels, FocalConfig(gamma=2.0)).per_sample_losses
        assert focal[0] / nll[0] < focal[1] / nll[1]
        assert np.all(focal <= nll)

    def test_perfect_prediction_has_zero_gradient(self):
        result = focal_loss(np.array([[800.0, 0.0]]), [0], FocalConfig(gamma=0.5))
        assert result.value == 0.0
        assert np.all(np.isfinite(result.dloss_dlogits))
        assert np.allclose(result.dloss_dlogits, 0.0)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValidationError, match="gamma"):
            FocalConfig(gamma=-1.0)


class TestBce:
    def test_matches_reference(self):
        x = np.array([-2.0, 0.0, 3.0])
        t = np.array([0.0, 1.0, 1.0])
        p = 1.0 / (1.0 + np.exp(-x))
        expected = -np.mean(t * np.log(p) + (1 - t) * np.log(1 - p))
        assert bce_with_logits(x, t).value == pytest.approx(expected, rel=1e-12)

    def test_keeps_column_shape(self):
        result = bce_with_logits(np.zeros((4, 1)), np.ones(4))
        assert result.dloss_dlogits.shape == (4, 1)
        assert result.value == pytest.approx(np.log(2.0))

    def test_extreme_logits_are_finite(self):
        result = bce_with_logits(np.array([1e4, -1e4]), np.array([0.0, 1.0]))
        assert result.value == pytest.approx(1e4)

    def test_targets_must_be_binary(self):
        with pytest.raises(ValidationError):
            bce_with_logits(np.zeros(2), np.array([0.5, 1.0]))

    def test_wide_matrix_rejected(self):
        with pytest.raises(ShapeError):
            bce_with_logits(np.zeros((2, 2)), np.zeros(2))


class TestLossGradients:
    """Every objective composed with a 2-hidden-layer network passes the gradient check."""

    X = Rng(5).normal((6, 4))
    LABELS = np.array([0, 1, 2, 3, 4, 0])
    INCOMES = np.array([150.0, 420.0, 900.0, 2500.0, 8000.0, 19000.0])

    def test_nll(self):
        report = gradient_check(_linear_head(), self.X, lambda z: nll_loss(z, self.LABELS))
        assert report.passed, report

    def test_weighted(self):
        report = gradient_check(
            _linear_head(), self.X, lambda z: weighted_batch_loss(z, self.LABELS, self.INCOMES)
        )
        assert report.passed, report

    @pytest.mark.parametrize("gamma", [0.0, 2.0, 5.0, 7.0])
    def test_focal(self, gamma):
        config = FocalConfig(gamma=gamma)
        report = gradient_check(_linear_head(), self.X, lambda z: focal_loss(z, self.LABELS, config))
        assert report.passed, report

    def test_bce(self):
        config = MlpConfig(
            input_dim=4, output_dim=1, hidden_dims=(6, 6), dropout_prob=0.0, use_relu=(False, False)
        )
        model = MlpModel.initialize(config, Rng(2))
        targets = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 1.0])
        report = gradient_check(model, self.X, lambda z: bce_with_logits(z, targets))
        assert report.passed, report
