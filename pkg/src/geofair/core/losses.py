"""Training objectives and their gradients w.r.t. logits.

``nll_loss`` and ``focal_loss`` are batch means. ``weighted_batch_loss`` is a
batch SUM scaled by the mean batch income, so its magnitude grows with batch
size; with Adam this mostly washes out, with plain SGD it would not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit, log_softmax, softmax

from .errors import ShapeError, ValidationError
from .numerics import Matrix, Vector

# p_t floor before taking the log; the modulating factor uses the raw p_t.
PT_FLOOR = 1e-12
_LOG_PT_FLOOR = math.log(PT_FLOOR)


@dataclass(frozen=True)
class FocalConfig:
    """Focusing parameter of the focal loss."""

    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValidationError(f"focal gamma must be finite and >= 0, got {self.gamma}")


@dataclass(frozen=True)
class BatchLossResult:
    """Scalar loss, its logit gradient, and the unreduced per-sample losses."""

    value: float
    dloss_dlogits: Matrix
    per_sample_losses: Vector


def as_logits(logits: ArrayLike) -> Matrix:
    array = np.asarray(logits, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] == 0:
        raise ShapeError(f"logits must be a non-empty 2-D matrix, got shape {array.shape}")
    return array


def as_labels(labels: ArrayLike, logits: Matrix) -> NDArray[np.int64]:
    array = np.asarray(labels)
    if array.shape != (logits.shape[0],):
        raise ShapeError(f"expected {logits.shape[0]} labels, got shape {array.shape}")
    if array.size and not np.issubdtype(array.dtype, np.integer):
        raise ValidationError("labels must be integers")
    num_classes = logits.shape[1]
    bad = np.flatnonzero((array < 0) | (array >= num_classes))
    if bad.size:
        raise ValidationError(
            f"label {int(array[bad[0]])} at row {int(bad[0])} outside [0, {num_classes})"
        )
    return array.astype(np.int64)


def stable_softmax(logits: ArrayLike) -> Matrix:
    """Row-wise softmax with max subtraction."""
    return np.asarray(softmax(as_logits(logits), axis=1), dtype=np.float64)


def _one_hot(labels: NDArray[np.int64], num_classes: int) -> Matrix:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _nll_terms(logits: Matrix, labels: NDArray[np.int64]) -> tuple[Vector, Matrix]:
    """Per-sample NLL and the per-sample gradient (softmax - one-hot)."""
    rows = np.arange(labels.shape[0])
    log_probs = log_softmax(logits, axis=1)
    probs = softmax(logits, axis=1)
    return -log_probs[rows, labels], probs - _one_hot(labels, logits.shape[1])


def nll_loss(logits: ArrayLike, labels: ArrayLike) -> BatchLossResult:
    """Mean negative log-likelihood of the softmax."""
    z = as_logits(logits)
    y = as_labels(labels, z)
    per_sample, grad = _nll_terms(z, y)
    batch = z.shape[0]
    return BatchLossResult(
        value=float(np.mean(per_sample)),
        dloss_dlogits=grad / batch,
        per_sample_losses=per_sample,
    )


def income_weights(incomes: ArrayLike, batch_size: int) -> Vector:
    """mean(incomes) / income_i for every sample in the batch."""
    array = np.asarray(incomes, dtype=np.float64)
    if array.shape != (batch_size,):
        raise ShapeError(f"expected {batch_size} incomes, got shape {array.shape}")
    if not np.all(np.isfinite(array)) or np.any(array <= 0):
        raise ValidationError("incomes must be finite and strictly positive")
    return np.mean(array) / array


def income_weighted_sum(per_sample_losses: ArrayLike, incomes: ArrayLike) -> float:
    """mean_batch_income * sum_i(loss_i / income_i)."""
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    return float(np.sum(losses * income_weights(incomes, losses.shape[0])))


def weighted_batch_loss(
    logits: ArrayLike, labels: ArrayLike, incomes: ArrayLike
) -> BatchLossResult:
    """Income-weighted NLL summed over the batch.

    Each sample's NLL is divided by its income and the sum is rescaled by the
    mean batch income, so low-income samples weigh more and scaling every
    income by a constant changes nothing. ``per_sample_losses`` holds the raw,
    unweighted NLL terms.
    """
    z = as_logits(logits)
    y = as_labels(labels, z)
    weights = income_weights(incomes, z.shape[0])
    per_sample, grad = _nll_terms(z, y)
    return BatchLossResult(
        value=float(np.sum(per_sample * weights)),
        dloss_dlogits=grad * weights[:, None],
        per_sample_losses=per_sample,
    )


def focal_loss(logits: ArrayLike, labels: ArrayLike, config: FocalConfig) -> BatchLossResult:
    """Mean focal loss -(1 - p_t)^gamma * log(p_t).

    d/dz_j = [gamma (1-p_t)^(gamma-1) p_t log p_t - (1-p_t)^gamma] (onehot_j - p_j);
    at gamma = 0 this is exactly the NLL gradient.
    """
    z = as_logits(logits)
    y = as_labels(labels, z)
    gamma = config.gamma
    rows = np.arange(y.shape[0])
    batch = z.shape[0]

    log_pt = np.maximum(log_softmax(z, axis=1)[rows, y], _LOG_PT_FLOOR)
    probs = softmax(z, axis=1)
    pt = probs[rows, y]
    miss = 1.0 - pt
    modulator = miss**gamma
    per_sample = -modulator * log_pt

    coefficient = -modulator
    if gamma > 0:
        # (1 - p_t)^(gamma - 1) * log p_t -> 0 as p_t -> 1 for every gamma > 0.
        safe_miss = np.where(miss > 0.0, miss, 1.0)
        focus = gamma * safe_miss ** (gamma - 1.0) * pt * log_pt
        coefficient = coefficient + np.where(miss > 0.0, focus, 0.0)

    grad = coefficient[:, None] * (_one_hot(y, z.shape[1]) - probs)
    return BatchLossResult(
        value=float(np.mean(per_sample)),
        dloss_dlogits=grad / batch,
        per_sample_losses=per_sample,
    )


def bce_with_logits(logits: ArrayLike, targets: ArrayLike) -> BatchLossResult:
    """Mean binary cross-entropy on raw logits.

    Accepts a vector or an (N, 1) matrix of logits; the gradient is returned
    in the same shape.
    """
    raw = np.asarray(logits, dtype=np.float64)
    x = raw.reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x.size == 0 or (raw.ndim == 2 and raw.shape[1] != 1) or raw.ndim > 2:
        raise ShapeError(f"logits must be a non-empty vector or (N, 1) matrix, got {raw.shape}")
    if t.shape != x.shape:
        raise ShapeError(f"expected {x.size} targets, got {t.size}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValidationError("binary targets must be 0 or 1")

    per_sample = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    grad = (expit(x) - t) / x.size
    return BatchLossResult(
        value=float(np.mean(per_sample)),
        dloss_dlogits=grad.reshape(raw.shape),
        per_sample_losses=per_sample,
    )
