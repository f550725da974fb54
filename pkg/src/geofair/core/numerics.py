"""Dense feed-forward networks with explicit backpropagation and Adam.

Every network in GeoFair (classifier heads, ADDA encoders, the domain
discriminator) is an :class:`MlpModel`: a chain of affine layers with optional
ReLU and inverted dropout after each hidden layer and raw logits at the output.

All arithmetic is float64. Stochastic operations take an explicit :class:`Rng`
built on numpy's PCG64 bit generator, so a seed fixes the stream on every
platform numpy supports.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ContractError, NumericError, ShapeError, ValidationError

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]

_SEED_LIMIT = 2**64
_model_tokens = itertools.count(1)

# Gradients smaller than this are compared absolutely against it in gradient_check.
_ERROR_FLOOR = 1e-2


class Rng:
    """Seeded PCG64 stream.

    ``key`` derives independent child streams from one experiment seed
    (``Rng(7).child(1)`` never overlaps ``Rng(7).child(2)``).
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < _SEED_LIMIT:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, key: int) -> Rng:
        """Derive an independent stream without consuming this one."""
        return Rng(self.seed, (*self.key, key))

    def random(self, size: int | tuple[int, ...]) -> NDArray[np.float64]:
        return self.generator.random(size)

    def uniform(self, low: float, high: float, size: int | tuple[int, ...]) -> NDArray[np.float64]:
        return self.generator.uniform(low, high, size)

    def normal(self, size: int | tuple[int, ...], scale: float = 1.0) -> NDArray[np.float64]:
        return self.generator.normal(0.0, scale, size)

    def integers(self, high: int, size: int) -> NDArray[np.int64]:
        return self.generator.integers(0, high, size=size)

    def choice(
        self,
        population: ArrayLike,
        size: int,
        replace: bool,
        p: ArrayLike | None = None,
    ) -> NDArray[Any]:
        return self.generator.choice(np.asarray(population), size=size, replace=replace, p=p)

    def permutation(self, n: int) -> NDArray[np.int64]:
        return self.generator.permutation(n)


@dataclass(frozen=True)
class MlpConfig:
    """Architecture of a feed-forward network.

    The defaults reproduce the classifier head: two hidden layers of 256 ReLU
    units, each followed by dropout with probability 0.3.
    """

    input_dim: int
    output_dim: int
    hidden_dims: tuple[int, ...] = (256, 256)
    dropout_prob: float = 0.3
    use_relu: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        hidden = tuple(int(h) for h in self.hidden_dims)
        object.__setattr__(self, "hidden_dims", hidden)
        if self.use_relu is None:
            object.__setattr__(self, "use_relu", (True,) * len(hidden))
        else:
            object.__setattr__(self, "use_relu", tuple(bool(r) for r in self.use_relu))

        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in hidden):
            raise ValidationError(f"layer widths must be positive: {self.layer_dims}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValidationError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")
        if len(self.relu_flags) != len(hidden):
            raise ValidationError("use_relu needs exactly one flag per hidden layer")

    @property
    def relu_flags(self) -> tuple[bool, ...]:
        return self.use_relu or ()

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def num_layers(self) -> int:
        return len(self.hidden_dims) + 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "output_dim": self.output_dim,
            "dropout_prob": self.dropout_prob,
            "use_relu": list(self.relu_flags),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MlpConfig:
        try:
            return cls(
                input_dim=int(data["input_dim"]),
                output_dim=int(data["output_dim"]),
                hidden_dims=tuple(data.get("hidden_dims", (256, 256))),
                dropout_prob=float(data.get("dropout_prob", 0.3)),
                use_relu=tuple(data["use_relu"]) if data.get("use_relu") is not None else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"invalid MLP config {data!r}: {e}") from e


def _frozen_copy(values: ArrayLike) -> NDArray[np.float64]:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Parameters of a feed-forward network.

    Models are immutable values: parameter arrays are read-only copies and
    :func:`adam_step` returns a new model. ``token`` identifies the instance so
    an activation cache can only be replayed against the model that built it.
    """

    config: MlpConfig
    weights: tuple[Matrix, ...]
    biases: tuple[Vector, ...]
    token: int = field(default_factory=lambda: next(_model_tokens))

    def __post_init__(self) -> None:
        weights = tuple(_frozen_copy(w) for w in self.weights)
        biases = tuple(_frozen_copy(b) for b in self.biases)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

        dims = self.config.layer_dims
        if len(weights) != self.config.num_layers or len(biases) != self.config.num_layers:
            raise ShapeError(
                f"expected {self.config.num_layers} layers, got {len(weights)} weights "
                f"and {len(biases)} biases"
            )
        for layer, (w, b) in enumerate(zip(weights, biases, strict=True)):
            if w.shape != (dims[layer], dims[layer + 1]):
                raise ShapeError(
                    f"layer {layer} weight shape {w.shape} != {(dims[layer], dims[layer + 1])}"
                )
            if b.shape != (dims[layer + 1],):
                raise ShapeError(f"layer {layer} bias shape {b.shape} != {(dims[layer + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"layer {layer} has non-finite parameters")

    @classmethod
    def initialize(cls, config: MlpConfig, rng: Rng) -> MlpModel:
        """Glorot-uniform weights, zero biases."""
        weights = []
        biases = []
        dims = config.layer_dims
        for fan_in, fan_out in itertools.pairwise(dims):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(config=config, weights=tuple(weights), biases=tuple(biases))

    @classmethod
    def zeros(cls, config: MlpConfig) -> MlpModel:
        dims = config.layer_dims
        return cls(
            config=config,
            weights=tuple(np.zeros((a, b)) for a, b in itertools.pairwise(dims)),
            biases=tuple(np.zeros(b) for b in dims[1:]),
        )

    def parameters(self) -> list[NDArray[np.float64]]:
        """Parameters in update order: W0, b0, W1, b1, ..."""
        out: list[NDArray[np.float64]] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            out.extend((w, b))
        return out

    def with_parameters(self, params: list[NDArray[np.float64]]) -> MlpModel:
        """New model with parameters given in :meth:`parameters` order."""
        return MlpModel(config=self.config, weights=tuple(params[0::2]), biases=tuple(params[1::2]))

    def copy(self) -> MlpModel:
        return self.with_parameters(self.parameters())

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def flat_parameters(self) -> Vector:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def same_parameters(self, other: MlpModel) -> bool:
        """Bitwise equality of configs and every parameter."""
        if self.config != other.config:
            return False
        return all(
            a.tobytes() == b.tobytes()
            for a, b in zip(self.parameters(), other.parameters(), strict=True)
        )


@dataclass(frozen=True)
class ActivationCache:
    """Everything :func:`backward` needs from one forward pass."""

    model_token: int
    inputs: tuple[Matrix, ...]
    pre_activations: tuple[Matrix, ...]
    masks: tuple[Matrix | None, ...]

    @property
    def batch_size(self) -> int:
        return int(self.inputs[0].shape[0])


@dataclass(frozen=True)
class Gradients:
    """Gradients of a scalar loss w.r.t. every parameter and the batch."""

    weights: tuple[Matrix, ...]
    biases: tuple[Vector, ...]
    inputs: Matrix

    def parameters(self) -> list[NDArray[np.float64]]:
        out: list[NDArray[np.float64]] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            out.extend((w, b))
        return out


def forward(
    model: MlpModel,
    batch: ArrayLike,
    training: bool = False,
    rng: Rng | None = None,
) -> tuple[Matrix, ActivationCache]:
    """Compute raw logits for a batch.

    In training mode hidden activations pass through inverted dropout: kept
    units are scaled by 1/(1 - dropout_prob), so evaluation mode is a plain
    pass with no rescaling.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch must be a 2-D matrix, got shape {x.shape}")

    config = model.config
    use_dropout = training and config.dropout_prob > 0.0
    if use_dropout and rng is None:
        raise ValidationError("training-mode dropout needs an Rng")
    keep_scale = 1.0 / (1.0 - config.dropout_prob)

    inputs: list[Matrix] = []
    pre_activations: list[Matrix] = []
    masks: list[Matrix | None] = []
    activation = x
    last = config.num_layers - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases, strict=True)):
        if activation.shape[1] != w.shape[0]:
            raise ShapeError(
                f"layer {layer} expects {w.shape[0]} inputs, got {activation.shape[1]}"
            )
        inputs.append(activation)
        z = activation @ w + b
        if layer == last:
            cache = ActivationCache(
                model_token=model.token,
                inputs=tuple(inputs),
                pre_activations=tuple(pre_activations),
                masks=tuple(masks),
            )
            return z, cache

        pre_activations.append(z)
        hidden = np.maximum(z, 0.0) if config.relu_flags[layer] else z
        mask: Matrix | None = None
        if use_dropout:
            assert rng is not None
            mask = (rng.random(hidden.shape) >= config.dropout_prob) * keep_scale
            hidden = hidden * mask
        masks.append(mask)
        activation = hidden

    raise AssertionError("unreachable: a model has at least one layer")


def backward(model: MlpModel, cache: ActivationCache, dloss_dlogits: ArrayLike) -> Gradients:
    """Exact gradients of the loss, honoring the dropout masks in ``cache``."""
    if cache.model_token != model.token:
        raise ContractError("activation cache was produced by a different model")

    grad = np.asarray(dloss_dlogits, dtype=np.float64)
    expected = (cache.batch_size, model.config.output_dim)
    if grad.shape != expected:
        raise ShapeError(f"dLoss/dLogits shape {grad.shape} != {expected}")

    config = model.config
    weight_grads: list[Matrix] = [np.empty(0)] * config.num_layers
    bias_grads: list[Vector] = [np.empty(0)] * config.num_layers
    for layer in reversed(range(config.num_layers)):
        weight_grads[layer] = cache.inputs[layer].T @ grad
        bias_grads[layer] = grad.sum(axis=0)
        grad = grad @ model.weights[layer].T
        if layer == 0:
            break
        hidden = layer - 1
        mask = cache.masks[hidden]
        if mask is not None:
            grad = grad * mask
        if config.relu_flags[hidden]:
            grad = grad * (cache.pre_activations[hidden] > 0.0)

    return Gradients(weights=tuple(weight_grads), biases=tuple(bias_grads), inputs=grad)


@dataclass(frozen=True)
class AdamState:
    """Adam hyperparameters and per-parameter moment accumulators.

    Empty accumulators are treated as zeros of the matching shape, so a fresh
    ``AdamState()`` can drive any model.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: tuple[NDArray[np.float64], ...] = ()
    second_moment: tuple[NDArray[np.float64], ...] = ()

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValidationError("learning_rate and epsilon must be positive")


def _layer_label(index: int) -> str:
    kind = "weights" if index % 2 == 0 else "bias"
    return f"layer {index // 2} {kind}"


def adam_step(
    model: MlpModel, gradients: Gradients, state: AdamState
) -> tuple[MlpModel, AdamState]:
    """Apply one bias-corrected Adam update."""
    params = model.parameters()
    grads = gradients.parameters()
    if len(grads) != len(params):
        raise ShapeError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    for index, (p, g) in enumerate(zip(params, grads, strict=True)):
        if g.shape != p.shape:
            raise ShapeError(f"{_layer_label(index)} gradient shape {g.shape} != {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {_layer_label(index)}")

    first = state.first_moment or tuple(np.zeros_like(p) for p in params)
    second = state.second_moment or tuple(np.zeros_like(p) for p in params)
    step = state.step_count + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step

    new_params = []
    new_first = []
    new_second = []
    for p, g, m, v in zip(params, grads, first, second, strict=True):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        update = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        new_params.append(p - update)
        new_first.append(m)
        new_second.append(v)

    new_state = AdamState(
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        step_count=step,
        first_moment=tuple(new_first),
        second_moment=tuple(new_second),
    )
    return model.with_parameters(new_params), new_state


class LossOutput(Protocol):
    """Anything exposing a scalar loss and its gradient w.r.t. logits."""

    @property
    def value(self) -> float: ...

    @property
    def dloss_dlogits(self) -> Matrix: ...


LossFn = Callable[[Matrix], LossOutput]


@dataclass(frozen=True)
class LayerCheck:
    layer: int
    max_relative_error: float
    passed: bool


@dataclass(frozen=True)
class GradientCheckReport:
    """Analytic vs central-difference gradients, per layer."""

    layers: tuple[LayerCheck, ...]
    tolerance: float
    step: float
    # Smallest |pre-activation| seen; below ``step`` a ReLU kink may be straddled.
    min_preactivation_margin: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.layers)

    @property
    def max_relative_error(self) -> float:
        return max(check.max_relative_error for check in self.layers)


def gradient_check(
    model: MlpModel,
    batch: ArrayLike,
    loss_fn: LossFn,
    tolerance: float = 1e-5,
    step: float = 1e-5,
) -> GradientCheckReport:
    """Compare :func:`backward` against central finite differences.

    Relative error is ``|a - n| / max(|a|, |n|, 0.01)``; a layer passes when its
    worst entry is strictly below ``tolerance``, so a zero tolerance never
    passes.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("gradient_check needs a non-empty 2-D batch")

    logits, cache = forward(model, x)
    analytic = backward(model, cache, loss_fn(logits).dloss_dlogits).parameters()
    params = model.parameters()

    def objective(candidate: list[NDArray[np.float64]]) -> float:
        perturbed = model.with_parameters(candidate)
        return float(loss_fn(forward(perturbed, x)[0]).value)

    worst = [0.0] * model.config.num_layers
    for index, base in enumerate(params):
        for position in np.ndindex(base.shape):
            candidate = [p.copy() for p in params]
            candidate[index][position] = base[position] + step
            plus = objective(candidate)
            candidate[index][position] = base[position] - step
            minus = objective(candidate)
            numeric = (plus - minus) / (2.0 * step)
            exact = float(analytic[index][position])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), _ERROR_FLOOR)
            worst[index // 2] = max(worst[index // 2], error)

    margins = [float(np.min(np.abs(z))) for z in cache.pre_activations if z.size]
    checks = tuple(
        LayerCheck(layer=layer, max_relative_error=error, passed=error < tolerance)
        for layer, error in enumerate(worst)
    )
    return GradientCheckReport(
        layers=checks,
        tolerance=tolerance,
        step=step,
        min_preactivation_margin=min(margins) if margins else math.inf,
    )
