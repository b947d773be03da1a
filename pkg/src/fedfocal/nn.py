"""Minimal deterministic MLP: dense layers, ReLU, softmax/sigmoid heads.

Parameters live in one flat float64 vector so that federated averaging,
serialization and gradient checking all operate on plain arrays. The
layout is fixed per config: for each layer, the row-major weight block
(fan_in x fan_out) followed by the bias block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DimensionError, DomainError, NumericError

HIDDEN_ACTIVATIONS = ("relu",)
HEADS = ("softmax", "sigmoid")


@dataclass(frozen=True)
class MlpConfig:
    """Layer sizes (input, hidden..., output) plus activation choices."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    head: str = "softmax"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigurationError("layer_sizes needs at least input and output entries")
        if any(s <= 0 for s in sizes):
            raise ConfigurationError(f"layer_sizes must be positive, got {sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.head not in HEADS:
            raise ConfigurationError(f"unknown head {self.head!r}")
        if self.head == "sigmoid" and sizes[-1] != 1:
            raise ConfigurationError("sigmoid head requires a single output unit")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def layer_pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


def param_count(config: MlpConfig) -> int:
    """Total flat-vector length: sum of n_in*n_out + n_out across layers."""
    return sum(n_in * n_out + n_out for n_in, n_out in config.layer_pairs)


def unpack_params(params: np.ndarray, config: MlpConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (no copies) of the per-layer weight matrices and bias vectors."""
    expected = param_count(config)
    if params.ndim != 1 or params.shape[0] != expected:
        raise DimensionError(f"parameter vector length {params.shape} != expected ({expected},)")
    layers = []
    offset = 0
    for n_in, n_out in config.layer_pairs:
        w = params[offset : offset + n_in * n_out].reshape(n_in, n_out)
        offset += n_in * n_out
        b = params[offset : offset + n_out]
        offset += n_out
        layers.append((w, b))
    return layers


def init_params(config: MlpConfig, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic per (config, seed)."""
    rng = np.random.default_rng(seed)
    params = np.zeros(param_count(config), dtype=np.float64)
    layers = unpack_params(params, config)
    for (n_in, n_out), (w, b) in zip(config.layer_pairs, layers):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w[...] = rng.uniform(-limit, limit, size=(n_in, n_out))
        b[...] = 0.0
    return params


def _check_batch(config: MlpConfig, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != config.input_size:
        raise DimensionError(
            f"features shape {features.shape} incompatible with input size {config.input_size}"
        )
    if not np.all(np.isfinite(features)):
        raise NumericError("non-finite values in input features")
    return features


def _forward_cached(
    params: np.ndarray, config: MlpConfig, features: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Probabilities plus post-activation values of every layer input."""
    layers = unpack_params(np.asarray(params, dtype=np.float64), config)
    activations = [features]
    h = features
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    w, b = layers[-1]
    logits = h @ w + b
    if config.head == "softmax":
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
    else:
        probs = 1.0 / (1.0 + np.exp(-logits))
    return probs, activations


def forward(params: np.ndarray, config: MlpConfig, features: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample.

    Softmax rows sum to 1 (computed with max subtraction); the sigmoid
    head returns a single column with the positive-class probability.
    """
    features = _check_batch(config, features)
    probs, _ = _forward_cached(params, config, features)
    return probs


def backward(
    params: np.ndarray,
    config: MlpConfig,
    features: np.ndarray,
    dloss_dlogits: np.ndarray,
) -> np.ndarray:
    """Gradient of the mean batch loss in the flat parameter layout.

    ``dloss_dlogits`` holds the per-sample loss gradient with respect to
    the final-layer logits (batch x output); the 1/batch factor of the
    mean reduction is applied here.
    """
    features = _check_batch(config, features)
    upstream = np.asarray(dloss_dlogits, dtype=np.float64)
    if upstream.shape != (features.shape[0], config.output_size):
        raise DimensionError(
            f"dloss_dlogits shape {upstream.shape} != "
            f"{(features.shape[0], config.output_size)}"
        )
    _, activations = _forward_cached(params, config, features)
    layers = unpack_params(np.asarray(params, dtype=np.float64), config)

    grads = np.zeros_like(np.asarray(params, dtype=np.float64))
    grad_layers = unpack_params(grads, config)
    batch = features.shape[0]

    delta = upstream / batch
    for idx in range(len(layers) - 1, -1, -1):
        w, _ = layers[idx]
        gw, gb = grad_layers[idx]
        acts = activations[idx]
        gw[...] = acts.T @ delta
        gb[...] = delta.sum(axis=0)
        if idx > 0:
            delta = (delta @ w.T) * (activations[idx] > 0.0)
    return grads


def sgd_step(params: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
    """One vanilla SGD update: params - lr * grads."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise DimensionError(f"params shape {params.shape} != grads shape {grads.shape}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient")
    if lr < 0.0:
        raise DomainError(f"learning rate must be >= 0, got {lr}")
    return params - lr * grads
