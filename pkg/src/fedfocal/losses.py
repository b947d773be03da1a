"""Focal loss family: true-class probability, cross-entropy, focal scaling.

The focusing exponent ``gamma`` down-weights samples the model already
classifies well: the loss is ``-alpha * (1 - p_t)**gamma * log(p_t)``
where ``p_t`` is the probability assigned to the true class. ``gamma=0``
recovers plain cross-entropy through the identical code path, so the two
families agree bit for bit.

Probabilities are clamped to ``[EPS, 1-EPS]`` before any logarithm, which
keeps both the loss and its gradient finite on saturated predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DimensionError, DomainError

EPS = 1e-12

LOSS_FAMILIES = ("cross_entropy", "focal")


@dataclass(frozen=True)
class LossSpec:
    """Loss family selector with focusing exponent and per-class weights.

    ``alpha`` is one positive weight per class (``None`` means all 1.0).
    ``family="cross_entropy"`` forces an effective gamma of 0.
    """

    family: str = "cross_entropy"
    gamma: float = 0.0
    alpha: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.family not in LOSS_FAMILIES:
            raise ConfigurationError(f"unknown loss family {self.family!r}")
        if self.gamma < 0.0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if self.alpha is not None:
            alpha = tuple(float(a) for a in self.alpha)
            if any(a <= 0.0 for a in alpha):
                raise DomainError("alpha weights must be positive")
            object.__setattr__(self, "alpha", alpha)

    @property
    def effective_gamma(self) -> float:
        return self.gamma if self.family == "focal" else 0.0

    def alpha_for(self, n_classes: int) -> np.ndarray:
        """Per-class weight vector, validated against the class count."""
        if self.alpha is None:
            return np.ones(n_classes, dtype=np.float64)
        if len(self.alpha) != n_classes:
            raise DimensionError(
                f"alpha has {len(self.alpha)} entries for {n_classes} classes"
            )
        return np.asarray(self.alpha, dtype=np.float64)


def clamp_probability(p: np.ndarray | float) -> np.ndarray | float:
    """Clip into [EPS, 1-EPS] so logarithms stay finite."""
    return np.clip(p, EPS, 1.0 - EPS)


def posterior(p: float, y: int) -> float:
    """Probability of the true class: p when y=+1, 1-p when y=-1."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if y not in (1, -1):
        raise DomainError(f"ground-truth sign must be +1 or -1, got {y}")
    return p if y == 1 else 1.0 - p


def bce(p_t: float) -> float:
    """Binary cross-entropy of the true-class probability: -log(p_t)."""
    return -math.log(clamp_probability(p_t))


def focal(p_t: float, gamma: float) -> float:
    """Cross-entropy scaled by (1 - p_t)**gamma."""
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    p_t = clamp_probability(p_t)
    return -((1.0 - p_t) ** gamma) * math.log(p_t)


def weighted_focal(p_t: float, gamma: float, alpha_c: float) -> float:
    """Focal term scaled by a positive class weight."""
    if alpha_c <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha_c}")
    return alpha_c * focal(p_t, gamma)


def _check_prob_row(probs: np.ndarray, label: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise DimensionError(f"expected a probability row, got shape {probs.shape}")
    if not 0 <= label < probs.shape[0]:
        raise DomainError(f"label {label} out of range for {probs.shape[0]} classes")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise DomainError(f"probability row sums to {probs.sum()}, not 1")
    return probs


def multiclass_focal(probs: np.ndarray, label: int, spec: LossSpec) -> float:
    """Focal loss of one softmax row against its integer label."""
    probs = _check_prob_row(probs, label)
    alpha = spec.alpha_for(probs.shape[0])
    return weighted_focal(float(probs[label]), spec.effective_gamma, float(alpha[label]))


def focal_grad_logits(probs: np.ndarray, label: int, spec: LossSpec) -> np.ndarray:
    """Exact gradient of ``multiclass_focal`` with respect to the logit row.

    With q the clamped true-class probability, the chain rule through the
    softmax gives grad_j = s * (p_j - [j == label]) where
    s = alpha * ((1-q)**g - g * (1-q)**(g-1) * q * log(q)). At gamma=0 the
    scale s reduces to alpha, the familiar cross-entropy gradient.
    """
    probs = _check_prob_row(probs, label)
    alpha = spec.alpha_for(probs.shape[0])
    g = spec.effective_gamma
    q = float(clamp_probability(probs[label]))
    one_m_q = 1.0 - q
    scale = float(alpha[label]) * (one_m_q**g - g * one_m_q ** (g - 1.0) * q * math.log(q))
    grad = scale * probs
    grad[label] -= scale
    return grad


def binary_focal_grad_logit(p: float, y: int, gamma: float, alpha_c: float = 1.0) -> float:
    """Gradient of the weighted focal loss w.r.t. the sigmoid logit.

    Evaluates alpha * y * (1-p_t)**gamma * (gamma * p_t * log(p_t) + p_t - 1)
    with p_t the true-class probability of (p, y).
    """
    if alpha_c <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha_c}")
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    p_t = clamp_probability(posterior(p, y))
    bracket = gamma * p_t * math.log(p_t) + p_t - 1.0
    return alpha_c * y * (1.0 - p_t) ** gamma * bracket


def batch_loss(probs: np.ndarray, labels: np.ndarray, spec: LossSpec, head: str) -> np.ndarray:
    """Per-sample losses for a whole batch (training fast path).

    ``head="softmax"`` expects one probability row per sample and integer
    labels; ``head="sigmoid"`` expects a single-column positive-class
    probability and labels in {0, 1}.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if head == "softmax":
        alpha = spec.alpha_for(probs.shape[1])
        q = clamp_probability(probs[np.arange(probs.shape[0]), labels])
        return -alpha[labels] * (1.0 - q) ** spec.effective_gamma * np.log(q)
    if head == "sigmoid":
        alpha = spec.alpha_for(2)
        p = probs[:, 0]
        p_t = clamp_probability(np.where(labels == 1, p, 1.0 - p))
        return -alpha[labels] * (1.0 - p_t) ** spec.effective_gamma * np.log(p_t)
    raise ConfigurationError(f"unknown head {head!r}")


def batch_grad_logits(
    probs: np.ndarray, labels: np.ndarray, spec: LossSpec, head: str
) -> np.ndarray:
    """Per-sample loss gradients w.r.t. logits, one row per sample."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    g = spec.effective_gamma
    if head == "softmax":
        alpha = spec.alpha_for(probs.shape[1])
        q = clamp_probability(probs[np.arange(probs.shape[0]), labels])
        one_m_q = 1.0 - q
        scale = alpha[labels] * (one_m_q**g - g * one_m_q ** (g - 1.0) * q * np.log(q))
        grad = scale[:, None] * probs
        grad[np.arange(probs.shape[0]), labels] -= scale
        return grad
    if head == "sigmoid":
        alpha = spec.alpha_for(2)
        y = np.where(labels == 1, 1.0, -1.0)
        p = probs[:, 0]
        p_t = clamp_probability(np.where(labels == 1, p, 1.0 - p))
        bracket = g * p_t * np.log(p_t) + p_t - 1.0
        grad = alpha[labels] * y * (1.0 - p_t) ** g * bracket
        return grad[:, None]
    raise ConfigurationError(f"unknown head {head!r}")
