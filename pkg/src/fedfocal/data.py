"""Dataset container, synthetic generators, and corpus-level transforms.

Transforms (class unbalancing, additive pixel noise, normalization,
subsampling) are pure: each returns a new Dataset and is deterministic
for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigurationError,
    DimensionError,
    DomainError,
    ImbalanceError,
    NumericError,
)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d) with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DimensionError(
                f"{labels.shape[0]} labels for {features.shape[0]} samples"
            )
        if self.class_count <= 0:
            raise ConfigurationError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DomainError(
                f"labels outside [0, {self.class_count}): "
                f"range [{labels.min()}, {labels.max()}]"
            )
        if not np.all(np.isfinite(features)):
            raise NumericError("non-finite feature values")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            class_count=self.class_count,
            name=name or self.name,
        )


@dataclass(frozen=True)
class ImbalanceSpec:
    """Retain 1 of every ``ratio`` samples of each target class."""

    target_classes: tuple[int, ...]
    ratio: int
    seed: int

    def __post_init__(self) -> None:
        targets = tuple(int(c) for c in self.target_classes)
        object.__setattr__(self, "target_classes", targets)
        if not targets or any(c < 0 for c in targets):
            raise ConfigurationError("target_classes must be a non-empty set of class ids")
        if self.ratio < 1:
            raise ConfigurationError(f"imbalance ratio must be >= 1, got {self.ratio}")


def synth_blobs(
    classes: int, per_class: int, dim: int, separation: float, seed: int
) -> Dataset:
    """Gaussian clusters with unit spread on deterministic axis centers.

    Class c sits at ``separation * (1 + c // dim)`` along axis ``c % dim``,
    so any two centers are at least ``separation`` apart and separation 0
    collapses everything onto the origin.
    """
    if classes <= 0 or per_class <= 0 or dim <= 0:
        raise ConfigurationError("classes, per_class and dim must be positive")
    rng = np.random.default_rng([seed])
    centers = np.zeros((classes, dim))
    for c in range(classes):
        centers[c, c % dim] = separation * (1 + c // dim)
    features = np.repeat(centers, per_class, axis=0) + rng.standard_normal(
        (classes * per_class, dim)
    )
    labels = np.repeat(np.arange(classes), per_class)
    order = rng.permutation(classes * per_class)
    return Dataset(features[order], labels[order], class_count=classes, name="blobs")


def _smooth_field(rng: np.random.Generator, side: int, passes: int = 3) -> np.ndarray:
    """Random field smoothed by repeated 3x3 box filtering (wrap-around)."""
    field = rng.standard_normal((side, side))
    for _ in range(passes):
        field = (field + np.roll(field, 1, axis=0) + np.roll(field, -1, axis=0)) / 3.0
        field = (field + np.roll(field, 1, axis=1) + np.roll(field, -1, axis=1)) / 3.0
    return field


def synth_digits(
    classes: int,
    per_class: int,
    seed: int,
    side: int = 28,
    shift: int = 3,
    noise_std: float = 25.0,
    overlap: float = 0.5,
    sample_key: int = 0,
) -> Dataset:
    """Synthetic grayscale glyphs on the 0-255 pixel scale.

    Each class renders a fixed template (a blend of a class-unique smooth
    field and a field shared with a sibling class, mixed by ``overlap``)
    under random wrap-around shifts, intensity scaling and pixel noise.
    Sibling pairs sit half the label range apart (c and c + classes//2),
    so thinning a low class id leaves it confusable with an untouched one.
    Templates depend only on (classes, side, overlap, seed); ``sample_key``
    selects an independent draw of sample jitter so train and test splits
    share the underlying glyphs.
    """
    if classes <= 0 or per_class <= 0 or side <= 0:
        raise ConfigurationError("classes, per_class and side must be positive")
    if not 0.0 <= overlap < 1.0:
        raise DomainError(f"overlap must lie in [0, 1), got {overlap}")
    template_rng = np.random.default_rng([seed, 0])
    templates = np.zeros((classes, side, side))
    shared = [_smooth_field(template_rng, side) for _ in range((classes + 1) // 2)]
    for c in range(classes):
        unique = _smooth_field(template_rng, side)
        blend = (1.0 - overlap) * unique + overlap * shared[c % len(shared)]
        lo, hi = blend.min(), blend.max()
        templates[c] = 220.0 * (blend - lo) / (hi - lo)

    rng = np.random.default_rng([seed, 1, sample_key])
    n = classes * per_class
    labels = np.repeat(np.arange(classes), per_class)
    features = np.zeros((n, side * side))
    shifts = rng.integers(-shift, shift + 1, size=(n, 2))
    scales = rng.uniform(0.7, 1.3, size=n)
    noise = rng.normal(0.0, noise_std, size=(n, side, side))
    for i in range(n):
        img = np.roll(templates[labels[i]], tuple(shifts[i]), axis=(0, 1))
        features[i] = np.clip(scales[i] * img + noise[i], 0.0, 255.0).ravel()
    order = rng.permutation(n)
    return Dataset(features[order], labels[order], class_count=classes, name="digits")


def unbalance(dataset: Dataset, spec: ImbalanceSpec) -> Dataset:
    """Thin the target classes to ceil(count / ratio) seeded survivors.

    Non-target classes are untouched; the surviving rows are re-shuffled
    deterministically so class runs do not leak into shard boundaries.
    """
    counts = dataset.class_counts()
    for c in spec.target_classes:
        if c >= dataset.class_count or counts[c] == 0:
            raise ImbalanceError(f"target class {c} has no samples to retain")
    rng = np.random.default_rng([spec.seed])
    keep: list[np.ndarray] = []
    for c in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == c)
        if c in spec.target_classes:
            retain = -(-members.size // spec.ratio)  # ceil division
            members = rng.choice(members, size=retain, replace=False)
        keep.append(members)
    kept = np.concatenate(keep)
    return dataset.take(rng.permutation(kept), name=f"{dataset.name}-unbalanced")


def add_gaussian_noise(dataset: Dataset, mu: float, sigma: float, seed: int) -> Dataset:
    """Add per-pixel N(mu, sigma^2) draws and clamp back into [0, 255]."""
    if sigma < 0.0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if dataset.features.size and (
        dataset.features.min() < 0.0 or dataset.features.max() > 255.0
    ):
        raise DomainError("noise injection expects pixel-valued features in [0, 255]")
    rng = np.random.default_rng([seed])
    noisy = dataset.features + rng.normal(mu, sigma, size=dataset.features.shape)
    return Dataset(
        features=np.clip(noisy, 0.0, 255.0),
        labels=dataset.labels,
        class_count=dataset.class_count,
        name=f"{dataset.name}-noisy",
    )


def normalize(dataset: Dataset) -> Dataset:
    """Divide pixel features by 255. Not idempotent: applying twice divides twice."""
    return Dataset(
        features=dataset.features / 255.0,
        labels=dataset.labels,
        class_count=dataset.class_count,
        name=dataset.name,
    )


def subsample(dataset: Dataset, count: int, seed: int) -> Dataset:
    """Uniform sample of ``count`` rows without replacement."""
    if not 0 < count <= dataset.n_samples:
        raise DomainError(
            f"subsample count {count} outside (0, {dataset.n_samples}]"
        )
    rng = np.random.default_rng([seed])
    picked = rng.choice(dataset.n_samples, size=count, replace=False)
    return dataset.take(np.sort(picked), name=f"{dataset.name}-sampled")
