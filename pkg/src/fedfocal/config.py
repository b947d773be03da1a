"""Experiment configuration: pydantic models mirrored by the JSON files.

Unknown keys are rejected everywhere so a typo cannot silently change an
experiment. Dataset paths may be relative; they resolve against the
FEDFOCAL_DATA_DIR environment variable (or the current directory) and
must exist at load time. The config hash covers everything except the
output directory, giving outputs a location-independent provenance id.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .exceptions import ConfigurationError

DATA_DIR_ENV = "FEDFOCAL_DATA_DIR"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BlobsSource(StrictModel):
    kind: Literal["blobs"] = "blobs"
    classes: int = 2
    per_class: int = 100
    test_per_class: int = 40
    dim: int = 2
    separation: float = 4.0
    seed: int | None = None


class DigitsSource(StrictModel):
    kind: Literal["digits"] = "digits"
    classes: int = 10
    per_class: int = 600
    test_per_class: int = 100
    side: int = 28
    shift: int = 3
    noise_std: float = 25.0
    overlap: float = 0.5
    seed: int | None = None


class MnistIdxSource(StrictModel):
    kind: Literal["mnist_idx"] = "mnist_idx"
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    classes: int = 10


class CsvSource(StrictModel):
    kind: Literal["csv"] = "csv"
    path: str
    label_column: str
    class_count: int | None = None
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    split_seed: int | None = None


class CacheSource(StrictModel):
    kind: Literal["cache"] = "cache"
    path: str


DatasetSource = Annotated[
    Union[BlobsSource, DigitsSource, MnistIdxSource, CsvSource, CacheSource],
    Field(discriminator="kind"),
]


class SubsampleSpec(StrictModel):
    train_count: int = Field(gt=0)
    test_count: int = Field(gt=0)
    seed: int | None = None


class UnbalanceSpec(StrictModel):
    classes: list[int]
    ratio: int = Field(ge=1)
    seed: int | None = None


class NoiseSpec(StrictModel):
    mu: float = 10.0
    sigma: float = Field(default=5.0, ge=0.0)
    seed: int | None = None


class TransformsSpec(StrictModel):
    subsample: SubsampleSpec | None = None
    unbalance: UnbalanceSpec | None = None
    noise: NoiseSpec | None = None
    normalize: bool = True


class PartitionSpec(StrictModel):
    n_clients: int = Field(ge=1)
    scheme: Literal["iid_shards", "label_shards"] = "iid_shards"
    val_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    seed: int | None = None


class ModelSpec(StrictModel):
    hidden_sizes: list[int] = Field(default_factory=lambda: [100, 100])
    head: Literal["softmax", "sigmoid"] = "softmax"


class LossSpecConfig(StrictModel):
    family: Literal["cross_entropy", "focal"] = "cross_entropy"
    gamma: float = Field(default=0.0, ge=0.0)
    alpha: float | list[float] = 1.0


class FederationSpec(StrictModel):
    algorithm: Literal["fedavg", "local_only", "global_only"] = "fedavg"
    client_ratio: float = Field(default=0.1, gt=0.0, le=1.0)
    psi: float = Field(default=0.0, ge=0.0, le=1.0)
    rounds: int = Field(ge=1)
    local_epochs: int = Field(default=1, ge=0)
    lr: float = Field(default=0.05, gt=0.0)
    batch_size: int = Field(default=32, ge=1)


class ExperimentConfig(StrictModel):
    """The on-disk config file: dataset, wiring, hyperparameters, outputs."""

    name: str
    dataset: DatasetSource
    transforms: TransformsSpec = Field(default_factory=TransformsSpec)
    partition: PartitionSpec
    model: ModelSpec = Field(default_factory=ModelSpec)
    loss: LossSpecConfig = Field(default_factory=LossSpecConfig)
    federation: FederationSpec
    seeds: list[int] = Field(min_length=1)
    minority_classes: list[int] = Field(default_factory=list)
    output_dir: str = "out"


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "."))


def resolve_path(value: str, base: Path | None = None) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = (base or data_dir()) / path
    return path


def dataset_paths(source) -> list[Path]:
    """Filesystem paths a dataset source reads from."""
    if isinstance(source, MnistIdxSource):
        return [
            resolve_path(p)
            for p in (source.train_images, source.train_labels, source.test_images, source.test_labels)
        ]
    if isinstance(source, CsvSource):
        return [resolve_path(source.path)]
    if isinstance(source, CacheSource):
        return [resolve_path(source.path) / "manifest.json"]
    return []


def validate_paths(config: ExperimentConfig) -> None:
    for path in dataset_paths(config.dataset):
        if not path.exists():
            raise ConfigurationError(f"referenced path does not exist: {path}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file, including referenced-path checks."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    validate_paths(config)
    return config


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical config JSON, output location excluded."""
    payload = config.model_dump(mode="json")
    payload.pop("output_dir", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
