"""Config-driven experiment execution and artifact emission.

Seed policy: every stage that randomizes (dataset synthesis, transforms,
partitioning) takes an explicit seed from the config when given, else a
seed derived from the per-run seed. With explicit seeds the data is
frozen across seeds and only initialisation, sampling and shuffling vary;
with derived seeds each run re-randomizes the whole pipeline.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import data, dataio, federation, losses, metrics, nn
from .config import (
    BlobsSource,
    CacheSource,
    CsvSource,
    DigitsSource,
    ExperimentConfig,
    MnistIdxSource,
    NoiseSpec,
    SubsampleSpec,
    TransformsSpec,
    UnbalanceSpec,
    config_hash,
    resolve_path,
)
from .exceptions import ConfigurationError
from .partition import FederatedPartition, federate
from .rng import TAG_DATA, TAG_PARTITION, derive_seed

import numpy as np

# Stage tags for derived data seeds.
_STAGE_SOURCE = 0
_STAGE_SUBSAMPLE_TRAIN = 1
_STAGE_UNBALANCE = 3
_STAGE_NOISE_TRAIN = 4
_STAGE_NOISE_TEST = 5
_STAGE_CSV_SPLIT = 6


def _stage_seed(explicit: int | None, base_seed: int, stage: int) -> int:
    return explicit if explicit is not None else derive_seed(base_seed, TAG_DATA, stage)


def _load_source(source, base_seed: int) -> tuple[data.Dataset, data.Dataset, list[dict]]:
    if isinstance(source, BlobsSource):
        seed = _stage_seed(source.seed, base_seed, _STAGE_SOURCE)
        train = data.synth_blobs(
            source.classes, source.per_class, source.dim, source.separation, seed
        )
        test = data.synth_blobs(
            source.classes,
            source.test_per_class,
            source.dim,
            source.separation,
            derive_seed(seed, 1),
        )
        return train, test, [{"op": "blobs", "seed": seed}]
    if isinstance(source, DigitsSource):
        seed = _stage_seed(source.seed, base_seed, _STAGE_SOURCE)
        common = dict(
            classes=source.classes,
            seed=seed,
            side=source.side,
            shift=source.shift,
            noise_std=source.noise_std,
            overlap=source.overlap,
        )
        train = data.synth_digits(per_class=source.per_class, sample_key=0, **common)
        test = data.synth_digits(per_class=source.test_per_class, sample_key=1, **common)
        return train, test, [{"op": "digits", "seed": seed}]
    if isinstance(source, MnistIdxSource):
        train = dataio.load_idx_dataset(
            resolve_path(source.train_images),
            resolve_path(source.train_labels),
            n_classes=source.classes,
            name="mnist-train",
        )
        test = dataio.load_idx_dataset(
            resolve_path(source.test_images),
            resolve_path(source.test_labels),
            n_classes=source.classes,
            name="mnist-test",
        )
        return train, test, [{"op": "mnist_idx"}]
    if isinstance(source, CsvSource):
        table = dataio.load_csv(
            resolve_path(source.path), source.label_column, source.class_count
        )
        seed = _stage_seed(source.split_seed, base_seed, _STAGE_CSV_SPLIT)
        rng = np.random.default_rng([seed])
        order = rng.permutation(table.n_samples)
        n_test = max(1, int(source.test_fraction * table.n_samples))
        test = table.take(order[:n_test], name=f"{table.name}-test")
        train = table.take(order[n_test:], name=f"{table.name}-train")
        return train, test, [{"op": "csv_split", "seed": seed}]
    if isinstance(source, CacheSource):
        train, test, manifest = dataio.load_cache(resolve_path(source.path))
        return train, test, [{"op": "cache", "manifest": manifest.get("name")}]
    raise ConfigurationError(f"unhandled dataset source {source!r}")


def build_pools(
    source,
    transforms: TransformsSpec,
    base_seed: int,
) -> tuple[data.Dataset, data.Dataset, list[dict]]:
    """Source datasets plus transform provenance, in application order.

    Unbalancing touches the training pool only (the held-out test pool
    keeps its class balance); noise and normalization apply to both.
    """
    train, test, provenance = _load_source(source, base_seed)
    if transforms.subsample is not None:
        sub = transforms.subsample
        seed = _stage_seed(sub.seed, base_seed, _STAGE_SUBSAMPLE_TRAIN)
        train = data.subsample(train, sub.train_count, seed)
        test = data.subsample(test, sub.test_count, derive_seed(seed, 1))
        provenance.append(
            {"op": "subsample", "train_count": sub.train_count, "test_count": sub.test_count, "seed": seed}
        )
    if transforms.unbalance is not None:
        unb = transforms.unbalance
        seed = _stage_seed(unb.seed, base_seed, _STAGE_UNBALANCE)
        train = data.unbalance(
            train,
            data.ImbalanceSpec(target_classes=tuple(unb.classes), ratio=unb.ratio, seed=seed),
        )
        provenance.append(
            {"op": "unbalance", "classes": list(unb.classes), "ratio": unb.ratio, "seed": seed}
        )
    if transforms.noise is not None:
        noise = transforms.noise
        seed = _stage_seed(noise.seed, base_seed, _STAGE_NOISE_TRAIN)
        train = data.add_gaussian_noise(train, noise.mu, noise.sigma, seed)
        test = data.add_gaussian_noise(test, noise.mu, noise.sigma, derive_seed(seed, 1))
        provenance.append({"op": "noise", "mu": noise.mu, "sigma": noise.sigma, "seed": seed})
    if transforms.normalize:
        train = data.normalize(train)
        test = data.normalize(test)
        provenance.append({"op": "normalize"})
    return train, test, provenance


def build_partition(config: ExperimentConfig, run_seed: int) -> FederatedPartition:
    train, test, _ = build_pools(config.dataset, config.transforms, run_seed)
    seed = (
        config.partition.seed
        if config.partition.seed is not None
        else derive_seed(run_seed, TAG_PARTITION)
    )
    return federate(
        train,
        test,
        n_clients=config.partition.n_clients,
        scheme=config.partition.scheme,
        val_fraction=config.partition.val_fraction,
        seed=seed,
    )


def mlp_config(config: ExperimentConfig, input_size: int, class_count: int) -> nn.MlpConfig:
    output = 1 if config.model.head == "sigmoid" else class_count
    sizes = (input_size, *config.model.hidden_sizes, output)
    return nn.MlpConfig(layer_sizes=sizes, head=config.model.head)


def loss_spec(config: ExperimentConfig, class_count: int) -> losses.LossSpec:
    alpha = config.loss.alpha
    if isinstance(alpha, (int, float)):
        alpha_tuple = tuple([float(alpha)] * class_count)
    else:
        alpha_tuple = tuple(float(a) for a in alpha)
    return losses.LossSpec(
        family=config.loss.family, gamma=config.loss.gamma, alpha=alpha_tuple
    )


def method_label(config: ExperimentConfig) -> str:
    base = config.federation.algorithm
    if config.loss.family == "focal":
        return f"{base}/focal(gamma={config.loss.gamma:g},psi={config.federation.psi:g})"
    return f"{base}/cross_entropy(psi={config.federation.psi:g})"


@dataclass(frozen=True)
class ExperimentResult:
    """All seeds of one config: runs, rendered traces, summary document."""

    config: ExperimentConfig
    runs: tuple[federation.SeedRun, ...]
    traces: dict[int, str]
    summary: dict

    @property
    def final_accuracies(self) -> list[float]:
        return [run.final.overall_accuracy for run in self.runs]


def run_seed(config: ExperimentConfig, seed: int, workers: int = 1) -> federation.SeedRun:
    """Execute one seeded run of the configured algorithm."""
    part = build_partition(config, seed)
    sample = part.clients[0].train
    net = mlp_config(config, sample.n_features, sample.class_count)
    settings = federation.TrainSettings(
        loss=loss_spec(config, sample.class_count),
        lr=config.federation.lr,
        batch_size=config.federation.batch_size,
        local_epochs=config.federation.local_epochs,
    )
    minority = tuple(config.minority_classes)
    algorithm = config.federation.algorithm
    if algorithm == "fedavg":
        return federation.run_federated(
            part,
            net,
            settings,
            psi=config.federation.psi,
            client_ratio=config.federation.client_ratio,
            rounds=config.federation.rounds,
            seed=seed,
            minority_classes=minority,
            workers=workers,
        )
    if algorithm == "local_only":
        return federation.run_local_baseline(
            part, net, settings, config.federation.rounds, seed, minority, workers
        )
    if algorithm == "global_only":
        return federation.run_global_baseline(
            part, net, settings, config.federation.rounds, seed, minority
        )
    raise ConfigurationError(f"unknown algorithm {algorithm!r}")


def run_config(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Execute every seed and assemble the summary document."""
    runs = tuple(run_seed(config, seed, workers) for seed in config.seeds)
    traces = {run.seed: metrics.emit_trace(run.reports) for run in runs}
    finals = [run.final.overall_accuracy for run in runs]
    row = metrics.summarize(finals, method_label(config), config.name)
    smoothness = [
        metrics.smoothness_score(run.accuracies()) if len(run.reports) >= 2 else float("nan")
        for run in runs
    ]
    n_classes = len(runs[0].final.per_class_accuracy)
    per_class_mean = [
        float(np.nanmean([run.final.per_class_accuracy[c] for run in runs]))
        for c in range(n_classes)
    ]
    summary = {
        "name": config.name,
        "method": row.method,
        "dataset": row.dataset,
        "mean": row.mean,
        "std": row.std,
        "median": statistics.median(finals),
        "seeds": list(config.seeds),
        "config_hash": config_hash(config),
        "per_class_accuracy": per_class_mean,
        "minority_recall": float(np.nanmean([run.final.minority_recall for run in runs]))
        if config.minority_classes
        else None,
        "smoothness": float(np.nanmean(smoothness)) if smoothness else None,
        "per_seed": [
            {
                "seed": run.seed,
                "final_accuracy": run.final.overall_accuracy,
                "minority_recall": None
                if math.isnan(run.final.minority_recall)
                else run.final.minority_recall,
                "smoothness": None if math.isnan(s) else s,
                "per_class_accuracy": list(run.final.per_class_accuracy),
            }
            for run, s in zip(runs, smoothness)
        ],
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    return ExperimentResult(config=config, runs=runs, traces=traces, summary=summary)


@dataclass(frozen=True)
class ArtifactPaths:
    summary: Path
    traces: tuple[Path, ...]


def write_artifacts(result: ExperimentResult, out_dir: str | Path) -> ArtifactPaths:
    """Persist summary JSON plus one trace CSV per seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    trace_paths = []
    for seed, text in result.traces.items():
        path = out / f"trace_seed{seed}.csv"
        path.write_text(text)
        trace_paths.append(path)
    return ArtifactPaths(summary=summary_path, traces=tuple(trace_paths))


ABLATION_AXES = ("gamma", "psi", "client_ratio")


def apply_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "gamma":
        loss = config.loss.model_copy(update={"gamma": value, "family": "focal"})
        return config.model_copy(update={"loss": loss})
    if axis == "psi":
        fed = config.federation.model_copy(update={"psi": value})
        return config.model_copy(update={"federation": fed})
    if axis == "client_ratio":
        fed = config.federation.model_copy(update={"client_ratio": value})
        return config.model_copy(update={"federation": fed})
    raise ConfigurationError(f"unknown ablation axis {axis!r}")


def run_ablation(
    config: ExperimentConfig, axis: str, values: list[float], workers: int = 1
) -> tuple[list[dict], dict[float, ExperimentResult]]:
    """One run per axis value with shared seeds; rows sorted by input order."""
    if axis not in ABLATION_AXES:
        raise ConfigurationError(f"ablation axis must be one of {ABLATION_AXES}")
    if not values:
        raise ConfigurationError("ablation needs at least one value")
    rows = []
    results = {}
    for value in values:
        variant = apply_axis(config, axis, value)
        result = run_config(variant, workers=workers)
        results[value] = result
        rows.append(
            {
                "axis": axis,
                "value": value,
                "mean": result.summary["mean"],
                "std": result.summary["std"],
                "median": result.summary["median"],
                "n_seeds": len(variant.seeds),
            }
        )
    return rows, results


def ablation_csv(rows: list[dict]) -> str:
    header = "axis,value,mean,std,median,n_seeds"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['axis']},{row['value']!r},{row['mean']!r},{row['std']!r},"
            f"{row['median']!r},{row['n_seeds']}"
        )
    return "\n".join(lines) + "\n"


def prepare_cache(
    name: str,
    source,
    transforms: TransformsSpec,
    out_dir: str | Path,
    seed: int,
) -> tuple[Path, dict]:
    """Build pools with pinned seeds and persist them as a cache directory."""
    train, test, provenance = build_pools(source, transforms, seed)
    manifest = {
        "name": name,
        "seed": seed,
        "transforms": provenance,
        "train_samples": train.n_samples,
        "test_samples": test.n_samples,
        "features": train.n_features,
        "class_count": train.class_count,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    directory = dataio.save_cache(Path(out_dir) / name, train, test, manifest)
    return directory, manifest


def render_report(summaries: list[dict]) -> str:
    """Human-readable table over summary documents."""
    lines = [f"{'method':<42} {'dataset':<24} {'accuracy':<16} seeds"]
    for doc in summaries:
        row = metrics.SummaryRow(
            method=doc["method"],
            dataset=doc["dataset"],
            mean=doc["mean"],
            std=doc["std"],
            n_seeds=len(doc["seeds"]),
        )
        lines.append(f"{row.method:<42} {row.dataset:<24} {row.formatted():<16} {row.n_seeds}")
    return "\n".join(lines) + "\n"
