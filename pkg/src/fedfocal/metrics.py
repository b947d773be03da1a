"""Evaluation, multi-seed summaries, and the per-round trace format.

The trace is a plain CSV with one row per round; floats are written with
``repr`` so a parse round-trip recovers them exactly. ``smoothness_score``
turns the qualitative "stability" of a convergence curve into a number:
the mean absolute round-to-round accuracy change (lower is smoother).
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset
from .exceptions import ConfigurationError, DimensionError, DomainError


@dataclass(frozen=True)
class EvalResult:
    """Accuracy breakdown of one model on one test set."""

    overall_accuracy: float
    per_class_accuracy: tuple[float, ...]
    minority_recall: float
    confusion: np.ndarray   # rows: true class, columns: prediction


@dataclass(frozen=True)
class SummaryRow:
    """Mean +/- sample std of a metric across seeds."""

    method: str
    dataset: str
    mean: float
    std: float
    n_seeds: int

    def formatted(self) -> str:
        return f"{self.mean:.4f}±{self.std:.4f}"


def predictions(params: np.ndarray, config: nn.MlpConfig, features: np.ndarray) -> np.ndarray:
    """Hard class predictions: softmax argmax, or sigmoid thresholded at 0.5."""
    probs = nn.forward(params, config, features)
    if config.head == "softmax":
        return probs.argmax(axis=1)
    return (probs[:, 0] >= 0.5).astype(np.int64)


def confusion_matrix(true: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(true * n_classes + pred, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


def evaluate(
    params: np.ndarray,
    config: nn.MlpConfig,
    test: Dataset,
    minority_classes: tuple[int, ...] = (),
) -> EvalResult:
    """Exact confusion counts plus per-class recall on a test set."""
    if test.n_samples == 0:
        raise DimensionError("cannot evaluate on an empty test set")
    model_classes = 2 if config.head == "sigmoid" else config.output_size
    if test.class_count != model_classes:
        raise DimensionError(
            f"test set has {test.class_count} classes, model emits {model_classes}"
        )
    if any(not 0 <= c < test.class_count for c in minority_classes):
        raise DomainError(f"minority classes {minority_classes} outside test range")
    pred = predictions(params, config, test.features)
    confusion = confusion_matrix(test.labels, pred, test.class_count)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / support, np.nan)
    if minority_classes:
        minority = float(np.nanmean([per_class[c] for c in minority_classes]))
    else:
        minority = float("nan")
    return EvalResult(
        overall_accuracy=float(np.trace(confusion) / confusion.sum()),
        per_class_accuracy=tuple(float(v) for v in per_class),
        minority_recall=minority,
        confusion=confusion,
    )


def summarize(values: list[float], method: str, dataset: str) -> SummaryRow:
    """Sample mean and (n-1)-denominator std; std is 0 for a single seed."""
    if not values:
        raise ConfigurationError("summarize needs at least one value")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return SummaryRow(method=method, dataset=dataset, mean=mean, std=std, n_seeds=len(values))


def smoothness_score(accuracies: list[float]) -> float:
    """Mean absolute per-round accuracy change; translation invariant."""
    if len(accuracies) < 2:
        raise DomainError("smoothness needs at least two rounds")
    arr = np.asarray(accuracies, dtype=np.float64)
    return float(np.mean(np.abs(np.diff(arr))))


TRACE_COLUMNS = (
    "round",
    "accuracy",
    "mean_train_loss",
    "selected_ids",
    "mean_val_loss",
    "minority_recall",
    "improved_ids",
    "carried_ids",
    "filler_ids",
    "per_class_accuracy",
)


def _ids_cell(ids) -> str:
    return ";".join(str(int(i)) for i in ids)


def _floats_cell(values) -> str:
    return ";".join(repr(float(v)) for v in values)


def emit_trace(reports) -> str:
    """Round reports to CSV text with a pinned column order."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for report in reports:
        val_losses = list(report.per_client_val_loss.values())
        writer.writerow(
            [
                report.round_index,
                repr(float(report.global_test_accuracy)),
                repr(float(report.mean_train_loss)),
                _ids_cell(report.selected),
                repr(float(np.mean(val_losses))) if val_losses else "",
                repr(float(report.minority_recall)),
                _ids_cell(report.improved),
                _ids_cell(report.carried),
                _ids_cell(report.filler),
                _floats_cell(report.per_class_accuracy),
            ]
        )
    return out.getvalue()


def parse_trace(text: str) -> list[dict]:
    """Inverse of :func:`emit_trace`; floats round-trip exactly."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    for record in reader:
        rows.append(
            {
                "round": int(record["round"]),
                "accuracy": float(record["accuracy"]),
                "mean_train_loss": float(record["mean_train_loss"]),
                "selected_ids": [int(v) for v in record["selected_ids"].split(";") if v],
                "mean_val_loss": float(record["mean_val_loss"]) if record["mean_val_loss"] else None,
                "minority_recall": float(record["minority_recall"]),
                "improved_ids": [int(v) for v in record["improved_ids"].split(";") if v],
                "carried_ids": [int(v) for v in record["carried_ids"].split(";") if v],
                "filler_ids": [int(v) for v in record["filler_ids"].split(";") if v],
                "per_class_accuracy": [
                    float(v) for v in record["per_class_accuracy"].split(";") if v
                ],
            }
        )
    return rows
