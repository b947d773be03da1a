"""Evaluation counts, seed summaries, trace round-trips, smoothness."""

import math

import numpy as np
import pytest

from fedfocal import metrics, nn
from fedfocal.data import Dataset
from fedfocal.exceptions import ConfigurationError, DimensionError, DomainError
from fedfocal.federation import RoundReport


def perfect_dataset_and_params(classes=3):
    """A one-layer net whose weights copy the (one-hot) input features."""
    cfg = nn.MlpConfig((classes, classes))
    params = np.zeros(nn.param_count(cfg))
    weights = nn.unpack_params(params, cfg)[0][0]
    weights[...] = 10.0 * np.eye(classes)
    labels = np.repeat(np.arange(classes), 4)
    features = np.eye(classes)[labels]
    return params, cfg, Dataset(features, labels, class_count=classes)


class TestEvaluate:
    def test_perfect_predictor(self):
        params, cfg, test = perfect_dataset_and_params()
        result = metrics.evaluate(params, cfg, test)
        assert result.overall_accuracy == 1.0
        assert np.all(np.diag(result.confusion) == 4)
        assert result.confusion.sum() == test.n_samples

    def test_constant_predictor_on_balanced_classes(self):
        cfg = nn.MlpConfig((4, 10))
        params = np.zeros(nn.param_count(cfg))  # uniform probs, argmax -> class 0
        labels = np.repeat(np.arange(10), 5)
        test = Dataset(np.ones((50, 4)), labels, class_count=10)
        result = metrics.evaluate(params, cfg, test)
        assert result.overall_accuracy == pytest.approx(0.1)

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(0)
        cfg = nn.MlpConfig((6, 8, 4))
        params = nn.init_params(cfg, 3)
        test = Dataset(rng.normal(size=(40, 6)), rng.integers(0, 4, 40), class_count=4)
        result = metrics.evaluate(params, cfg, test, minority_classes=(1, 2))
        pred = metrics.predictions(params, cfg, test.features)
        # brute-force recount
        hits = sum(1 for t, p in zip(test.labels, pred) if t == p)
        assert result.overall_accuracy == hits / 40
        for true_class in range(4):
            for predicted in range(4):
                count = sum(
                    1
                    for t, p in zip(test.labels, pred)
                    if t == true_class and p == predicted
                )
                assert result.confusion[true_class, predicted] == count
        recalls = [
            result.confusion[c, c] / result.confusion[c].sum() for c in (1, 2)
        ]
        assert result.minority_recall == pytest.approx(np.mean(recalls))

    def test_class_mismatch_rejected(self):
        params, cfg, _ = perfect_dataset_and_params(3)
        bad = Dataset(np.ones((2, 3)), np.array([0, 1]), class_count=2)
        with pytest.raises(DimensionError):
            metrics.evaluate(params, cfg, bad)


class TestSummarize:
    def test_single_value(self):
        row = metrics.summarize([0.5], "m", "d")
        assert row.mean == 0.5 and row.std == 0.0 and row.n_seeds == 1

    def test_two_values_sample_std(self):
        row = metrics.summarize([0.4, 0.6], "m", "d")
        assert row.mean == pytest.approx(0.5)
        assert row.std == pytest.approx(math.sqrt(2 * 0.01 / 1), rel=1e-12)

    def test_reorder_invariant(self):
        a = metrics.summarize([0.1, 0.5, 0.3], "m", "d")
        b = metrics.summarize([0.5, 0.3, 0.1], "m", "d")
        assert a == b

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(9)
        values = rng.uniform(0, 1, size=11).tolist()
        row = metrics.summarize(values, "m", "d")
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
        assert abs(row.mean - mean) < 1e-12
        assert abs(row.std - math.sqrt(var)) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            metrics.summarize([], "m", "d")

    def test_formatting(self):
        row = metrics.summarize([0.969, 0.969], "m", "d")
        assert row.formatted() == "0.9690±0.0000"


class TestSmoothness:
    def test_constant_trace_is_zero(self):
        assert metrics.smoothness_score([0.5, 0.5, 0.5]) == 0.0

    def test_zigzag(self):
        assert metrics.smoothness_score([0.0, 1.0, 0.0]) == 1.0

    def test_translation_invariant(self):
        base = [0.1, 0.4, 0.2, 0.6]
        shifted = [v + 0.3 for v in base]
        assert metrics.smoothness_score(base) == pytest.approx(
            metrics.smoothness_score(shifted)
        )

    def test_needs_two_rounds(self):
        with pytest.raises(DomainError):
            metrics.smoothness_score([0.5])


def make_report(i, accuracy=0.5):
    return RoundReport(
        round_index=i,
        selected=(0, 2),
        improved=(2,),
        carried=(2,),
        filler=(0,),
        per_client_val_loss={0: 0.81234567890123, 2: 0.4},
        mean_train_loss=1.0 / 3.0,
        global_test_accuracy=accuracy,
        per_class_accuracy=(0.25, 0.75),
        minority_recall=0.25,
    )


class TestTrace:
    def test_empty_trace_is_header_only(self):
        text = metrics.emit_trace([])
        assert text == ",".join(metrics.TRACE_COLUMNS) + "\n"

    def test_three_reports_make_four_lines(self):
        text = metrics.emit_trace([make_report(i) for i in range(3)])
        assert len(text.splitlines()) == 4

    def test_round_trip_is_exact(self):
        reports = [make_report(i, accuracy=1.0 / (i + 3)) for i in range(5)]
        rows = metrics.parse_trace(metrics.emit_trace(reports))
        for report, row in zip(reports, rows):
            assert row["round"] == report.round_index
            assert row["accuracy"] == report.global_test_accuracy  # exact, via repr
            assert row["mean_train_loss"] == report.mean_train_loss
            assert row["selected_ids"] == list(report.selected)
            assert row["per_class_accuracy"] == list(report.per_class_accuracy)

    def test_emission_is_deterministic(self):
        reports = [make_report(i) for i in range(3)]
        assert metrics.emit_trace(reports) == metrics.emit_trace(reports)
