"""Config-to-artifact wiring: pools, transforms, summaries, ablations."""

import numpy as np
import pytest

from fedfocal import pipeline
from fedfocal.config import ExperimentConfig, TransformsSpec, config_hash
from fedfocal.exceptions import ConfigurationError


def blob_config(**overrides):
    raw = {
        "name": "pipe",
        "dataset": {
            "kind": "blobs",
            "classes": 3,
            "per_class": 60,
            "test_per_class": 20,
            "dim": 4,
            "separation": 4.0,
        },
        "transforms": {"normalize": False},
        "partition": {"n_clients": 3, "val_fraction": 0.2},
        "model": {"hidden_sizes": [8]},
        "loss": {"family": "focal", "gamma": 2.0},
        "federation": {"client_ratio": 0.67, "psi": 0.5, "rounds": 3, "lr": 0.1},
        "seeds": [1, 2],
        "minority_classes": [0],
        "output_dir": "unused",
    }
    raw.update(overrides)
    return ExperimentConfig.model_validate(raw)


class TestBuildPools:
    def test_unbalance_leaves_test_pool_alone(self):
        cfg = blob_config(
            dataset={
                "kind": "digits",
                "classes": 4,
                "per_class": 100,
                "test_per_class": 30,
                "side": 8,
            },
            transforms={"unbalance": {"classes": [0], "ratio": 50}, "normalize": True},
        )
        train, test, provenance = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=1)
        assert train.class_counts()[0] == 2  # ceil(100/50)
        assert test.class_counts()[0] == 30
        assert [p["op"] for p in provenance] == ["digits", "unbalance", "normalize"]

    def test_noise_applies_before_normalize(self):
        cfg = blob_config(
            dataset={
                "kind": "digits",
                "classes": 2,
                "per_class": 30,
                "test_per_class": 10,
                "side": 8,
            },
            transforms={"noise": {"mu": 10.0, "sigma": 5.0}, "normalize": True},
        )
        train, test, provenance = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=1)
        assert [p["op"] for p in provenance] == ["digits", "noise", "normalize"]
        assert 0.0 <= train.features.min() and train.features.max() <= 1.0

    def test_explicit_seed_freezes_data_across_runs(self):
        cfg = blob_config(
            dataset={
                "kind": "blobs",
                "classes": 2,
                "per_class": 20,
                "test_per_class": 10,
                "seed": 77,
            }
        )
        train_a, _, _ = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=1)
        train_b, _, _ = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=2)
        np.testing.assert_array_equal(train_a.features, train_b.features)

    def test_derived_seed_varies_with_run(self):
        cfg = blob_config()
        train_a, _, _ = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=1)
        train_b, _, _ = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=2)
        assert not np.array_equal(train_a.features, train_b.features)

    def test_csv_source_split(self, tmp_path):
        lines = ["f1,f2,label"] + [f"{i},{i*2},{i % 2}" for i in range(50)]
        path = tmp_path / "table.csv"
        path.write_text("\n".join(lines) + "\n")
        cfg = blob_config(
            dataset={"kind": "csv", "path": str(path), "label_column": "label", "test_fraction": 0.2}
        )
        train, test, _ = pipeline.build_pools(cfg.dataset, cfg.transforms, base_seed=3)
        assert train.n_samples == 40 and test.n_samples == 10


class TestRunConfig:
    def test_summary_document_schema(self):
        result = pipeline.run_config(blob_config())
        summary = result.summary
        for key in (
            "method",
            "dataset",
            "mean",
            "std",
            "median",
            "seeds",
            "config_hash",
            "per_class_accuracy",
            "minority_recall",
            "smoothness",
            "per_seed",
            "created_at",
        ):
            assert key in summary
        assert summary["config_hash"] == config_hash(result.config)
        assert len(summary["per_seed"]) == 2
        assert len(result.traces) == 2

    def test_deterministic_across_invocations(self):
        a = pipeline.run_config(blob_config())
        b = pipeline.run_config(blob_config())
        assert a.final_accuracies == b.final_accuracies
        assert a.traces == b.traces

    def test_local_and_global_algorithms_run(self):
        for algorithm in ("local_only", "global_only"):
            cfg = blob_config(
                federation={"algorithm": algorithm, "rounds": 2, "lr": 0.1},
                seeds=[1],
            )
            result = pipeline.run_config(cfg)
            assert 0.0 <= result.final_accuracies[0] <= 1.0

    def test_method_labels(self):
        assert pipeline.method_label(blob_config()).startswith("fedavg/focal(gamma=2")
        ce = blob_config(loss={"family": "cross_entropy"})
        assert "cross_entropy" in pipeline.method_label(ce)


class TestAblation:
    def test_axis_override(self):
        cfg = blob_config()
        assert pipeline.apply_axis(cfg, "gamma", 5.0).loss.gamma == 5.0
        assert pipeline.apply_axis(cfg, "psi", 0.2).federation.psi == 0.2
        assert pipeline.apply_axis(cfg, "client_ratio", 0.34).federation.client_ratio == 0.34
        with pytest.raises(ConfigurationError):
            pipeline.apply_axis(cfg, "lr", 0.1)

    def test_rows_follow_input_order(self):
        rows, results = pipeline.run_ablation(blob_config(seeds=[1]), "psi", [0.8, 0.0])
        assert [row["value"] for row in rows] == [0.8, 0.0]
        assert set(results) == {0.8, 0.0}
        csv_text = pipeline.ablation_csv(rows)
        assert csv_text.splitlines()[0] == "axis,value,mean,std,median,n_seeds"


class TestPrepareCache:
    def test_round_trip_through_cache_source(self, tmp_path):
        cfg = blob_config()
        directory, manifest = pipeline.prepare_cache(
            "frozen", cfg.dataset, TransformsSpec(normalize=False), tmp_path, seed=9
        )
        assert manifest["train_samples"] == 180
        cached_cfg = blob_config(dataset={"kind": "cache", "path": str(directory)})
        result = pipeline.run_config(cached_cfg)
        assert len(result.runs) == 2
