"""Local training, aggregation, rounds, and baseline runners."""

import numpy as np
import pytest

from fedfocal import data, federation, losses, nn
from fedfocal.exceptions import AggregationError, DimensionError
from fedfocal.federation import (
    TrainSettings,
    fedavg_aggregate,
    local_train,
    quota_from_ratio,
    run_federated,
    run_global_baseline,
    run_local_baseline,
)
from fedfocal.partition import federate

from .oracles import brute_force_weighted_mean, reference_fedavg


def blob_partition(n_clients=4, per_class=80, classes=3, dim=5, separation=4.0, seed=0):
    train = data.synth_blobs(classes, per_class, dim, separation, seed=seed)
    test = data.synth_blobs(classes, per_class // 2, dim, separation, seed=seed + 1)
    return federate(train, test, n_clients, "iid_shards", val_fraction=0.2, seed=seed + 2)


def ce_settings(**kwargs):
    return TrainSettings(loss=losses.LossSpec(), **kwargs)


class TestLocalTrain:
    def test_zero_epochs_keeps_params(self):
        part = blob_partition()
        cfg = nn.MlpConfig((5, 8, 3))
        params = nn.init_params(cfg, 1)
        shards = part.clients[0]
        result = local_train(
            params, cfg, shards.train, shards.validation, ce_settings(local_epochs=0), seed=3
        )
        np.testing.assert_array_equal(result.params, params)
        assert result.val_loss == pytest.approx(
            federation.mean_dataset_loss(params, cfg, shards.validation, losses.LossSpec())
        )

    def test_separable_shard_reaches_full_train_accuracy(self):
        part = blob_partition(n_clients=2, separation=5.0)
        cfg = nn.MlpConfig((5, 16, 3))
        shards = part.clients[0]
        result = local_train(
            nn.init_params(cfg, 2),
            cfg,
            shards.train,
            shards.validation,
            ce_settings(lr=0.2, batch_size=16, local_epochs=50),
            seed=4,
        )
        probs = nn.forward(result.params, cfg, shards.train.features)
        accuracy = np.mean(probs.argmax(axis=1) == shards.train.labels)
        assert accuracy == 1.0

    def test_deterministic_per_seed(self):
        part = blob_partition()
        cfg = nn.MlpConfig((5, 8, 3))
        params = nn.init_params(cfg, 5)
        shards = part.clients[1]
        a = local_train(params, cfg, shards.train, shards.validation, ce_settings(), seed=[9, 1])
        b = local_train(params, cfg, shards.train, shards.validation, ce_settings(), seed=[9, 1])
        np.testing.assert_array_equal(a.params, b.params)
        assert a.val_loss == b.val_loss


class TestFedavgAggregate:
    def test_single_update_unchanged(self):
        params = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(fedavg_aggregate([(params, 17)]), params)

    def test_equal_counts_symmetry(self):
        out = fedavg_aggregate([(np.array([0.0, 2.0]), 5), (np.array([2.0, 0.0]), 5)])
        np.testing.assert_array_equal(out, [1.0, 1.0])

    def test_weighted_mean_arithmetic(self):
        out = fedavg_aggregate([(np.array([0.0]), 1), (np.array([4.0]), 3)])
        np.testing.assert_array_equal(out, [3.0])

    def test_empty_rejected(self):
        with pytest.raises(AggregationError):
            fedavg_aggregate([])

    def test_layout_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            fedavg_aggregate([(np.zeros(3), 1), (np.zeros(4), 1)])

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            k = int(rng.integers(1, 8))
            dim = int(rng.integers(1, 30))
            updates = [
                (rng.uniform(-1, 1, size=dim), int(rng.integers(1, 500))) for _ in range(k)
            ]
            ours = fedavg_aggregate(updates)
            oracle = brute_force_weighted_mean(updates)
            assert np.max(np.abs(ours - oracle)) <= 1e-15


class TestRunFederated:
    def test_every_round_selects_quota(self):
        part = blob_partition(n_clients=6)
        cfg = nn.MlpConfig((5, 8, 3))
        run = run_federated(
            part, cfg, ce_settings(), psi=0.5, client_ratio=0.5, rounds=5, seed=3
        )
        assert len(run.reports) == 5
        assert all(len(r.selected) == 3 for r in run.reports)
        assert [r.round_index for r in run.reports] == list(range(5))

    def test_selection_algebra_in_reports(self):
        part = blob_partition(n_clients=8)
        cfg = nn.MlpConfig((5, 8, 3))
        run = run_federated(
            part, cfg, ce_settings(), psi=0.8, client_ratio=0.5, rounds=8, seed=7
        )
        for report in run.reports[1:]:
            assert set(report.carried) <= set(report.improved)
            assert set(report.carried) | set(report.filler) == set(report.selected)
            assert set(report.carried).isdisjoint(report.filler)

    def test_plain_fedavg_degeneration_matches_reference(self):
        """psi=0, gamma=0, alpha=1 must walk the reference trajectory exactly."""
        part = blob_partition(n_clients=5)
        cfg = nn.MlpConfig((5, 8, 3))
        settings = ce_settings(lr=0.1, batch_size=16, local_epochs=2)
        run = run_federated(
            part, cfg, settings, psi=0.0, client_ratio=0.4, rounds=6, seed=11,
            minority_classes=(0,),
        )
        ref_params, ref_selections = reference_fedavg(
            part, cfg, lr=0.1, batch_size=16, local_epochs=2, rounds=6, quota=2, seed=11
        )
        assert [r.selected for r in run.reports] == ref_selections
        final = run_federated(
            part, cfg, settings, psi=0.0, client_ratio=0.4, rounds=6, seed=11,
            minority_classes=(0,),
        )
        assert final.reports == run.reports  # rerun identical
        # trajectory equality: recompute our final params and compare bitwise
        np.testing.assert_array_equal(_final_params(part, cfg, settings, 11, 6, 0.4), ref_params)

    def test_workers_do_not_change_results(self):
        part = blob_partition(n_clients=6)
        cfg = nn.MlpConfig((5, 8, 3))
        settings = ce_settings(local_epochs=2)
        sequential = run_federated(
            part, cfg, settings, psi=0.6, client_ratio=0.5, rounds=4, seed=2, workers=1,
            minority_classes=(0,),
        )
        threaded = run_federated(
            part, cfg, settings, psi=0.6, client_ratio=0.5, rounds=4, seed=2, workers=3,
            minority_classes=(0,),
        )
        assert sequential.reports == threaded.reports
        assert sequential.final.overall_accuracy == threaded.final.overall_accuracy


def _final_params(part, cfg, settings, seed, rounds, ratio):
    from fedfocal.federation import run_round
    from fedfocal.rng import TAG_INIT, TAG_SAMPLER, derive_seed
    from fedfocal.sampler import SamplerState

    params = nn.init_params(cfg, derive_seed(seed, TAG_INIT))
    state = SamplerState(
        psi=0.0,
        quota=quota_from_ratio(ratio, part.n_clients),
        n_clients=part.n_clients,
        rng_seed=derive_seed(seed, TAG_SAMPLER),
    )
    pooled = part.pooled_test()
    for _ in range(rounds):
        params, _, state = run_round(
            params, part, state, cfg, settings, experiment_seed=seed, pooled_test=pooled
        )
    return params


class TestQuota:
    def test_ratio_rounding(self):
        assert quota_from_ratio(0.10, 10) == 1
        assert quota_from_ratio(0.25, 20) == 5
        assert quota_from_ratio(0.15, 20) == 3
        assert quota_from_ratio(0.01, 10) == 1  # never zero


class TestBaselines:
    def test_global_beats_or_matches_local_on_iid_shards(self):
        part = blob_partition(n_clients=5, per_class=60, separation=2.0)
        cfg = nn.MlpConfig((5, 8, 3))
        settings = ce_settings(lr=0.1, local_epochs=1)
        global_run = run_global_baseline(part, cfg, settings, rounds=10, seed=5)
        local_run = run_local_baseline(part, cfg, settings, rounds=10, seed=5)
        assert global_run.final.overall_accuracy >= local_run.final.overall_accuracy - 0.02

    def test_local_baseline_reports_cover_all_clients(self):
        part = blob_partition(n_clients=3)
        cfg = nn.MlpConfig((5, 8, 3))
        run = run_local_baseline(part, cfg, ce_settings(), rounds=2, seed=1)
        assert all(r.selected == (0, 1, 2) for r in run.reports)
