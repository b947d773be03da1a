"""Round-based federated training with validation-gated sampling.

Each round: select clients, broadcast the global parameters, run local
mini-batch SGD per client, average the returned parameters weighted by
client sample counts, evaluate on the pooled test set. Client work items
are independent and may run on a thread pool; the reduction happens in
ascending client-id order, so results never depend on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import losses, metrics, nn, sampler
from .data import Dataset
from .exceptions import AggregationError, DimensionError, NumericError
from .partition import FederatedPartition
from .rng import TAG_INIT, TAG_SAMPLER, TAG_SHUFFLE, derive_seed


@dataclass(frozen=True)
class TrainSettings:
    """Hyperparameters for one client's local pass."""

    loss: losses.LossSpec
    lr: float = 0.05
    batch_size: int = 32
    local_epochs: int = 1


@dataclass(frozen=True)
class LocalResult:
    params: np.ndarray
    train_loss: float
    val_loss: float


@dataclass(frozen=True)
class RoundReport:
    """Everything observable about one completed round."""

    round_index: int
    selected: tuple[int, ...]
    improved: tuple[int, ...]
    carried: tuple[int, ...]
    filler: tuple[int, ...]
    per_client_val_loss: dict[int, float]
    mean_train_loss: float
    global_test_accuracy: float
    per_class_accuracy: tuple[float, ...]
    minority_recall: float


@dataclass(frozen=True)
class SeedRun:
    """Trace and final evaluation of one seeded execution."""

    seed: int
    reports: tuple[RoundReport, ...]
    final: metrics.EvalResult

    def accuracies(self) -> list[float]:
        return [r.global_test_accuracy for r in self.reports]


def mean_dataset_loss(
    params: np.ndarray, config: nn.MlpConfig, dataset: Dataset, spec: losses.LossSpec
) -> float:
    probs = nn.forward(params, config, dataset.features)
    return float(np.mean(losses.batch_loss(probs, dataset.labels, spec, config.head)))


def local_train(
    params: np.ndarray,
    config: nn.MlpConfig,
    train: Dataset,
    validation: Dataset,
    settings: TrainSettings,
    seed,
) -> LocalResult:
    """Mini-batch SGD over the client shard; losses use post-training params.

    The shuffle generator is seeded explicitly so a client's pass depends
    only on (params, shard, seed), never on scheduling.
    """
    if train.n_samples == 0 or validation.n_samples == 0:
        raise DimensionError("local training needs non-empty train and validation shards")
    rng = np.random.default_rng(seed)
    current = np.array(params, dtype=np.float64, copy=True)
    for _ in range(settings.local_epochs):
        order = rng.permutation(train.n_samples)
        for start in range(0, train.n_samples, settings.batch_size):
            batch = order[start : start + settings.batch_size]
            features = train.features[batch]
            probs = nn.forward(current, config, features)
            grad_logits = losses.batch_grad_logits(
                probs, train.labels[batch], settings.loss, config.head
            )
            grads = nn.backward(current, config, features, grad_logits)
            current = nn.sgd_step(current, grads, settings.lr)
    train_loss = mean_dataset_loss(current, config, train, settings.loss)
    val_loss = mean_dataset_loss(current, config, validation, settings.loss)
    if not (np.isfinite(train_loss) and np.isfinite(val_loss) and np.all(np.isfinite(current))):
        raise NumericError("local training diverged to non-finite values")
    return LocalResult(params=current, train_loss=train_loss, val_loss=val_loss)


def fedavg_aggregate(updates: list[tuple[np.ndarray, int]]) -> np.ndarray:
    """Elementwise weighted mean, weights proportional to sample counts.

    The reduction runs in the order given (callers pass ascending client
    id), keeping results independent of worker scheduling.
    """
    if not updates:
        raise AggregationError("no client updates to aggregate")
    length = updates[0][0].shape
    if any(p.shape != length for p, _ in updates):
        raise DimensionError("client updates disagree on parameter layout")
    if any(count <= 0 for _, count in updates):
        raise AggregationError("sample counts must be positive")
    total = float(sum(count for _, count in updates))
    result = np.zeros_like(updates[0][0])
    for params, count in updates:
        result += (count / total) * params
    return result


def run_round(
    global_params: np.ndarray,
    partition: FederatedPartition,
    state: sampler.SamplerState,
    config: nn.MlpConfig,
    settings: TrainSettings,
    experiment_seed: int,
    pooled_test: Dataset,
    minority_classes: tuple[int, ...] = (),
    workers: int = 1,
) -> tuple[np.ndarray, RoundReport, sampler.SamplerState]:
    """One full selection/train/aggregate/evaluate cycle."""
    round_no = state.round_index
    if round_no == 0:
        selected, audit = sampler.initial_selection(state)
    else:
        selected, state, audit = sampler.select_clients(state, sampler.build_latest_val(state))

    def train_one(client_id: int) -> tuple[int, LocalResult]:
        shards = partition.clients[client_id]
        try:
            result = local_train(
                global_params,
                config,
                shards.train,
                shards.validation,
                settings,
                seed=[experiment_seed, TAG_SHUFFLE, round_no, client_id],
            )
        except NumericError as exc:
            raise NumericError(f"round {round_no}, client {client_id}: {exc}") from exc
        return client_id, result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(train_one, selected))
    else:
        results = dict(map(train_one, selected))

    updates = [
        (results[cid].params, partition.clients[cid].train.n_samples) for cid in selected
    ]
    new_params = fedavg_aggregate(updates)
    evaluation = metrics.evaluate(new_params, config, pooled_test, minority_classes)

    state.pending_val = {cid: results[cid].val_loss for cid in selected}
    report = RoundReport(
        round_index=round_no,
        selected=selected,
        improved=audit.improved,
        carried=audit.carried,
        filler=audit.filler,
        per_client_val_loss=dict(state.pending_val),
        mean_train_loss=float(np.mean([results[cid].train_loss for cid in selected])),
        global_test_accuracy=evaluation.overall_accuracy,
        per_class_accuracy=evaluation.per_class_accuracy,
        minority_recall=evaluation.minority_recall,
    )
    return new_params, report, state


def quota_from_ratio(client_ratio: float, n_clients: int) -> int:
    """K from the sampled-client ratio: round half up, at least one client."""
    return max(1, int(np.floor(client_ratio * n_clients + 0.5)))


def run_federated(
    partition: FederatedPartition,
    config: nn.MlpConfig,
    settings: TrainSettings,
    psi: float,
    client_ratio: float,
    rounds: int,
    seed: int,
    minority_classes: tuple[int, ...] = (),
    workers: int = 1,
) -> SeedRun:
    """FedAvg with validation-gated sampling for a fixed number of rounds."""
    params = nn.init_params(config, derive_seed(seed, TAG_INIT))
    state = sampler.SamplerState(
        psi=psi,
        quota=quota_from_ratio(client_ratio, partition.n_clients),
        n_clients=partition.n_clients,
        rng_seed=derive_seed(seed, TAG_SAMPLER),
    )
    pooled = partition.pooled_test()
    reports = []
    for _ in range(rounds):
        params, report, state = run_round(
            params,
            partition,
            state,
            config,
            settings,
            experiment_seed=seed,
            pooled_test=pooled,
            minority_classes=minority_classes,
            workers=workers,
        )
        reports.append(report)
    final = metrics.evaluate(params, config, pooled, minority_classes)
    return SeedRun(seed=seed, reports=tuple(reports), final=final)


def run_local_baseline(
    partition: FederatedPartition,
    config: nn.MlpConfig,
    settings: TrainSettings,
    rounds: int,
    seed: int,
    minority_classes: tuple[int, ...] = (),
    workers: int = 1,
) -> SeedRun:
    """Per-client models, no aggregation; each round adds one local pass.

    Every client predicts its own test shard; accuracy is computed on the
    pooled predictions so the trace stays comparable with the other
    algorithms.
    """
    n = partition.n_clients
    client_params = [
        nn.init_params(config, derive_seed(seed, TAG_INIT, cid)) for cid in range(n)
    ]
    pooled = partition.pooled_test()
    reports = []

    def evaluate_clients() -> metrics.EvalResult:
        preds = np.concatenate(
            [
                metrics.predictions(client_params[cid], config, partition.clients[cid].test.features)
                for cid in range(n)
            ]
        )
        confusion = metrics.confusion_matrix(pooled.labels, preds, pooled.class_count)
        support = confusion.sum(axis=1)
        with np.errstate(invalid="ignore"):
            per_class = np.where(support > 0, np.diag(confusion) / support, np.nan)
        minority = (
            float(np.nanmean([per_class[c] for c in minority_classes]))
            if minority_classes
            else float("nan")
        )
        return metrics.EvalResult(
            overall_accuracy=float(np.trace(confusion) / confusion.sum()),
            per_class_accuracy=tuple(float(v) for v in per_class),
            minority_recall=minority,
            confusion=confusion,
        )

    for round_no in range(rounds):

        def train_one(cid: int) -> tuple[int, LocalResult]:
            shards = partition.clients[cid]
            return cid, local_train(
                client_params[cid],
                config,
                shards.train,
                shards.validation,
                settings,
                seed=[seed, TAG_SHUFFLE, round_no, cid],
            )

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = dict(pool.map(train_one, range(n)))
        else:
            results = dict(map(train_one, range(n)))
        for cid in range(n):
            client_params[cid] = results[cid].params

        evaluation = evaluate_clients()
        reports.append(
            RoundReport(
                round_index=round_no,
                selected=tuple(range(n)),
                improved=(),
                carried=(),
                filler=(),
                per_client_val_loss={cid: results[cid].val_loss for cid in range(n)},
                mean_train_loss=float(np.mean([results[cid].train_loss for cid in range(n)])),
                global_test_accuracy=evaluation.overall_accuracy,
                per_class_accuracy=evaluation.per_class_accuracy,
                minority_recall=evaluation.minority_recall,
            )
        )
    final = evaluate_clients()
    return SeedRun(seed=seed, reports=tuple(reports), final=final)


def run_global_baseline(
    partition: FederatedPartition,
    config: nn.MlpConfig,
    settings: TrainSettings,
    rounds: int,
    seed: int,
    minority_classes: tuple[int, ...] = (),
) -> SeedRun:
    """One model on the pooled training data; each round adds one local pass."""
    pooled_train = Dataset(
        features=np.concatenate([c.train.features for c in partition.clients]),
        labels=np.concatenate([c.train.labels for c in partition.clients]),
        class_count=partition.clients[0].train.class_count,
        name="pooled-train",
    )
    pooled_val = Dataset(
        features=np.concatenate([c.validation.features for c in partition.clients]),
        labels=np.concatenate([c.validation.labels for c in partition.clients]),
        class_count=partition.clients[0].train.class_count,
        name="pooled-val",
    )
    pooled = partition.pooled_test()
    params = nn.init_params(config, derive_seed(seed, TAG_INIT))
    reports = []
    for round_no in range(rounds):
        result = local_train(
            params,
            config,
            pooled_train,
            pooled_val,
            settings,
            seed=[seed, TAG_SHUFFLE, round_no, 0],
        )
        params = result.params
        evaluation = metrics.evaluate(params, config, pooled, minority_classes)
        reports.append(
            RoundReport(
                round_index=round_no,
                selected=(0,),
                improved=(),
                carried=(),
                filler=(),
                per_client_val_loss={0: result.val_loss},
                mean_train_loss=result.train_loss,
                global_test_accuracy=evaluation.overall_accuracy,
                per_class_accuracy=evaluation.per_class_accuracy,
                minority_recall=evaluation.minority_recall,
            )
        )
    final = metrics.evaluate(params, config, pooled, minority_classes)
    return SeedRun(seed=seed, reports=tuple(reports), final=final)
