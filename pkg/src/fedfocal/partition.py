"""Federated partitioning: client shards with train/validation/test splits.

``iid_shards`` deals a seeded shuffle into near-equal chunks;
``label_shards`` sorts by label first so each client sees only a narrow
label range (the classic non-IID construction). Client shards are always
disjoint by sample index and jointly cover the source dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .exceptions import ConfigurationError, PartitionError

SCHEMES = ("iid_shards", "label_shards")


@dataclass(frozen=True)
class ClientShards:
    """One client's private train/validation/test datasets."""

    train: Dataset
    validation: Dataset
    test: Dataset


@dataclass(frozen=True)
class FederatedPartition:
    """Ordered client shards derived from a common source."""

    clients: tuple[ClientShards, ...]
    scheme: str

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    def pooled_test(self) -> Dataset:
        """Union of all client test shards, in client order."""
        first = self.clients[0].test
        return Dataset(
            features=np.concatenate([c.test.features for c in self.clients]),
            labels=np.concatenate([c.test.labels for c in self.clients]),
            class_count=first.class_count,
            name=f"{first.name}-pooled",
        )


def _shard_indices(
    labels: np.ndarray, n_clients: int, scheme: str, rng: np.random.Generator
) -> list[np.ndarray]:
    if scheme == "iid_shards":
        order = rng.permutation(labels.shape[0])
    elif scheme == "label_shards":
        order = np.argsort(labels, kind="stable")
    else:
        raise ConfigurationError(f"unknown partition scheme {scheme!r}")
    return [chunk for chunk in np.array_split(order, n_clients)]


def partition(
    dataset: Dataset,
    n_clients: int,
    scheme: str,
    val_fraction: float,
    test_fraction: float,
    seed: int,
) -> FederatedPartition:
    """Split one dataset into per-client (train, validation, test) shards.

    Validation and test rows are carved from each client's own shard after
    a client-local shuffle, so label_shards clients keep their skewed label
    range in every split.
    """
    if n_clients < 1:
        raise ConfigurationError(f"n_clients must be >= 1, got {n_clients}")
    if not (0.0 < val_fraction < 1.0 and 0.0 < test_fraction < 1.0):
        raise ConfigurationError("val/test fractions must lie in (0, 1)")
    if val_fraction + test_fraction >= 1.0:
        raise ConfigurationError("val_fraction + test_fraction must be < 1")
    rng = np.random.default_rng([seed])
    shards = _shard_indices(dataset.labels, n_clients, scheme, rng)
    clients = []
    for client_id, shard in enumerate(shards):
        shard = shard[rng.permutation(shard.shape[0])]
        n_val = int(val_fraction * shard.shape[0])
        n_test = int(test_fraction * shard.shape[0])
        n_train = shard.shape[0] - n_val - n_test
        if min(n_val, n_test, n_train) < 1:
            raise PartitionError(
                f"client {client_id} shard of {shard.shape[0]} samples leaves an empty split"
            )
        name = f"{dataset.name}-c{client_id}"
        clients.append(
            ClientShards(
                train=dataset.take(shard[: n_train], name=name),
                validation=dataset.take(shard[n_train : n_train + n_val], name=name),
                test=dataset.take(shard[n_train + n_val :], name=name),
            )
        )
    return FederatedPartition(clients=tuple(clients), scheme=scheme)


def federate(
    train_pool: Dataset,
    test_pool: Dataset,
    n_clients: int,
    scheme: str,
    val_fraction: float,
    seed: int,
) -> FederatedPartition:
    """Partition a train pool and a held-out test pool among clients.

    Used by experiment pipelines where imbalance transforms apply to the
    training pool only: the test pool keeps its own class balance and is
    dealt to clients under the same scheme, so per-class accuracy stays
    measurable.
    """
    if n_clients < 1:
        raise ConfigurationError(f"n_clients must be >= 1, got {n_clients}")
    if not 0.0 < val_fraction < 1.0:
        raise ConfigurationError("val_fraction must lie in (0, 1)")
    rng = np.random.default_rng([seed])
    train_shards = _shard_indices(train_pool.labels, n_clients, scheme, rng)
    test_shards = _shard_indices(test_pool.labels, n_clients, scheme, rng)
    clients = []
    for client_id, (shard, test_shard) in enumerate(zip(train_shards, test_shards)):
        shard = shard[rng.permutation(shard.shape[0])]
        n_val = int(val_fraction * shard.shape[0])
        n_train = shard.shape[0] - n_val
        if n_val < 1 or n_train < 1 or test_shard.shape[0] < 1:
            raise PartitionError(
                f"client {client_id} would receive an empty train, validation or test shard"
            )
        name = f"{train_pool.name}-c{client_id}"
        clients.append(
            ClientShards(
                train=train_pool.take(shard[:n_train], name=name),
                validation=train_pool.take(shard[n_train:], name=name),
                test=test_pool.take(test_shard, name=name),
            )
        )
    return FederatedPartition(clients=tuple(clients), scheme=scheme)
