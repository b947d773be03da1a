"""Independent reference implementations used as test oracles.

The plain-FedAvg loop below re-implements selection, local SGD, and
weighted averaging directly from the documented seed-derivation contract
(`fedfocal.rng`), bypassing the sampler and federation orchestration under
test. Only the gradient engine (`fedfocal.nn`) is shared; it is verified
separately against finite differences.
"""

from __future__ import annotations

import numpy as np

from fedfocal import nn
from fedfocal.partition import FederatedPartition
from fedfocal.rng import TAG_INIT, TAG_SAMPLER, TAG_SHUFFLE, derive_seed


def brute_force_weighted_mean(updates: list[tuple[np.ndarray, int]]) -> np.ndarray:
    total = float(sum(count for _, count in updates))
    out = np.zeros_like(updates[0][0])
    for params, count in updates:
        out += (count / total) * params
    return out


def reference_fedavg(
    partition: FederatedPartition,
    config: nn.MlpConfig,
    lr: float,
    batch_size: int,
    local_epochs: int,
    rounds: int,
    quota: int,
    seed: int,
) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Plain FedAvg with uniform sampling and softmax cross-entropy."""
    n_clients = partition.n_clients
    params = nn.init_params(config, derive_seed(seed, TAG_INIT))
    sampler_seed = derive_seed(seed, TAG_SAMPLER)
    selections: list[tuple[int, ...]] = []

    for round_no in range(rounds):
        rng = np.random.default_rng([sampler_seed, round_no])
        selected = tuple(
            sorted(int(c) for c in rng.choice(n_clients, size=quota, replace=False))
        )
        selections.append(selected)

        updates = []
        for cid in selected:
            shard = partition.clients[cid].train
            local = params.copy()
            shuffle = np.random.default_rng([seed, TAG_SHUFFLE, round_no, cid])
            for _ in range(local_epochs):
                order = shuffle.permutation(shard.n_samples)
                for start in range(0, shard.n_samples, batch_size):
                    batch = order[start : start + batch_size]
                    features = shard.features[batch]
                    probs = nn.forward(local, config, features)
                    onehot = np.eye(config.output_size)[shard.labels[batch]]
                    grads = nn.backward(local, config, features, probs - onehot)
                    local = local - lr * grads
            updates.append((local, shard.n_samples))
        params = brute_force_weighted_mean(updates)
    return params, selections
