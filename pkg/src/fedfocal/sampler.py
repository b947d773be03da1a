"""Validation-gated client selection.

Each round keeps up to ``floor(psi * K)`` clients whose validation loss
improved since the previous time they were selected, and fills the
remaining quota with a uniform random draw from everyone else. ``psi=0``
degenerates to plain uniform sampling; ``psi=1`` carries every improved
client (accepted with a warning since it disables the random refresh).

Randomness contract: the draws for round ``i`` come from
``np.random.default_rng([rng_seed, i])``, consumed as (1) the improved
subset, skipped when the quota or the improved set is empty, then (2) the
random filler. Reference implementations reproduce selections by
mirroring this key scheme.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import ConfigurationError, IntegrityError


def improvement_quota(psi: float, quota: int) -> int:
    """floor(psi * K) with a tolerance for binary rounding (0.6*10 == 6)."""
    return int(np.floor(psi * quota + 1e-9))


@dataclass
class SamplerState:
    """Mutable selection bookkeeping carried across rounds."""

    psi: float
    quota: int              # K, clients trained per round
    n_clients: int          # N, total client pool
    rng_seed: int
    prev_selected: tuple[int, ...] = ()
    val_history: dict[int, list[float]] = field(default_factory=dict)
    pending_val: dict[int, float] = field(default_factory=dict)
    round_index: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.psi <= 1.0:
            raise ConfigurationError(f"psi must lie in [0, 1], got {self.psi}")
        if self.psi == 1.0:
            warnings.warn(
                "psi=1.0 carries every improved client and disables the random refresh",
                UserWarning,
                stacklevel=2,
            )
        if self.quota < 1 or self.quota > self.n_clients:
            raise ConfigurationError(
                f"need 1 <= K <= N, got K={self.quota}, N={self.n_clients}"
            )
        if len(set(self.prev_selected)) != len(self.prev_selected):
            raise IntegrityError("prev_selected contains duplicate client ids")


@dataclass(frozen=True)
class SelectionAudit:
    """Per-round record of the selection algebra."""

    improved: tuple[int, ...]   # clients whose validation loss decreased
    carried: tuple[int, ...]    # random subset of improved, at most floor(psi*K)
    filler: tuple[int, ...]     # random draw topping the quota back up to K


def random_selection(n_clients: int, quota: int, seed) -> tuple[int, ...]:
    """Uniform draw of ``quota`` client ids without replacement, sorted."""
    if quota > n_clients:
        raise ConfigurationError(f"cannot select {quota} of {n_clients} clients")
    rng = np.random.default_rng(seed)
    picked = rng.choice(n_clients, size=quota, replace=False)
    return tuple(sorted(int(c) for c in picked))


def initial_selection(state: SamplerState) -> tuple[tuple[int, ...], SelectionAudit]:
    """Round-0 selection: fully random, recorded into the state."""
    if state.round_index != 0:
        raise ConfigurationError("initial_selection only applies to round 0")
    selected = random_selection(state.n_clients, state.quota, [state.rng_seed, 0])
    state.prev_selected = selected
    state.round_index = 1
    return selected, SelectionAudit(improved=(), carried=(), filler=selected)


def select_clients(
    state: SamplerState,
    latest_val: Mapping[int, tuple[float | None, float]],
) -> tuple[tuple[int, ...], SamplerState, SelectionAudit]:
    """Pick the next round's clients from last round's validation losses.

    ``latest_val`` maps every previously selected client to the pair
    (loss recorded the last time it was selected before that round, or
    None on first participation; loss measured last round). A client
    improved when the new loss is strictly lower. New losses are appended
    to the state's history.
    """
    if state.round_index < 1:
        raise ConfigurationError("round 0 must use initial_selection/random_selection")
    if set(latest_val) != set(state.prev_selected):
        raise IntegrityError(
            "latest_val must cover exactly the previously selected clients"
        )

    improved = tuple(
        sorted(
            client
            for client, (prev_loss, new_loss) in latest_val.items()
            if prev_loss is not None and new_loss < prev_loss
        )
    )
    rng = np.random.default_rng([state.rng_seed, state.round_index])
    cap = improvement_quota(state.psi, state.quota)
    n_carry = min(len(improved), cap)
    if n_carry > 0:
        carried = tuple(
            sorted(int(c) for c in rng.choice(improved, size=n_carry, replace=False))
        )
    else:
        carried = ()
    n_fill = state.quota - n_carry
    if n_fill > 0:
        pool = np.array([c for c in range(state.n_clients) if c not in set(carried)])
        filler = tuple(
            sorted(int(c) for c in rng.choice(pool, size=n_fill, replace=False))
        )
    else:
        filler = ()
    selected = tuple(sorted(carried + filler))

    for client, (_, new_loss) in latest_val.items():
        state.val_history.setdefault(client, []).append(float(new_loss))
    state.prev_selected = selected
    state.round_index += 1
    return selected, state, SelectionAudit(improved=improved, carried=carried, filler=filler)


def build_latest_val(state: SamplerState) -> dict[int, tuple[float | None, float]]:
    """Assemble the (previous, newest) loss pairs for the last selection."""
    pairs: dict[int, tuple[float | None, float]] = {}
    for client in state.prev_selected:
        if client not in state.pending_val:
            raise IntegrityError(f"no recorded validation loss for client {client}")
        history = state.val_history.get(client)
        prev = history[-1] if history else None
        pairs[client] = (prev, state.pending_val[client])
    return pairs
