"""Seed derivation rules.

Every random draw in the package flows through ``np.random.default_rng``
seeded by an explicit key. Keys are tuples ``(base_seed, tag, *extra)``
built with the tag constants below, so that independent subsystems never
share a stream and a run is reproducible from its base seed alone.

This derivation scheme is part of the public contract: reference
implementations (for example the plain-FedAvg oracle used in the test
suite) reproduce trajectories by mirroring these keys.
"""

from __future__ import annotations

import numpy as np

TAG_INIT = 1        # model parameter initialisation
TAG_PARTITION = 2   # federated partitioning
TAG_SAMPLER = 3     # per-round client selection
TAG_DATA = 4        # dataset synthesis / transform stages
TAG_SHUFFLE = 5     # per-client mini-batch shuffling, keyed (round, client)


def derive_seed(*parts: int) -> int:
    """Collapse an integer key into a single 64-bit seed, stably."""
    state = np.random.SeedSequence(list(parts)).generate_state(2, np.uint64)
    return int(state[0])


def rng_from(*parts: int) -> np.random.Generator:
    """Generator seeded from an integer key tuple."""
    return np.random.default_rng(list(parts))
