"""Deterministic random streams.

Every stochastic operation in the package draws from a Philox counter-based
generator keyed by an explicit integer seed plus a stream tag, so distinct
concerns (seed-set selection, strategy randomness, bootstrap resampling)
never share or perturb each other's streams.
"""

from __future__ import annotations

import numpy as np

# Stream tags. Keeping them in one place guarantees two concerns never
# collide on the same (seed, spawn_key) pair.
SEED_SET_STREAM = 0
STRATEGY_STREAM = 1
SAMPLING_STREAM = 2
FOREST_STREAM = 3


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a Philox generator for ``seed`` on the given stream path."""
    entropy = seed % (1 << 64)
    key = tuple(int(s) % (1 << 64) for s in stream)
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=entropy, spawn_key=key))
    )
