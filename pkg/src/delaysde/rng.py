"""Reproducible random streams.

Every random draw in the package comes from a Philox (counter-based)
generator keyed by ``SeedSequence(master_seed, spawn_key=key)``.  The key is a
tuple of small integers; by convention

    (cell, replication, stream)

where ``cell`` indexes an experiment cell (horizon), ``replication`` the
Monte Carlo replication and ``stream`` the noise source within it (0 for the
delay equation, 1, 2, ... for the limit-system Wiener processes).  Distinct
keys give statistically independent, non-overlapping streams, so results do
not depend on which worker runs which replication.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed=None, key=()) -> np.random.Generator:
    """Accept a Generator, an int seed (with optional key) or None (seed 0)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(0 if seed is None else seed, *key)
