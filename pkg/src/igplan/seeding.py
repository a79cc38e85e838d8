"""Deterministic child random streams.

Every stochastic component draws from a numpy Generator derived from the
experiment seed plus an integer key path, so parallel evaluation order can
never change results.
"""

from __future__ import annotations

import numpy as np

# reserved top-level stream keys
SCENE_STREAM = 0
START_STREAM = 1
MEASUREMENT_STREAM = 2
LABEL_STREAM = 3
ROLLOUT_STREAM = 4


def rng_from_key(seed: int, *key: int) -> np.random.Generator:
    """Generator for the child stream (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
