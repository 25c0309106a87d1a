"""Deterministic seed derivation for trials and grid points.

Child streams come from numpy's ``SeedSequence`` hashed with an explicit
spawn key, so trial ``(i, j)`` gets the same generator regardless of the
order or process in which trials run.
"""

from __future__ import annotations

import numpy as np


def child_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_sequence(seed, *key)))


def int_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for APIs that take plain ints."""
    return int(child_sequence(seed, *key).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
