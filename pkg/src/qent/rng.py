"""Deterministic RNG stream derivation.

Every stochastic routine in this package takes an explicit
``numpy.random.Generator``.  Batch producers derive one independent stream
per (master seed, domain, sample index) triple, so output never depends on
generation order or worker count.
"""

import numpy as np


def seeded_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (master_seed, *key)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
