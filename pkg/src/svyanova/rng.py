"""Deterministic random-stream management.

Every stochastic component (population generation, each sampling stage,
each MCMC chain, each replicate) draws from its own generator keyed by
(seed, *stream ids) through numpy's splittable ``SeedSequence``.  Streams
are statistically independent, so replicates can run in parallel without
shared RNG state and reruns are reproducible.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the independent stream identified by (seed, *key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *key: int) -> int:
    """Stable 63-bit child seed for configs that carry their own seed field."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
