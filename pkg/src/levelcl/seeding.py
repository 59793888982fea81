"""Deterministic derivation of child seeds from a master seed.

Every stochastic component (image generation, detector noise, crops,
augmentations, batch composition, parameter init) draws from its own derived
stream so that runs are reproducible and components stay independent.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep unrelated consumers of the same master seed decorrelated.
STREAM_IMAGE = 1
STREAM_DEGRADE = 2
STREAM_DETECT = 3
STREAM_CROP = 4
STREAM_AUGMENT = 5
STREAM_BATCH = 6
STREAM_INIT = 7
STREAM_PROBE = 8


def derive_seed(*parts: int) -> int:
    """Mix integer parts into a single uint32 seed, stable across runs."""
    state = np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)
    return int(state[0])


def rng_for(*parts: int) -> np.random.Generator:
    """Generator seeded from the mixed parts."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(p) for p in parts)))
