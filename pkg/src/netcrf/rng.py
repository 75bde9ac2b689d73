"""Deterministic random streams.

All randomness flows through counter-based Philox generators keyed by
64-bit seeds. Child streams are derived through ``numpy.random.SeedSequence``
spawn keys rather than by sharing generator state, so replications are
reproducible across platforms and across any process/thread scheduling.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "numpy.random.Philox (SeedSequence-keyed)"

_MAX_SEED = 2**64


def rng_from_seed(seed: int, *path: int) -> np.random.Generator:
    """Generator keyed by ``seed``; extra ``path`` ints select a child stream."""
    if not 0 <= int(seed) < _MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seeds(seed: int, index: int, count: int) -> list[int]:
    """Derive ``count`` independent 64-bit seeds for sub-stream ``index``."""
    if not 0 <= int(seed) < _MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]
