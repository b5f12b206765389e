"""Deterministic seed derivation.

Every stochastic component derives its generators from a user seed plus a
structural path (chunk index, datapoint index, epoch, ...).  Because a child
stream depends only on (seed, path) and never on execution order, serial and
parallel runs produce bit-identical results.
"""
from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def _entropy(seed: int, path: tuple[int, ...]) -> list[int]:
    return [int(seed) & _U64] + [int(p) & _U64 for p in path]


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Child generator for (seed, *path); stable across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, path)))


def derive_seed(seed: int, *path: int) -> int:
    """64-bit child seed for (seed, *path), usable as a new derivation root."""
    ss = np.random.SeedSequence(_entropy(seed, path))
    return int(ss.generate_state(1, np.uint64)[0])
