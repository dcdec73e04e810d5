"""Deterministic, splittable random streams.

Every experiment is driven by a 64-bit master seed. Replica ``r`` gets its own
stream whose seed is ``derive_seed(seed, r)``; the derivation runs both inputs
through the SplitMix64 finalizer::

    z += 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z ^= z >> 31

so replica streams depend only on ``(seed, r)`` and never on scheduling or on
how many other replicas exist.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    """One SplitMix64 output for the state ``z`` (pure integer arithmetic)."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, replica: int) -> int:
    """64-bit seed for replica ``replica`` of an experiment seeded by ``seed``."""
    return splitmix64(splitmix64(seed & MASK64) ^ ((replica * GOLDEN) & MASK64))


def derive_seeds(seed: int, start: int, count: int) -> np.ndarray:
    return np.array([derive_seed(seed, r) for r in range(start, start + count)], dtype=np.uint64)


def make_rng(seed: int, replica: int | None = None) -> np.random.Generator:
    """A numpy Generator on the stream for ``seed`` (or its replica sub-stream)."""
    s = seed & MASK64 if replica is None else derive_seed(seed, replica)
    return np.random.Generator(np.random.PCG64(s))


def draw_seed(rng: np.random.Generator) -> int:
    """Pull a fresh 64-bit kernel seed out of a Generator."""
    return int(rng.integers(0, 1 << 64, dtype=np.uint64))
