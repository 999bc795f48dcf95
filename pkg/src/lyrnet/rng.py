"""Explicit, seedable random streams.

Every source of randomness in the package (initialisation, dropout masks,
batch shuffling, synthetic data) draws from a generator created here and
passed in by the caller. There is no module-level random state.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator for ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child streams from ``rng``."""
    return rng.spawn(n)
