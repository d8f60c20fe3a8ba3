"""Seeded random streams.

Every stochastic routine takes an explicit seed or generator.  The bit
generator is Philox (counter-based, 64-bit), which gives the same stream on
every platform numpy supports.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def make_rng(seed: SeedLike = 0) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(seed: int, *tags: int) -> int:
    """A child seed that depends only on ``seed`` and the integer ``tags``."""
    ss = np.random.SeedSequence([int(seed), *map(int, tags)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
