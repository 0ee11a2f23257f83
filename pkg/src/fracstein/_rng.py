"""Seeded counter-based generators and block seed streams."""
from __future__ import annotations

import numpy as np

GENERATOR = "numpy.random.Philox"


def generator_info() -> dict:
    return {"generator": GENERATOR, "numpy_version": np.__version__, "seeding": "SeedSequence"}


def make_rng(seed) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required for stochastic operations")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def block_seeds(seed: int, n_blocks: int) -> list[np.random.SeedSequence]:
    """Disjoint per-block streams; block b always gets the same stream."""
    return np.random.SeedSequence(int(seed)).spawn(n_blocks)
