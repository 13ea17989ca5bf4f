"""Seed derivation so every random stream is reproducible from one integer."""

import numpy as np


def derive_seed(*keys: int) -> int:
    """Stable 63-bit seed from a tuple of integers (e.g. ``(seed, shard)``)."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def make_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
