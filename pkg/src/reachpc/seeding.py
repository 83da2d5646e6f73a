"""Counter-based seed splitting: every random stream is keyed by (seed, counters...)."""

from __future__ import annotations

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 32-bit sub-seed for the stream identified by ``keys``."""
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(k) for k in keys]]).generate_state(1)
    return int(state[0])


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
