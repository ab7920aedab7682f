"""Keyed random streams.

Every random draw in the package goes through :func:`stream`, which maps a
base seed plus an arbitrary tuple of non-negative integer keys (layer index,
trial index, ...) to an independent Philox generator. Streams do not depend on
the order in which they are created, so trials can run in any order or in
parallel and still reproduce bit for bit.
"""
from __future__ import annotations

import numpy as np

# Fixed tags so that streams used for different purposes never collide.
MASK = 1
TRUTH = 2
GOLF = 3
TRIAL = 4
PROBE = 5
SEARCH = 6


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator keyed by ``(seed, *keys)``."""
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and keys must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
