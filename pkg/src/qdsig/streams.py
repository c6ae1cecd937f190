"""Counter-based random streams.

Unit ``k`` of a run seeded with ``seed`` always draws from
``SeedSequence(seed, spawn_key=(k,))``, so any single trial (or chunk of
trials) can be replayed without running the ones before it.
"""

import numpy as np


def stream(seed: int, *counter: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(counter)))


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))
