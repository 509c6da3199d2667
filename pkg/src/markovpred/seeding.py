"""Deterministic seed derivation for parallel work.

Task ``i`` of a run with root seed ``s`` draws from
``np.random.SeedSequence(entropy=s, spawn_key=(i,))``. The streams are
independent, and results depend only on ``(s, i)``, never on scheduling.
"""

from __future__ import annotations

import numpy as np


def task_seed(root: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=(int(index),))


def task_rng(root: int, index: int) -> np.random.Generator:
    return np.random.default_rng(task_seed(root, index))


def derive_seeds(root: int, count: int) -> list[np.random.SeedSequence]:
    """Per-task seed sequences ``0 .. count-1`` under the counter scheme above."""
    return [task_seed(root, i) for i in range(count)]


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
