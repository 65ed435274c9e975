"""Seeded, splittable random streams.

Every stochastic routine takes an integer seed; independent streams are
derived from a seed plus integer keys so results never depend on call order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def split(seed: int, n: int) -> list[int]:
    seqs = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(s.generate_state(1)[0]) for s in seqs]
