"""Seeded, splittable random streams.

Every stochastic draw in the package goes through a ``numpy.random.Generator``
backed by the counter-based Philox bit generator. Streams are derived from a
single integer seed with ``SeedSequence.spawn`` so that independent consumers
(environment, behaviour policy, batch sampler, initialiser) never share state.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def split(seed: int, names: list[str]) -> dict[str, np.random.Generator]:
    """Named independent streams from one seed; order of ``names`` matters."""
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: make_rng(child) for name, child in zip(names, children)}
