"""Seeded random streams.

Every random draw in a run comes from a Philox (counter-based) generator keyed by
``(seed, mission, step, purpose)`` through :class:`numpy.random.SeedSequence`.
Standard normals are produced by numpy's ziggurat sampler. Streams are
reproducible within this implementation; no cross-implementation bit-exactness
is promised.
"""

from __future__ import annotations

import numpy as np

SCENARIOS = 0
MONTE_CARLO = 1
PLANT = 2

PURPOSES = {"scenarios": SCENARIOS, "mc": MONTE_CARLO, "plant": PLANT}


def lineage(seed: int, mission: int = 0, step: int = 0, purpose: int | str = SCENARIOS) -> tuple:
    if isinstance(purpose, str):
        purpose = PURPOSES[purpose]
    return (int(seed), int(mission), int(step), int(purpose))


def make_stream(key: tuple) -> np.random.Generator:
    """Generator for a lineage tuple produced by :func:`lineage`."""
    if any(k < 0 for k in key):
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def stream(seed: int, mission: int = 0, step: int = 0, purpose: int | str = SCENARIOS):
    return make_stream(lineage(seed, mission, step, purpose))
