"""Deterministic random streams.

Every stream is a Philox (counter-based) generator keyed by
``(master_seed, *key)`` through :class:`numpy.random.SeedSequence`, so the
stream used for replication ``r`` does not depend on how replications are
scheduled across workers.
"""

from __future__ import annotations

import enum

import numpy as np


class Role(enum.IntEnum):
    DATA = 0
    DATA_COPY = 1
    EB = 10
    GB = 11
    MB = 12
    RB = 13
    BB = 14
    DB = 15
    ORACLE = 20
    PATH = 21


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``key`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.Philox())
    return stream(seed)
