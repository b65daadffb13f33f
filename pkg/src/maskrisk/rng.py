"""Deterministic derivation of per-task random streams.

Every random draw in a run comes from a ``numpy.random.Generator`` backed by
PCG64 and seeded through ``SeedSequence(master_seed, spawn_key=key)``.
``SeedSequence`` hashes the (entropy, spawn_key) pair into the generator
state, so streams for distinct keys are statistically independent and a
task's stream depends only on its key, never on scheduling order.

Key layout used by the experiment drivers::

    (tag, seed, DOMAIN_SETUP)               model, signal, X, noise
    (tag, seed, DOMAIN_TEST)                held-out rows for sampled risk
    (tag, seed, DOMAIN_CELL, rep)           masks for one sweep cell (shared
                                            across ratios by default)
    (tag, seed, DOMAIN_CELL, slot + 1, rep) masks when common random numbers
                                            are switched off
    (master_seed, DOMAIN_ORACLE, index)     oracle self-check instances

``experiment_tag`` is the first 32 bits of the SHA-256 of the experiment id.
"""

from __future__ import annotations

import hashlib

import numpy as np

DOMAIN_SETUP = 0
DOMAIN_TEST = 1
DOMAIN_CELL = 2
DOMAIN_ORACLE = 3

_MASK64 = (1 << 64) - 1


def experiment_tag(experiment_id: str) -> int:
    digest = hashlib.sha256(experiment_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``key`` under ``master_seed``."""
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    seq = np.random.SeedSequence(master_seed & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
