"""Deterministic random stream derivation.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Substreams are derived from a base seed plus a structured key, so each
unit of work (a trajectory, a replication batch, a service query) is
reproducible in isolation and independent of execution order.
"""
from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _U64
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for a run."""
    return np.random.default_rng(np.random.SeedSequence(int(seed) & _U64))


def substream(seed: int, *key) -> np.random.Generator:
    """Generator for the substream identified by ``key`` under ``seed``.

    Key parts may be ints or strings; strings are hashed with SHA-256 so
    the derivation is stable across platforms and Python processes.
    """
    spawn_key = tuple(_key_part(part) for part in key)
    return np.random.default_rng(
        np.random.SeedSequence(int(seed) & _U64, spawn_key=spawn_key)
    )
