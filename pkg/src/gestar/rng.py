"""Deterministic derivation of independent random streams.

Every random draw in the package comes from a Generator created here, keyed
by a master seed plus a path of labels (strings or integers). Streams are
independent of each other and of scheduling order, so parallel work can be
reseeded per unit without coordination.
"""

from __future__ import annotations

import zlib

import numpy as np

_U64 = (1 << 64) - 1


def _as_entropy(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & _U64


def rng_for(master_seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *path)."""
    entropy = [_as_entropy(master_seed)] + [_as_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed: int, *path: int | str) -> int:
    """A stable 63-bit integer seed for the same stream identity."""
    entropy = [_as_entropy(master_seed)] + [_as_entropy(p) for p in path]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0] >> 1)
