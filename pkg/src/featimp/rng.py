"""Deterministic random-stream derivation.

Every stochastic unit of work (a resampling shuffle, a perturbation draw,
a tree's bootstrap, a permutation of features) gets its own child stream
derived from the master seed plus a structured key. Streams are therefore
independent of execution order and worker count: parallel schedules cannot
change results.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _entropy_ints(keys) -> list[int]:
    out = []
    for k in keys:
        if k is None:
            out.append(0)
        elif isinstance(k, str):
            out.append(zlib.crc32(k.encode("utf-8")))
        elif isinstance(k, (int, np.integer)):
            out.append(int(k) & _MASK64)
        elif isinstance(k, (tuple, list)):
            out.extend(_entropy_ints(k))
        else:
            raise TypeError(f"unsupported stream key type: {type(k).__name__}")
    return out


def seed_sequence(*keys) -> np.random.SeedSequence:
    """Build a SeedSequence from a master seed and structured sub-keys."""
    return np.random.SeedSequence(_entropy_ints(keys))


def substream(*keys) -> np.random.Generator:
    """Child generator for the given key path, e.g. substream(seed, "draw", it, f, rep)."""
    return np.random.default_rng(seed_sequence(*keys))


def substream_seed(*keys) -> int:
    """64-bit integer seed for the given key path (for APIs that take an int)."""
    return int(seed_sequence(*keys).generate_state(1, np.uint64)[0])
