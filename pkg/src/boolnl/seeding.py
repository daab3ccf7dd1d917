"""Deterministic randomness.

Two generators are used, both fixed and platform independent:

* SplitMix64 as a counter-based hash: value ``i`` of a stream depends only on
  ``(seed, i)``.  Dataset sampling uses it so that record ``i`` can be produced
  without reference to any other record.
* numpy's PCG64 for sequential draws (weight init, minibatch order).

Sub-seeds are ``seed XOR blake2b64(tag)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def derive_seed(seed: int, tag: str) -> int:
    return (int(seed) & MASK64) ^ tag_hash(tag)


def splitmix64(seed: int, counters) -> np.ndarray:
    """SplitMix64 output for each counter value, as uint64."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(int(seed) & MASK64) + (c + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def generator(seed: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, tag)))
