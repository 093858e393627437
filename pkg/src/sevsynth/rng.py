"""Deterministic, splittable random streams.

Every consumer of randomness gets its own stream derived from the master
seed, a string label, and an integer index, so parallel scheduling can
never change what any stream produces. Streams are backed by the Philox
counter-based generator, which is identical across platforms.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash; stable across processes and platforms."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_key(master_seed: int, stream_label: str, index: int) -> tuple[int, int]:
    """Two 64-bit Philox key words for the (seed, label, index) stream."""
    word = fnv1a64(stream_label.encode("utf-8") + (index & _MASK64).to_bytes(8, "little"))
    return master_seed & _MASK64, word


def derive_rng(master_seed: int, stream_label: str, index: int) -> np.random.Generator:
    """Independent deterministic stream for (label, index) under the master seed."""
    w0, w1 = derive_key(master_seed, stream_label, index)
    key = np.array([w0, w1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
