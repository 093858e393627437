"""EMB1 binary format writer.

Layout: 4 ASCII magic bytes "EMB1", unsigned 32-bit little-endian row
count and dimension, then row-major float32 little-endian values with no
trailing bytes. Row i corresponds to corpus line i.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"


def write_emb1(path: str | Path, vectors: np.ndarray) -> None:
    arr = np.asarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"EMB1 needs a 2-D matrix, got shape {arr.shape}")
    n, d = arr.shape
    if n == 0 or d == 0:
        raise ValueError(f"EMB1 forbids empty shapes, got n={n}, d={d}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(arr.tobytes(order="C"))


def emb1_size(n: int, d: int) -> int:
    """On-disk byte size of an EMB1 file with the given shape."""
    return 12 + 4 * n * d
