"""Dense sentence-embedding storage with exact cosine kNN and margin scoring.

The on-disk layout is the EMB1 binary format: 4 ASCII magic bytes "EMB1",
two unsigned 32-bit little-endian integers (row count n, dimension d),
then n*d IEEE-754 float32 values, row-major, row i = corpus line i. No
trailing bytes are permitted. Rows are L2-normalized on load, so cosine
similarity reduces to a dot product.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMB1_MAGIC = b"EMB1"


class EmbeddingFormatError(ValueError):
    """Raised when an EMB1 file fails validation."""


@dataclass
class EmbeddingIndex:
    """Unit-normalized embedding rows aligned to corpus line order."""

    vectors: np.ndarray  # (count, dim) float64, unit rows

    def __post_init__(self) -> None:
        self._mean_cos_cache: dict[int, np.ndarray] = {}

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def neighborhood_mean_cos(self, k: int) -> np.ndarray:
        """Mean cosine of each row to its k nearest neighbors (self excluded)."""
        cached = self._mean_cos_cache.get(k)
        if cached is not None:
            return cached
        _check_k(self, k)
        n = self.count
        means = np.empty(n, dtype=np.float64)
        chunk = max(1, min(n, 4_000_000 // max(n, 1) + 1))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            dots = self.vectors[start:stop] @ self.vectors.T  # (chunk, n)
            rows = np.arange(start, stop)
            dots[np.arange(stop - start), rows] = -np.inf  # exclude self
            if k < n - 1:
                top = np.partition(dots, n - k, axis=1)[:, n - k:]
            else:
                top = np.where(np.isfinite(dots), dots, 0.0)
                means[start:stop] = top.sum(axis=1) / k
                continue
            means[start:stop] = top.mean(axis=1)
        self._mean_cos_cache[k] = means
        return means


def load_embeddings(path: str | Path) -> EmbeddingIndex:
    """Read and validate an EMB1 file; rows are L2-normalized in place."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != EMB1_MAGIC:
        raise EmbeddingFormatError(f"bad magic in {path}: expected {EMB1_MAGIC!r}")
    n, d = struct.unpack("<II", raw[4:12])
    if n == 0 or d == 0:
        raise EmbeddingFormatError(f"degenerate shape n={n}, d={d} in {path}")
    expected = 12 + 4 * n * d
    if len(raw) != expected:
        raise EmbeddingFormatError(
            f"truncated or oversized payload in {path}: {len(raw)} bytes, expected {expected}"
        )
    vectors = np.frombuffer(raw, dtype="<f4", offset=12).astype(np.float64).reshape(n, d)
    norms = np.linalg.norm(vectors, axis=1)
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise EmbeddingFormatError(f"zero-norm vector at row {int(zero_rows[0])} in {path}")
    return EmbeddingIndex(vectors=vectors / norms[:, None])


def write_embeddings(path: str | Path, vectors: np.ndarray) -> None:
    """Write a (n, d) float array in the EMB1 layout. Rows need not be normalized."""
    arr = np.asarray(vectors, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise EmbeddingFormatError(f"embedding matrix must be non-empty 2-D, got shape {arr.shape}")
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(arr.astype("<f4").tobytes(order="C"))


@dataclass(frozen=True)
class NeighborSet:
    """Nearest neighbors of one query row, descending cosine, self excluded."""

    query_id: int
    entries: tuple[tuple[int, float], ...]


def _check_k(index: EmbeddingIndex, k: int) -> None:
    if not 1 <= k <= index.count - 1:
        raise ValueError(f"k out of range: k={k}, valid range is [1, {index.count - 1}]")


def knn(index: EmbeddingIndex, query_id: int, k: int) -> NeighborSet:
    """Exact brute-force cosine ranking; ties broken by ascending neighbor id."""
    if not 0 <= query_id < index.count:
        raise ValueError(f"query_id {query_id} out of range [0, {index.count})")
    _check_k(index, k)
    dots = index.vectors @ index.vectors[query_id]
    ids = np.arange(index.count)
    keep = ids != query_id
    dots, ids = dots[keep], ids[keep]
    order = np.lexsort((ids, -dots))[:k]
    entries = tuple((int(ids[i]), float(dots[i])) for i in order)
    return NeighborSet(query_id=query_id, entries=entries)


def margin_score(index: EmbeddingIndex, a: int, b: int, k: int) -> float:
    """Ratio margin: cos(a, b) over the mean cosine of both k-neighborhoods.

    margin(a, b) = cos(a, b) / (sum_{z in NN_k(a)} cos(a, z) / (2k)
                               + sum_{z in NN_k(b)} cos(b, z) / (2k))
    """
    if a == b:
        raise ValueError("margin_score requires two distinct ids")
    means = index.neighborhood_mean_cos(k)
    denominator = (means[a] + means[b]) / 2.0
    if denominator <= 0.0:
        raise ValueError(f"degenerate neighborhood for pair ({a}, {b}): denominator {denominator} <= 0")
    cos_ab = float(index.vectors[a] @ index.vectors[b])
    return cos_ab / float(denominator)


def select_neighbor(
    index: EmbeddingIndex,
    anchor: int,
    k: int,
    margin_threshold: float,
    rng: np.random.Generator,
) -> int | None:
    """Uniformly pick one k-nearest neighbor whose margin reaches the threshold.

    Returns None when no neighbor qualifies. Candidates whose margin
    denominator is degenerate are treated as unqualified.
    """
    neighbors = knn(index, anchor, k)
    qualified = []
    for neighbor_id, _ in neighbors.entries:
        try:
            margin = margin_score(index, anchor, neighbor_id, k)
        except ValueError:
            continue
        if margin >= margin_threshold:
            qualified.append(neighbor_id)
    if not qualified:
        return None
    return qualified[int(rng.integers(len(qualified)))]
