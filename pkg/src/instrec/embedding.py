"""Embedding backend interface, the hashed bag-of-words reference embedder,
and cosine similarity.

The reference embedder is deliberately simple: lowercase, whitespace-split,
hash each word with 64-bit FNV-1a into one of ``dim`` buckets, count, then
L2-normalize. It is pure, deterministic, dependency-free, and good enough at
fixture scale; production deployments swap in a neural embedder through the
same interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .exceptions import DegenerateEmbedding, DimensionMismatch, EmptyText, ZeroNorm

DEFAULT_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 1 << 64


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) % _U64
    return h


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Fixed-length real vector with its Euclidean norm cached."""

    values: np.ndarray
    norm: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding entries must be finite")
        actual = float(np.linalg.norm(self.values))
        if abs(actual - self.norm) > 1e-9 * max(1.0, abs(actual)):
            raise ValueError(f"cached norm {self.norm} != actual {actual}")

    @classmethod
    def of(cls, values: np.ndarray | list[float]) -> EmbeddingVector:
        arr = np.asarray(values, dtype=np.float64)
        return cls(values=arr, norm=float(np.linalg.norm(arr)))

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


class Embedder(Protocol):
    """Anything that turns text into a fixed-dimension embedding."""

    dimension: int

    def embed(self, text: str) -> EmbeddingVector: ...


class HashedBagEmbedder:
    """Deterministic reference embedder: FNV-1a hashed bag of words."""

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def bucket(self, word: str) -> int:
        return fnv1a_64(word.encode("utf-8")) % self.dimension

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyText("cannot embed empty text")
        words = text.lower().split()
        if not words:
            raise DegenerateEmbedding("text contains no words")
        counts = np.zeros(self.dimension, dtype=np.float64)
        for word in words:
            counts[self.bucket(word)] += 1.0
        return EmbeddingVector.of(counts / np.linalg.norm(counts))


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two embeddings, clamped to [-1, 1].

    Clamping guards threshold comparisons against floating-point overshoot.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(
            f"dimensions differ: {a.dimension} vs {b.dimension}"
        )
    if a.norm == 0.0 or b.norm == 0.0:
        raise ZeroNorm("cosine similarity undefined for zero-norm vectors")
    value = float(np.dot(a.values, b.values)) / (a.norm * b.norm)
    return max(-1.0, min(1.0, value))
