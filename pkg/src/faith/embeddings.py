"""Relation-label embedding providers.

The scoring code only needs ``cosine(a, b)``; providers with a dense vector
table also expose ``vector(label)``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from functools import lru_cache
from typing import Mapping

import numpy as np

_TOKEN_SPLIT = re.compile(r"[\s_]+")


def inverse_label(label: str) -> str:
    return f"inverse of {label}"


class EmbeddingProvider:
    """Maps a relation label to a unit vector; identical labels give identical vectors."""

    def vector(self, label: str) -> np.ndarray:
        raise NotImplementedError

    def cosine(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return float(np.clip(self.vector(a) @ self.vector(b), -1.0, 1.0))


class TokenEmbedding(EmbeddingProvider):
    """Sparse bag-of-tokens vectors over lower-cased labels, L2-normalised.

    Offline fallback; labels with no shared token are orthogonal.
    """

    def __init__(self) -> None:
        self._cos = lru_cache(maxsize=65536)(self._cosine)

    @staticmethod
    def tokens(label: str) -> dict[str, float]:
        counts = Counter(t for t in _TOKEN_SPLIT.split(label.lower()) if t)
        norm = math.sqrt(sum(c * c for c in counts.values()))
        return {t: c / norm for t, c in counts.items()} if norm else {}

    def vector(self, label: str) -> dict[str, float]:  # type: ignore[override]
        return self.tokens(label)

    def _cosine(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        va, vb = self.tokens(a), self.tokens(b)
        if len(vb) < len(va):
            va, vb = vb, va
        dot = sum(w * vb.get(t, 0.0) for t, w in va.items())
        return max(-1.0, min(1.0, dot))

    def cosine(self, a: str, b: str) -> float:
        return self._cos(a, b)


class TableEmbedding(EmbeddingProvider):
    """Dense vectors from a label table; labels missing from it use ``fallback``.

    A pair is compared densely only when both labels are in the table, since
    dense and sparse vectors live in different spaces.
    """

    def __init__(
        self,
        table: Mapping[str, tuple[float, ...] | np.ndarray],
        fallback: EmbeddingProvider | None = None,
    ):
        self._vecs: dict[str, np.ndarray] = {}
        for label, vec in table.items():
            arr = np.asarray(vec, dtype=np.float64)
            norm = np.linalg.norm(arr)
            if norm == 0:
                raise ValueError(f"zero embedding for {label!r}")
            self._vecs[label] = arr / norm
        self.fallback = fallback or TokenEmbedding()

    def __contains__(self, label: str) -> bool:
        return label in self._vecs

    def vector(self, label: str) -> np.ndarray:
        return self._vecs[label]

    def cosine(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        if a in self._vecs and b in self._vecs:
            return float(np.clip(self._vecs[a] @ self._vecs[b], -1.0, 1.0))
        return self.fallback.cosine(a, b)


def provider_for(graph) -> EmbeddingProvider:
    """Default provider for a graph: its stored table if any, else token vectors."""
    if graph.embeddings:
        return TableEmbedding(graph.embeddings)
    return TokenEmbedding()
