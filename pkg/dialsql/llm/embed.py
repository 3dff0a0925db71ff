"""Deterministic text embeddings via feature hashing, plus cosine similarity."""

from __future__ import annotations

from typing import Protocol

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from dialsql.core.errors import PreconditionError

EMBED_DIM = 256
# Allowed deviation from unit norm.
NORM_TOLERANCE = 1e-6


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Token uni/bi-gram feature hashing into ``dimension`` buckets, L2-normalized.

    Texts without word tokens fall back to character n-grams.
    """

    def __init__(self, dimension: int = EMBED_DIM) -> None:
        self.dimension = dimension
        self._words = HashingVectorizer(
            n_features=dimension,
            ngram_range=(1, 2),
            lowercase=True,
            alternate_sign=True,
            norm="l2",
            token_pattern=r"(?u)\b\w+\b",
        )
        self._chars = HashingVectorizer(
            n_features=dimension,
            analyzer="char_wb",
            ngram_range=(1, 3),
            alternate_sign=True,
            norm="l2",
        )

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            msg = "Cannot embed empty text."
            raise PreconditionError(msg)

        vector = self._words.transform([text]).toarray()[0]
        if not np.any(vector):
            vector = self._chars.transform([text]).toarray()[0]
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            msg = f"Text {text!r} produced no features."
            raise PreconditionError(msg)
        return (vector / norm).astype(np.float64)


_DEFAULT = HashingEmbedder()


def default_embed(text: str) -> np.ndarray:
    return _DEFAULT.embed(text)


def default_embedder() -> HashingEmbedder:
    return _DEFAULT


def cosine(left: np.ndarray, right: np.ndarray) -> float:
    """Cosine similarity of two unit vectors, clipped to [-1, 1]."""
    return float(np.clip(np.dot(left, right), -1.0, 1.0))


def is_unit(vector: np.ndarray) -> bool:
    return abs(float(np.linalg.norm(vector)) - 1.0) <= NORM_TOLERANCE
