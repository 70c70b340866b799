"""Pluggable embedders.

Production deployments plug a real visual/text encoder; the feature-hashing
embedder below is the deterministic stand-in used by tests and fixtures.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np

from .tokenization import tokenize

DEFAULT_DIMENSION = 64


@runtime_checkable
class Embedder(Protocol):
    """Maps text / image references to unit vectors of a fixed dimension."""

    dimension: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_token(self, token: str) -> np.ndarray: ...

    def embed_image(self, image_ref: str) -> np.ndarray: ...

    def embed_image_bytes(self, data: bytes) -> np.ndarray: ...


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec, dtype=np.float32)
        out[0] = 1.0
        return out
    return (vec / norm).astype(np.float32)


class HashingEmbedder:
    """Deterministic feature-hashing embedder.

    Each token hashes (sha256, stable across processes) into a handful of
    signed buckets; text embeddings sum token vectors and normalize. No
    semantics, but identical strings always map to identical unit vectors,
    which is all the tests need.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, buckets_per_token: int = 4):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.dimension = dimension
        self.buckets_per_token = buckets_per_token

    def embed_token(self, token: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float32)
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        for i in range(self.buckets_per_token):
            chunk = digest[4 * i : 4 * i + 4]
            value = int.from_bytes(chunk, "little")
            bucket = value % self.dimension
            sign = 1.0 if (value >> 31) & 1 else -1.0
            vec[bucket] += sign
        return l2_normalize(vec)

    def embed_text(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return l2_normalize(np.zeros(self.dimension, dtype=np.float32))
        acc = np.zeros(self.dimension, dtype=np.float32)
        for tok in tokens:
            acc += self.embed_token(tok)
        return l2_normalize(acc)

    def embed_image(self, image_ref: str) -> np.ndarray:
        # Toy: an image is identified by its reference string only.
        return self.embed_token("img::" + image_ref)

    def embed_image_bytes(self, data: bytes) -> np.ndarray:
        return self.embed_token("imgbytes::" + hashlib.sha256(data).hexdigest())
