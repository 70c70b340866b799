"""Exact cosine vector index over product embeddings.

The index is a contiguous float32 matrix scanned exactly (no ANN); at desk
scale (<= ~100k items) a matmul beats any approximate structure and keeps
results oracle-checkable. Rebuilds produce a fresh immutable index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .catalog import ProductRecord
from .embedding import l2_normalize

MAGIC = b"LKVX"
FORMAT_VERSION = 1


class RetrievalError(Exception):
    pass


class DimensionMismatchError(RetrievalError):
    pass


class EmptyIndexError(RetrievalError):
    pass


class MatchLevel(str, Enum):
    IDENTICAL = "Identical"
    SIMILAR = "Similar"
    NONE = "None"


@dataclass(frozen=True)
class MatchThresholds:
    tau_identical: float = 0.85
    tau_similar: float = 0.70

    def __post_init__(self) -> None:
        for name, value in (("tau_identical", self.tau_identical), ("tau_similar", self.tau_similar)):
            if not (0.0 < value <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.tau_identical < self.tau_similar:
            raise ValueError("tau_identical must be >= tau_similar")

    def classify(self, score: float) -> MatchLevel:
        if score >= self.tau_identical:
            return MatchLevel.IDENTICAL
        if score >= self.tau_similar:
            return MatchLevel.SIMILAR
        return MatchLevel.NONE


@dataclass(frozen=True)
class RetrievalResult:
    product_id: str
    score: float
    match_level: MatchLevel


@dataclass(frozen=True)
class CategoryPrediction:
    category_id: str
    confidence: float


class VectorIndex:
    """Immutable (id, unit vector) index; optionally carries category labels."""

    def __init__(
        self,
        dimension: int,
        ids: Sequence[str],
        matrix: np.ndarray,
        labels: Sequence[str] | None = None,
    ):
        if matrix.shape != (len(ids), dimension):
            raise DimensionMismatchError(
                f"matrix shape {matrix.shape} != ({len(ids)}, {dimension})"
            )
        if labels is not None and len(labels) != len(ids):
            raise RetrievalError("labels must align with ids")
        self.dimension = dimension
        self.ids: tuple[str, ...] = tuple(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.labels: tuple[str, ...] | None = tuple(labels) if labels is not None else None

    def __len__(self) -> int:
        return len(self.ids)


def build_index(products: Iterable[ProductRecord], dimension: int) -> VectorIndex:
    """Index the first embedding of each product, iteration order preserved.

    Products without embeddings are skipped; a wrong-dimension embedding is
    an error naming the offending product.
    """
    ids: list[str] = []
    labels: list[str] = []
    rows: list[np.ndarray] = []
    for product in products:
        if not product.image_embeddings:
            continue
        vec = np.asarray(product.image_embeddings[0], dtype=np.float32)
        if vec.shape != (dimension,):
            raise DimensionMismatchError(
                f"product {product.id!r} has embedding dimension {vec.shape[0]}, expected {dimension}"
            )
        ids.append(product.id)
        labels.append(product.category_id)
        rows.append(l2_normalize(vec))
    matrix = np.vstack(rows) if rows else np.zeros((0, dimension), dtype=np.float32)
    return VectorIndex(dimension, ids, matrix, labels)


def _check_query(index: VectorIndex, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float32)
    if query.shape != (index.dimension,):
        raise DimensionMismatchError(
            f"query dimension {query.shape} != ({index.dimension},)"
        )
    # Cosine needs a unit query; normalizing here also gives scale-invariant
    # ranking for callers that pass unnormalized vectors.
    return l2_normalize(query)


def _top_k_order(index: VectorIndex, scores: np.ndarray, k: int) -> np.ndarray:
    # Sort by score descending, ties by ascending product id.
    ids_arr = np.asarray(index.ids)
    order = np.lexsort((ids_arr, -scores))
    return order[:k]


def search(
    index: VectorIndex,
    query: np.ndarray,
    k: int,
    thresholds: MatchThresholds,
    category: str | None = None,
) -> list[RetrievalResult]:
    """Top-k exact cosine search with match-level classification.

    ``category`` optionally restricts candidates to one label (config option,
    off by default at the pipeline level).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query = _check_query(index, query)
    if len(index) == 0:
        return []
    # float32 rounding can push a self-match a hair past 1.0; scores are
    # documented to stay in [-1, 1]
    scores = np.clip(index.matrix @ query, -1.0, 1.0)
    if category is not None:
        if index.labels is None:
            raise RetrievalError("index has no labels; cannot filter by category")
        mask = np.asarray([lbl == category for lbl in index.labels])
        scores = np.where(mask, scores, -np.inf)
    order = _top_k_order(index, scores, k)
    results = []
    for idx in order:
        score = float(scores[idx])
        if score == -np.inf:
            continue
        results.append(
            RetrievalResult(
                product_id=index.ids[idx],
                score=score,
                match_level=thresholds.classify(score),
            )
        )
    return results


def search_batch(
    index: VectorIndex,
    queries: np.ndarray,
    k: int,
    thresholds: MatchThresholds,
) -> list[list[RetrievalResult]]:
    """Vectorized variant of :func:`search` for many queries at once."""
    queries = np.asarray(queries, dtype=np.float32)
    if queries.ndim != 2 or queries.shape[1] != index.dimension:
        raise DimensionMismatchError(
            f"queries shape {queries.shape} incompatible with dimension {index.dimension}"
        )
    if len(index) == 0:
        return [[] for _ in range(queries.shape[0])]
    norms = np.linalg.norm(queries, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    all_scores = np.clip((queries / norms) @ index.matrix.T, -1.0, 1.0)
    out: list[list[RetrievalResult]] = []
    for row in all_scores:
        order = _top_k_order(index, row, k)
        out.append(
            [
                RetrievalResult(
                    product_id=index.ids[i],
                    score=float(row[i]),
                    match_level=thresholds.classify(float(row[i])),
                )
                for i in order
            ]
        )
    return out


def predict_category(
    query: np.ndarray,
    index: VectorIndex,
    k: int = 5,
) -> CategoryPrediction:
    """Majority vote over the k nearest labeled neighbors.

    Confidence is the winning vote fraction; ties break by highest summed
    similarity, then lexicographic category id, so the prediction is
    deterministic.
    """
    if index.labels is None:
        raise RetrievalError("index has no labels")
    if len(index) == 0:
        raise EmptyIndexError("cannot predict category with an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = _check_query(index, query)
    scores = index.matrix @ query
    order = _top_k_order(index, scores, k)
    votes: dict[str, int] = {}
    sims: dict[str, float] = {}
    for idx in order:
        label = index.labels[idx]
        votes[label] = votes.get(label, 0) + 1
        sims[label] = sims.get(label, 0.0) + float(scores[idx])
    winner = min(votes, key=lambda c: (-votes[c], -sims[c], c))
    return CategoryPrediction(category_id=winner, confidence=votes[winner] / len(order))


# ---------------------------------------------------------------------------
# Binary sidecar persistence
# ---------------------------------------------------------------------------
#
# Layout (all little-endian):
#   magic "LKVX" | version u32 | dim u32 | count u64 | flags u32 (bit0 = labels)
#   count * (u32 byte-length + utf-8 id)
#   [count * (u32 byte-length + utf-8 label)]   when flag bit0 set
#   count * dim * float32 vectors


def save_index(index: VectorIndex, path: str) -> None:
    flags = 1 if index.labels is not None else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQI", FORMAT_VERSION, index.dimension, len(index), flags))
        for pid in index.ids:
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        if index.labels is not None:
            for label in index.labels:
                raw = label.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
        fh.write(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())


def load_index(path: str) -> VectorIndex:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise RetrievalError(f"{path!r} is not an index file (bad magic {magic!r})")
        version, dim, count, flags = struct.unpack("<IIQI", fh.read(20))
        if version != FORMAT_VERSION:
            raise RetrievalError(f"unsupported index format version {version}")

        def read_strings(n: int) -> list[str]:
            out = []
            for _ in range(n):
                (length,) = struct.unpack("<I", fh.read(4))
                out.append(fh.read(length).decode("utf-8"))
            return out

        ids = read_strings(count)
        labels = read_strings(count) if flags & 1 else None
        raw = fh.read(count * dim * 4)
        matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
    return VectorIndex(dim, ids, matrix.astype(np.float32), labels)
