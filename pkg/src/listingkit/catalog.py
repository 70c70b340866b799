"""Catalog store: product records, category taxonomy, listing drafts.

Backed by an embedded sqlite file (records stored as JSON documents keyed
by id) with an in-memory read cache, so the whole system runs without
external services. ``:memory:`` paths work for tests.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator

import numpy as np

from .embedding import DEFAULT_DIMENSION, l2_normalize

SCHEMA_VERSION = 1
NORM_TOLERANCE = 1e-6


class CatalogError(Exception):
    """Base class for catalog failures."""


class NotFoundError(CatalogError):
    pass


class IllegalTransitionError(CatalogError):
    pass


class InvariantViolationError(CatalogError):
    pass


class IngestError(CatalogError):
    """Fatal ingestion failure (unreadable source, bad taxonomy)."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class ProductRecord:
    id: str
    category_id: str
    description: str
    attributes: dict[str, str] = field(default_factory=dict)
    image_embeddings: list[np.ndarray] = field(default_factory=list)
    price: float | None = None
    image_count: int = 0
    video_count: int = 0
    sku_group: str | None = None   # fixture-only ground truth, never read at serving time
    spu_group: str | None = None

    def validate(self, dimension: int) -> None:
        if not self.id or not isinstance(self.id, str):
            raise InvariantViolationError("record id must be a nonempty string")
        if not isinstance(self.category_id, str):
            raise InvariantViolationError(f"{self.id}: category_id must be a string")
        for key in self.attributes:
            if not key:
                raise InvariantViolationError(f"{self.id}: attribute keys must be nonempty")
        for vec in self.image_embeddings:
            if vec.shape != (dimension,):
                raise InvariantViolationError(
                    f"{self.id}: embedding dimension {vec.shape} != ({dimension},)"
                )
        if self.price is not None and self.price < 0:
            raise InvariantViolationError(f"{self.id}: price must be nonnegative")
        if self.image_count < 0 or self.video_count < 0:
            raise InvariantViolationError(f"{self.id}: media counts must be nonnegative")

    def normalized(self, dimension: int) -> "ProductRecord":
        """Copy with every embedding L2-normalized to unit length."""
        self.validate(dimension)
        vecs = [l2_normalize(np.asarray(v, dtype=np.float32)) for v in self.image_embeddings]
        return ProductRecord(
            id=self.id,
            category_id=self.category_id,
            description=self.description,
            attributes=dict(self.attributes),
            image_embeddings=vecs,
            price=self.price,
            image_count=self.image_count,
            video_count=self.video_count,
            sku_group=self.sku_group,
            spu_group=self.spu_group,
        )

    def to_doc(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "category_id": self.category_id,
            "description": self.description,
            "attributes": self.attributes,
            "image_embeddings": [[float(x) for x in v] for v in self.image_embeddings],
            "price": self.price,
            "image_count": self.image_count,
            "video_count": self.video_count,
            "sku_group": self.sku_group,
            "spu_group": self.spu_group,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ProductRecord":
        if not isinstance(doc, dict):
            raise InvariantViolationError("record document must be a JSON object")
        try:
            return cls(
                id=doc["id"],
                category_id=doc["category_id"],
                description=doc.get("description", ""),
                attributes=dict(doc.get("attributes", {})),
                image_embeddings=[
                    np.asarray(v, dtype=np.float32) for v in doc.get("image_embeddings", [])
                ],
                price=doc.get("price"),
                image_count=int(doc.get("image_count", 0)),
                video_count=int(doc.get("video_count", 0)),
                sku_group=doc.get("sku_group"),
                spu_group=doc.get("spu_group"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantViolationError(f"bad record document: {exc}") from exc


@dataclass(frozen=True)
class CategoryNode:
    id: str
    name: str
    parent_id: str | None = None
    attribute_template: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.attribute_template)) != len(self.attribute_template):
            raise InvariantViolationError(
                f"category {self.id}: duplicate names in attribute template"
            )


class DraftState(str, Enum):
    GENERATING = "Generating"
    DRAFT = "Draft"
    PUBLISHED = "Published"
    ABANDONED = "Abandoned"


# Forward-only transition relation; same-state saves are updates, not transitions.
LEGAL_TRANSITIONS: frozenset[tuple[DraftState, DraftState]] = frozenset(
    {
        (DraftState.GENERATING, DraftState.DRAFT),
        (DraftState.DRAFT, DraftState.PUBLISHED),
        (DraftState.DRAFT, DraftState.ABANDONED),
    }
)


@dataclass
class ListingDraft:
    user_id: str
    generated_text: str = ""
    state: DraftState = DraftState.GENERATING
    draft_id: str = ""
    final_text: str | None = None
    context_snapshot: dict[str, Any] = field(default_factory=dict)
    generation_status: str = ""
    created_at: float = 0.0
    published_at: float | None = None
    quality_score: float | None = None
    retained_ratio: float | None = None

    def validate(self) -> None:
        has_final = self.final_text is not None
        if has_final != (self.state is DraftState.PUBLISHED):
            raise InvariantViolationError(
                "final_text must be present exactly when state is Published"
            )

    def to_doc(self) -> dict[str, Any]:
        doc = dict(self.__dict__)
        doc["state"] = self.state.value
        return doc

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ListingDraft":
        doc = dict(doc)
        doc["state"] = DraftState(doc["state"])
        return cls(**doc)


@dataclass
class CatalogStats:
    accepted: int = 0
    rejected: int = 0
    per_category: dict[str, int] = field(default_factory=dict)
    rejected_lines: list[tuple[int, str]] = field(default_factory=list)


@dataclass(frozen=True)
class IngestionConfig:
    dimension: int = DEFAULT_DIMENSION


# ---------------------------------------------------------------------------
# Taxonomy
# ---------------------------------------------------------------------------


class Taxonomy:
    """Forest of category nodes with per-category attribute templates."""

    def __init__(self, nodes: Iterable[CategoryNode]):
        self._nodes: dict[str, CategoryNode] = {}
        for node in nodes:
            if node.id in self._nodes:
                raise IngestError(f"duplicate category id {node.id!r}")
            self._nodes[node.id] = node
        self._check_forest()

    def _check_forest(self) -> None:
        for node in self._nodes.values():
            seen = {node.id}
            cur = node.parent_id
            while cur is not None:
                if cur in seen:
                    raise IngestError(f"taxonomy cycle through category {cur!r}")
                seen.add(cur)
                parent = self._nodes.get(cur)
                cur = parent.parent_id if parent else None

    def get(self, category_id: str) -> CategoryNode:
        node = self._nodes.get(category_id)
        if node is None:
            raise NotFoundError(f"unknown category {category_id!r}")
        return node

    def __contains__(self, category_id: str) -> bool:
        return category_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def ids(self) -> list[str]:
        return sorted(self._nodes)

    @classmethod
    def from_file(cls, path: str) -> "Taxonomy":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IngestError(f"cannot read taxonomy file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise IngestError(f"taxonomy file {path!r} is not valid JSON: {exc}") from exc
        nodes = [
            CategoryNode(
                id=item["id"],
                name=item.get("name", item["id"]),
                parent_id=item.get("parent_id"),
                attribute_template=tuple(item.get("attribute_template", ())),
            )
            for item in doc.get("categories", [])
        ]
        return cls(nodes)

    def to_doc(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "categories": [
                {
                    "id": n.id,
                    "name": n.name,
                    "parent_id": n.parent_id,
                    "attribute_template": list(n.attribute_template),
                }
                for n in self._nodes.values()
            ],
        }


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class CatalogStore:
    """Embedded store for products and drafts, safe for concurrent readers.

    Writes are serialized behind one lock; sqlite provides durability and
    the dict cache keeps reads lock-free for request handlers.
    """

    def __init__(self, path: str = ":memory:", dimension: int = DEFAULT_DIMENSION):
        self.path = path
        self.dimension = dimension
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS products (id TEXT PRIMARY KEY, doc TEXT NOT NULL)"
        )
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS drafts (draft_id TEXT PRIMARY KEY, doc TEXT NOT NULL)"
        )
        self._conn.commit()
        self._products: dict[str, ProductRecord] = {}
        self._drafts: dict[str, ListingDraft] = {}
        self._taxonomy: Taxonomy | None = None
        self._load_cache()

    def _load_cache(self) -> None:
        for (doc,) in self._conn.execute("SELECT doc FROM products"):
            record = ProductRecord.from_doc(json.loads(doc))
            self._products[record.id] = record
        for (doc,) in self._conn.execute("SELECT doc FROM drafts"):
            draft = ListingDraft.from_doc(json.loads(doc))
            self._drafts[draft.draft_id] = draft

    def close(self) -> None:
        self._conn.close()

    # -- taxonomy ----------------------------------------------------------

    def load_taxonomy(self, taxonomy: Taxonomy) -> None:
        self._taxonomy = taxonomy

    @property
    def taxonomy(self) -> Taxonomy:
        if self._taxonomy is None:
            raise IngestError("taxonomy not loaded")
        return self._taxonomy

    def get_category(self, category_id: str) -> CategoryNode:
        return self.taxonomy.get(category_id)

    # -- products ----------------------------------------------------------

    def upsert_product(self, record: ProductRecord) -> None:
        self.upsert_many([record])

    def upsert_many(self, records: Iterable[ProductRecord]) -> int:
        """Upsert a batch in one transaction; returns the number written."""
        normalized = [record.normalized(self.dimension) for record in records]
        with self._lock:
            self._conn.executemany(
                "INSERT INTO products (id, doc) VALUES (?, ?) "
                "ON CONFLICT(id) DO UPDATE SET doc = excluded.doc",
                [(r.id, json.dumps(r.to_doc())) for r in normalized],
            )
            self._conn.commit()
            for r in normalized:
                self._products[r.id] = r
        return len(normalized)

    def get_product(self, product_id: str) -> ProductRecord:
        record = self._products.get(product_id)
        if record is None:
            raise NotFoundError(f"unknown product {product_id!r}")
        return record

    def iter_products(self) -> Iterator[ProductRecord]:
        # Sorted for deterministic index builds.
        for pid in sorted(self._products):
            yield self._products[pid]

    def product_count(self) -> int:
        return len(self._products)

    # -- drafts ------------------------------------------------------------

    def save_draft(self, draft: ListingDraft) -> str:
        draft.validate()
        with self._lock:
            if not draft.draft_id:
                draft.draft_id = uuid.uuid4().hex
                draft.created_at = draft.created_at or time.time()
            else:
                prior = self._drafts.get(draft.draft_id)
                if prior is not None and prior.state is not draft.state:
                    if (prior.state, draft.state) not in LEGAL_TRANSITIONS:
                        raise IllegalTransitionError(
                            f"{prior.state.value} -> {draft.state.value} is not allowed"
                        )
            try:
                self._conn.execute(
                    "INSERT INTO drafts (draft_id, doc) VALUES (?, ?) "
                    "ON CONFLICT(draft_id) DO UPDATE SET doc = excluded.doc",
                    (draft.draft_id, json.dumps(draft.to_doc())),
                )
                self._conn.commit()
            except sqlite3.Error as exc:
                raise CatalogError(f"draft storage failure: {exc}") from exc
            self._drafts[draft.draft_id] = draft
            return draft.draft_id

    def get_draft(self, draft_id: str) -> ListingDraft:
        draft = self._drafts.get(draft_id)
        if draft is None:
            raise NotFoundError(f"unknown draft {draft_id!r}")
        # Copy so callers can stage mutations without bypassing the
        # transition check in save_draft.
        return ListingDraft.from_doc(json.loads(json.dumps(draft.to_doc())))


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def parse_record_line(line: str) -> ProductRecord:
    doc = json.loads(line)
    return ProductRecord.from_doc(doc)


def ingest_catalog(
    source: str,
    store: CatalogStore,
    config: IngestionConfig | None = None,
) -> CatalogStats:
    """Ingest a JSONL catalog file; upserts by id, so re-runs are idempotent.

    Malformed lines are skipped and counted with their 1-based line number;
    an unreadable file is fatal.
    """
    dimension = config.dimension if config else store.dimension
    stats = CatalogStats()
    try:
        fh = open(source, encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read catalog file {source!r}: {exc}") from exc
    batch: list[ProductRecord] = []
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = parse_record_line(line)
                record.validate(dimension)
            except (json.JSONDecodeError, InvariantViolationError) as exc:
                stats.rejected += 1
                stats.rejected_lines.append((lineno, str(exc)))
                continue
            batch.append(record)
            stats.accepted += 1
            stats.per_category[record.category_id] = (
                stats.per_category.get(record.category_id, 0) + 1
            )
    store.upsert_many(batch)
    return stats


def write_catalog_jsonl(records: Iterable[ProductRecord], path: str) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_doc(), ensure_ascii=False) + "\n")
            n += 1
    return n
