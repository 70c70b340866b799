"""Deterministic synthetic fixtures: catalog, taxonomy, lexicon, query sets.

Embeddings are drawn around per-category centroids so category k-NN and
identical-product retrieval behave like the real system: each query vector
sits a small perturbation away from its catalog twin, whose description
carries the query's gold attribute values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .attributes import ExtractedAttributes, ExtractionLexicon
from .catalog import CategoryNode, ProductRecord, Taxonomy
from .embedding import DEFAULT_DIMENSION, l2_normalize

_CATEGORY_PROFILES: dict[str, dict] = {
    "cellphone": {
        "name": "cell phone",
        "template": ("Brand", "Model", "Storage Capacity", "Color", "Version", "Screen Condition"),
        "pools": {
            "Brand": ("Huawei", "Apple", "Xiaomi", "Samsung", "Oppo"),
            "Model": ("Mate10pro", "P30", "iPhone 11", "iPhone 12", "Mi9", "GalaxyS10", "Reno4"),
            "Storage Capacity": ("6+64GB", "8+128GB", "4+64GB", "6+128GB", "12+256GB"),
            "Color": ("Obsidian", "Aurora", "Graphite", "Starlight", "Emerald"),
            "Version": ("Mainland China", "Hong Kong", "International"),
            "Screen Condition": ("flawless screen", "light scratches", "minor wear"),
        },
    },
    "laptop": {
        "name": "laptop",
        "template": ("Brand", "Model", "RAM", "Storage", "Screen Size", "Condition"),
        "pools": {
            "Brand": ("Lenovo", "Dell", "Asus", "Acer", "Macbook"),
            "Model": ("ThinkpadX1", "XPS13", "Zenbook14", "SwiftGo", "AirM1"),
            "RAM": ("8GB RAM", "16GB RAM", "32GB RAM"),
            "Storage": ("256GB SSD", "512GB SSD", "1TB SSD"),
            "Screen Size": ("13.3 inch", "14 inch", "15.6 inch"),
            "Condition": ("barely used", "well kept", "visible wear"),
        },
    },
    "sneakers": {
        "name": "sneakers",
        "template": ("Brand", "Model", "Size", "Color", "Condition"),
        "pools": {
            "Brand": ("Nike", "Adidas", "Puma", "NewBalance"),
            "Model": ("AirZoom", "Ultraboost", "Suede Classic", "NB530"),
            "Size": ("EU 40", "EU 41", "EU 42", "EU 43", "EU 44"),
            "Color": ("Crimson", "Navy", "Ivory", "Charcoal"),
            "Condition": ("worn twice", "gently used", "brand new in box"),
        },
    },
}

_CAPACITY_PATTERN = r"\d+\+\d+G[Bb]?"


@dataclass
class QueryCase:
    query_id: str
    image_ref: str
    embedding: np.ndarray
    category_id: str
    gold_description: str
    gold_attributes: ExtractedAttributes
    twin_id: str


@dataclass
class FixtureSet:
    dimension: int
    taxonomy: Taxonomy
    lexicon: ExtractionLexicon
    products: list[ProductRecord] = field(default_factory=list)
    queries: list[QueryCase] = field(default_factory=list)


def fixture_taxonomy() -> Taxonomy:
    nodes = [CategoryNode(id="root", name="all", parent_id=None, attribute_template=())]
    for cat_id, profile in _CATEGORY_PROFILES.items():
        nodes.append(
            CategoryNode(
                id=cat_id,
                name=profile["name"],
                parent_id="root",
                attribute_template=tuple(profile["template"]),
            )
        )
    return Taxonomy(nodes)


def fixture_lexicon_doc() -> dict:
    doc: dict = {}
    for cat_id, profile in _CATEGORY_PROFILES.items():
        section = {}
        for attr, values in profile["pools"].items():
            entry: dict = {"values": list(values)}
            if attr == "Storage Capacity":
                entry["patterns"] = [_CAPACITY_PATTERN]
            section[attr] = entry
        doc[cat_id] = section
    return doc


def fixture_lexicon() -> ExtractionLexicon:
    return ExtractionLexicon.from_doc(fixture_lexicon_doc())


def _catalog_description(category_name: str, values: dict[str, str]) -> str:
    joined = " ".join(values.values())
    return (
        f"Personal used {category_name} {joined}, bought a while ago, "
        f"works great, condition as shown in the pictures, contact me if interested."
    )


def _gold_description(values: dict[str, str]) -> str:
    joined = " ".join(values.values())
    return (
        f"Selling my {joined}, condition as shown in the pictures, "
        f"no repairs, contact me if interested."
    )


def make_fixture(
    seed: int = 7,
    dimension: int = DEFAULT_DIMENSION,
    products_per_category: int = 60,
    queries_per_category: int = 10,
    noise_scale: float = 0.35,
    query_perturbation: float = 0.05,
) -> FixtureSet:
    """Clustered catalog plus queries whose nearest neighbor is a known twin."""
    rng = np.random.default_rng(seed)
    taxonomy = fixture_taxonomy()
    lexicon = fixture_lexicon()
    fixture = FixtureSet(dimension=dimension, taxonomy=taxonomy, lexicon=lexicon)

    for cat_index, (cat_id, profile) in enumerate(_CATEGORY_PROFILES.items()):
        centroid = l2_normalize(rng.normal(size=dimension).astype(np.float32))
        pools: dict[str, tuple[str, ...]] = profile["pools"]
        for i in range(products_per_category):
            values = {attr: pool[int(rng.integers(len(pool)))] for attr, pool in pools.items()}
            vec = l2_normalize(centroid + noise_scale * rng.normal(size=dimension).astype(np.float32))
            pid = f"p{cat_index:02d}{i:04d}"
            is_query_twin = i < queries_per_category
            record = ProductRecord(
                id=pid,
                category_id=cat_id,
                description=_catalog_description(profile["name"], values),
                attributes=dict(values),
                image_embeddings=[vec],
                price=float(rng.integers(20, 2000)),
                image_count=int(rng.integers(1, 6)),
                video_count=int(rng.integers(0, 2)),
                sku_group=f"sku-{pid}" if is_query_twin else None,
            )
            fixture.products.append(record)
            if is_query_twin:
                q_vec = l2_normalize(
                    vec + query_perturbation * rng.normal(size=dimension).astype(np.float32)
                )
                qid = f"q{cat_index:02d}{i:04d}"
                fixture.queries.append(
                    QueryCase(
                        query_id=qid,
                        image_ref=f"fixture://{qid}.jpg",
                        embedding=q_vec,
                        category_id=cat_id,
                        gold_description=_gold_description(values),
                        gold_attributes=ExtractedAttributes(category_id=cat_id, values=dict(values)),
                        twin_id=pid,
                    )
                )
    return fixture


def random_unit_vectors(count: int, dimension: int, seed: int = 0) -> np.ndarray:
    """Unstructured unit vectors for scale/exactness checks."""
    rng = np.random.default_rng(seed)
    mat = rng.normal(size=(count, dimension)).astype(np.float32)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return mat / norms


def bulk_products(count: int, dimension: int, seed: int = 0) -> list[ProductRecord]:
    """Large flat catalog (random unit embeddings) for scale tests."""
    cats = sorted(_CATEGORY_PROFILES)
    mat = random_unit_vectors(count, dimension, seed)
    return [
        ProductRecord(
            id=f"b{i:06d}",
            category_id=cats[i % len(cats)],
            description=f"bulk item {i}",
            image_embeddings=[mat[i]],
        )
        for i in range(count)
    ]


def export_fixture_files(fixture: FixtureSet, out_dir: str) -> dict[str, str]:
    """Write catalog/taxonomy/lexicon/query files for the CLI and the UI."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "catalog": os.path.join(out_dir, "catalog.jsonl"),
        "taxonomy": os.path.join(out_dir, "taxonomy.json"),
        "lexicon": os.path.join(out_dir, "lexicon.json"),
        "queries": os.path.join(out_dir, "queries.jsonl"),
        "ui_fixtures": os.path.join(out_dir, "fixtures.json"),
    }
    with open(paths["catalog"], "w", encoding="utf-8") as fh:
        for record in fixture.products:
            fh.write(json.dumps(record.to_doc(), ensure_ascii=False) + "\n")
    with open(paths["taxonomy"], "w", encoding="utf-8") as fh:
        json.dump(fixture.taxonomy.to_doc(), fh, ensure_ascii=False, indent=2)
    with open(paths["lexicon"], "w", encoding="utf-8") as fh:
        json.dump(fixture_lexicon_doc(), fh, ensure_ascii=False, indent=2)
    with open(paths["queries"], "w", encoding="utf-8") as fh:
        for q in fixture.queries:
            fh.write(
                json.dumps(
                    {
                        "query_id": q.query_id,
                        "image_ref": q.image_ref,
                        "embedding": [float(x) for x in q.embedding],
                        "category_id": q.category_id,
                        "gold_description": q.gold_description,
                        "gold_attributes": dict(q.gold_attributes.values),
                        "twin_id": q.twin_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    ui_entries = [
        {
            "name": f"{q.category_id} sample {i + 1}",
            "image_ref": q.image_ref,
            "embedding": [float(x) for x in q.embedding],
        }
        for i, q in enumerate(fixture.queries[:12])
    ]
    with open(paths["ui_fixtures"], "w", encoding="utf-8") as fh:
        json.dump(ui_entries, fh, ensure_ascii=False, indent=2)
    return paths
