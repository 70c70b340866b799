from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from listingkit.attributes import AttributeTemplate, ExtractionLexicon, RuleBasedExtractor
from listingkit.catalog import CatalogStore
from listingkit.embedding import HashingEmbedder
from listingkit.fixtures import make_fixture
from listingkit.generation import mock_backend_factory
from listingkit.pipeline import ListingPipeline
from listingkit.retrieval import build_index

PHONE_TEMPLATE = AttributeTemplate(
    "cellphone",
    ("Brand", "Model", "Storage Capacity", "Color", "Version", "Screen Condition"),
)

# Lexicon for the documented phone-extraction example: "light scratches" is
# deliberately not a known Screen Condition surface form, so that attribute
# stays absent on the canonical description.
PHONE_LEXICON_DOC = {
    "cellphone": {
        "Brand": {"values": ["Huawei", "Apple", "Xiaomi", "Samsung"]},
        "Model": {"values": ["Mate10Pro", "P30", "iPhone 11"]},
        "Storage Capacity": {"patterns": [r"\d+\+\d+G[Bb]?"]},
        "Color": {"values": ["Black", "Blue", "Silver"]},
        "Version": {"values": ["Mainland China", "Hong Kong", "International"]},
        "Screen Condition": {"values": ["screen in perfect condition", "no scratches"]},
    }
}

TABLE_DESCRIPTION = (
    "Huawei mate10Pro 6+64G completely original unrefurbished smartphone "
    "Mainland China version light scratches"
)


@pytest.fixture(scope="session")
def phone_lexicon() -> ExtractionLexicon:
    return ExtractionLexicon.from_doc(PHONE_LEXICON_DOC)


@pytest.fixture(scope="session")
def embedder() -> HashingEmbedder:
    return HashingEmbedder()


@pytest.fixture(scope="session")
def fixture_set():
    return make_fixture(seed=7)


@pytest.fixture()
def pipeline(fixture_set) -> ListingPipeline:
    store = CatalogStore(dimension=fixture_set.dimension)
    store.load_taxonomy(fixture_set.taxonomy)
    for product in fixture_set.products:
        store.upsert_product(product)
    index = build_index(store.iter_products(), fixture_set.dimension)
    return ListingPipeline(
        store=store,
        index=index,
        extractor=RuleBasedExtractor(fixture_set.lexicon),
        backend_factory=mock_backend_factory(),
    )
