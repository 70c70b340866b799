"""listingkit: retrieval-augmented product listing toolkit.

Catalog storage, exact vector retrieval, attribute extraction, instruction
assembly, streaming generation, dataset construction and evaluation for
second-hand marketplace listing composition.
"""

__version__ = "0.1.0"

from .catalog import CatalogStore, CategoryNode, ListingDraft, ProductRecord, Taxonomy
from .embedding import Embedder, HashingEmbedder
from .pipeline import ListingPipeline, ListingRequest, PipelineConfig
from .retrieval import MatchThresholds, VectorIndex, build_index, search

__all__ = [
    "CatalogStore",
    "CategoryNode",
    "Embedder",
    "HashingEmbedder",
    "ListingDraft",
    "ListingPipeline",
    "ListingRequest",
    "MatchThresholds",
    "PipelineConfig",
    "ProductRecord",
    "Taxonomy",
    "VectorIndex",
    "build_index",
    "search",
    "__version__",
]
