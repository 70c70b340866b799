"""HTTP service for the listing pipeline.

POST /v1/listings:generate streams Server-Sent Events: ``chunk`` frames carry
UTF-8 text deltas as they leave the generator, one final ``trailer`` frame
carries {status, draft_id, trace}. Drafts publish via
POST /v1/drafts/{id}:publish and read back via GET /v1/drafts/{id}.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .attributes import ExtractionLexicon, RuleBasedExtractor
from .catalog import (
    CatalogStore,
    IllegalTransitionError,
    NotFoundError,
    Taxonomy,
    ingest_catalog,
)
from .embedding import DEFAULT_DIMENSION, HashingEmbedder
from .generation import (
    Blocklist,
    GenerationCancelled,
    StreamLimits,
    allow_all,
    http_backend_factory,
    mock_backend_factory,
)
from .pipeline import (
    InvalidRequestError,
    ListingPipeline,
    ListingRequest,
    PipelineConfig,
    RequestOptions,
)
from .prompts import PromptTemplates, SERVING_TEMPLATES
from .retrieval import MatchThresholds, build_index


class OptionsBody(BaseModel):
    k: int | None = None
    tau_identical: float | None = None
    tau_similar: float | None = None
    max_chars: int | None = None
    template: list[str] | None = None


class ListingRequestBody(BaseModel):
    request_id: str = ""
    user_id: str = "anonymous"
    image_ref: str
    image_embedding: list[float] | None = None
    image_b64: str | None = None
    options: OptionsBody = OptionsBody()


class PublishBody(BaseModel):
    final_text: str


def sse_frame(event: str, data: dict[str, Any]) -> str:
    return f"event: {event}\ndata: {json.dumps(data, ensure_ascii=False)}\n\n"


def _to_request(body: ListingRequestBody) -> ListingRequest:
    image_bytes = None
    if body.image_b64 is not None:
        import base64

        image_bytes = base64.b64decode(body.image_b64)
    return ListingRequest(
        request_id=body.request_id,
        user_id=body.user_id,
        image_ref=body.image_ref,
        image_embedding=(
            np.asarray(body.image_embedding, dtype=np.float32)
            if body.image_embedding is not None
            else None
        ),
        image_bytes=image_bytes,
        options=RequestOptions(
            k=body.options.k,
            tau_identical=body.options.tau_identical,
            tau_similar=body.options.tau_similar,
            max_chars=body.options.max_chars,
            template=body.options.template,
        ),
    )


def _event_stream(pipeline: ListingPipeline, request: ListingRequest):
    """Bridge the callback-style pipeline into an SSE generator.

    The pipeline runs in a worker thread; client disconnects close the
    generator, which flips the cancel event so generation stops within one
    chunk boundary.
    """
    events: queue.Queue = queue.Queue()
    cancel = threading.Event()

    def run() -> None:
        try:
            result = pipeline.run(
                request,
                on_chunk=lambda text: events.put(("chunk", {"text": text})),
                cancel=cancel,
            )
            events.put(
                (
                    "trailer",
                    {
                        "status": result.outcome.status.value,
                        "draft_id": result.draft_id,
                        "reason": result.outcome.reason,
                        "chunk_count": result.outcome.chunk_count,
                        "trace": result.trace.to_doc(),
                    },
                )
            )
        except GenerationCancelled:
            pass
        except Exception as exc:
            events.put(("trailer", {"status": "BackendError", "draft_id": "", "error": str(exc)}))
        finally:
            events.put(None)

    threading.Thread(target=run, daemon=True).start()
    try:
        while True:
            item = events.get()
            if item is None:
                break
            kind, data = item
            yield sse_frame(kind, data)
    finally:
        cancel.set()


def build_app(pipeline: ListingPipeline, ui_dist: str | None = None) -> FastAPI:
    app = FastAPI(title="listingkit", version="0.1.0")

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {
            "status": "ok",
            "products": pipeline.store.product_count(),
            "index_size": len(pipeline.index),
        }

    @app.post("/v1/listings:generate")
    def generate(body: ListingRequestBody):
        request = _to_request(body)
        try:
            request.validate(pipeline.store.dimension)
            verdict = pipeline.image_safety(request)
        except InvalidRequestError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if not verdict.allowed:
            # Rejected before any pipeline stage runs.
            raise HTTPException(
                status_code=400,
                detail={"error": "unsafe_image", "reason": verdict.reason},
            )
        return StreamingResponse(
            _event_stream(pipeline, request), media_type="text/event-stream"
        )

    @app.post("/v1/drafts/{draft_id}:publish")
    def publish(draft_id: str, body: PublishBody) -> dict[str, Any]:
        try:
            metrics = pipeline.publish_draft(draft_id, body.final_text)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except IllegalTransitionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return metrics.to_doc()

    @app.get("/v1/drafts/{draft_id}")
    def get_draft(draft_id: str) -> dict[str, Any]:
        try:
            draft = pipeline.store.get_draft(draft_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return draft.to_doc()

    if ui_dist and os.path.isdir(ui_dist):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")

    return app


# ---------------------------------------------------------------------------
# Service assembly from a config file
# ---------------------------------------------------------------------------


@dataclass
class ServiceConfig:
    store_path: str = ":memory:"
    catalog_path: str | None = None
    taxonomy_path: str | None = None
    lexicon_path: str | None = None
    prompt_templates_path: str | None = None
    blocklist: list[str] = field(default_factory=list)
    dimension: int = DEFAULT_DIMENSION
    tau_identical: float = 0.85
    tau_similar: float = 0.70
    knn_k: int = 5
    search_k: int = 10
    category_min_confidence: float = 0.0
    category_filtered_search: bool = False
    max_chars: int = 1200
    timeout_seconds: float = 3.0
    latency_budget_ms: float = 50.0
    backend: str = "mock"  # "mock" | "http"
    ui_dist: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def build_service(config: ServiceConfig) -> tuple[FastAPI, ListingPipeline]:
    store = CatalogStore(config.store_path, dimension=config.dimension)
    if config.taxonomy_path:
        store.load_taxonomy(Taxonomy.from_file(config.taxonomy_path))
    if config.catalog_path:
        ingest_catalog(config.catalog_path, store)
    index = build_index(store.iter_products(), config.dimension)
    lexicon = (
        ExtractionLexicon.from_file(config.lexicon_path)
        if config.lexicon_path
        else ExtractionLexicon({})
    )
    templates = (
        PromptTemplates.from_file(config.prompt_templates_path)
        if config.prompt_templates_path
        else SERVING_TEMPLATES
    )
    backend_factory = (
        http_backend_factory() if config.backend == "http" else mock_backend_factory()
    )
    pipeline = ListingPipeline(
        store=store,
        index=index,
        extractor=RuleBasedExtractor(lexicon),
        backend_factory=backend_factory,
        config=PipelineConfig(
            thresholds=MatchThresholds(config.tau_identical, config.tau_similar),
            knn_k=config.knn_k,
            search_k=config.search_k,
            category_min_confidence=config.category_min_confidence,
            category_filtered_search=config.category_filtered_search,
            limits=StreamLimits(config.max_chars, config.timeout_seconds),
            prompt_templates=templates,
            latency_budget_ms=config.latency_budget_ms,
        ),
        text_safety=Blocklist(config.blocklist) if config.blocklist else allow_all,
        embedder=HashingEmbedder(config.dimension),
    )
    return build_app(pipeline, ui_dist=config.ui_dist), pipeline
