"""Online listing pipeline: safety gate, category prediction, visual search,
attribute extraction, prompt assembly, streamed generation, draft persistence.

Fallbacks form a ladder: a missing category drops the template, a retrieval
miss drops the reference, an empty extraction demotes the variant; the chosen
variant is always the richest one whose inputs exist, and in the worst case
generation proceeds from the image alone.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .attributes import AttributeExtractor, AttributeTemplate
from .catalog import (
    CatalogStore,
    CategoryNode,
    DraftState,
    IllegalTransitionError,
    ListingDraft,
    NotFoundError,
)
from .embedding import Embedder
from .evaluation.metrics import lcs_length
from .evaluation.quality import QualityWeights, listing_features, quality_score
from .generation import (
    GeneratorFactory,
    SafetyPredicate,
    SafetyVerdict,
    StreamLimits,
    StreamOutcome,
    allow_all,
    generate_stream,
)
from .prompts import (
    GenerationContext,
    PromptTemplates,
    SERVING_TEMPLATES,
    build_generation_instruction,
    richest_variant,
)
from .retrieval import (
    CategoryPrediction,
    EmptyIndexError,
    MatchLevel,
    MatchThresholds,
    VectorIndex,
    predict_category,
    search,
)

STAGE_SAFETY = "safety"
STAGE_CATEGORY = "category"
STAGE_RETRIEVAL = "retrieval"
STAGE_EXTRACTION = "extraction"
STAGE_PROMPT = "prompt"
STAGE_GENERATION = "generation"

STAGE_ORDER = (
    STAGE_SAFETY,
    STAGE_CATEGORY,
    STAGE_RETRIEVAL,
    STAGE_EXTRACTION,
    STAGE_PROMPT,
    STAGE_GENERATION,
)


class PipelineError(Exception):
    pass


class UnsafeImageError(PipelineError):
    """Input image rejected before any pipeline stage runs."""


class InvalidRequestError(PipelineError):
    pass


@dataclass
class RequestOptions:
    k: int | None = None
    tau_identical: float | None = None
    tau_similar: float | None = None
    max_chars: int | None = None
    template: list[str] | None = None  # template-chip override from the composer


@dataclass
class ListingRequest:
    request_id: str
    user_id: str
    image_ref: str
    image_embedding: np.ndarray | None = None
    image_bytes: bytes | None = None
    options: RequestOptions = field(default_factory=RequestOptions)

    def validate(self, dimension: int) -> None:
        has_embedding = self.image_embedding is not None
        has_bytes = self.image_bytes is not None
        if has_embedding == has_bytes:
            raise InvalidRequestError("exactly one of image_embedding/image_bytes required")
        if has_embedding and self.image_embedding.shape != (dimension,):
            raise InvalidRequestError(
                f"embedding dimension {self.image_embedding.shape} != ({dimension},)"
            )


@dataclass
class StageRecord:
    stage: str
    duration_ms: float
    outcome: str
    fallback_taken: bool = False


@dataclass
class PipelineTrace:
    stages: list[StageRecord] = field(default_factory=list)
    variant: str = ""
    instruction: str = ""

    def stage(self, name: str) -> StageRecord:
        for record in self.stages:
            if record.stage == name:
                return record
        raise KeyError(name)

    def overhead_ms(self) -> float:
        """Pipeline cost excluding the generator itself."""
        return sum(s.duration_ms for s in self.stages if s.stage != STAGE_GENERATION)

    def to_doc(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "instruction": self.instruction,
            "stages": [
                {
                    "stage": s.stage,
                    "duration_ms": round(s.duration_ms, 3),
                    "outcome": s.outcome,
                    "fallback_taken": s.fallback_taken,
                }
                for s in self.stages
            ],
        }


@dataclass
class PipelineResult:
    outcome: StreamOutcome
    trace: PipelineTrace
    draft_id: str


@dataclass
class AdoptionMetrics:
    draft_id: str
    published: bool
    retained_ratio: float | None = None
    quality: float | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "draft_id": self.draft_id,
            "published": self.published,
            "retained_ratio": self.retained_ratio,
            "quality_score": self.quality,
        }


@dataclass(frozen=True)
class PipelineConfig:
    thresholds: MatchThresholds = MatchThresholds()
    knn_k: int = 5
    search_k: int = 10
    category_min_confidence: float = 0.0
    category_filtered_search: bool = False
    limits: StreamLimits = StreamLimits()
    prompt_templates: PromptTemplates = SERVING_TEMPLATES
    latency_budget_ms: float = 50.0


ImageSafetyPredicate = Callable[[ListingRequest], SafetyVerdict]


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.start) * 1000.0
        return False


class ListingPipeline:
    def __init__(
        self,
        store: CatalogStore,
        index: VectorIndex,
        extractor: AttributeExtractor,
        backend_factory: GeneratorFactory,
        config: PipelineConfig | None = None,
        text_safety: SafetyPredicate = allow_all,
        image_safety: ImageSafetyPredicate | None = None,
        embedder: Embedder | None = None,
        classifier: Callable[[np.ndarray], CategoryPrediction | None] | None = None,
    ):
        self.store = store
        self.index = index
        self.extractor = extractor
        self.backend_factory = backend_factory
        self.config = config or PipelineConfig()
        self.text_safety = text_safety
        self.image_safety = image_safety or (lambda req: SafetyVerdict(allowed=True))
        self.embedder = embedder
        self._classifier = classifier

    def swap_index(self, index: VectorIndex) -> None:
        # Atomic by assignment; in-flight requests keep the old snapshot.
        self.index = index

    # -- stages --------------------------------------------------------

    def _predict_category(self, embedding: np.ndarray) -> CategoryPrediction | None:
        if self._classifier is not None:
            return self._classifier(embedding)
        try:
            prediction = predict_category(embedding, self.index, k=self.config.knn_k)
        except EmptyIndexError:
            return None
        if prediction.confidence < self.config.category_min_confidence:
            return None
        return prediction

    def _resolve_embedding(self, request: ListingRequest) -> np.ndarray:
        if request.image_embedding is not None:
            return np.asarray(request.image_embedding, dtype=np.float32)
        if self.embedder is None:
            raise InvalidRequestError("raw image bytes given but no embedder is plugged in")
        return self.embedder.embed_image_bytes(request.image_bytes)

    def run(
        self,
        request: ListingRequest,
        on_chunk: Callable[[str], None] | None = None,
        cancel: threading.Event | None = None,
    ) -> PipelineResult:
        request.validate(self.store.dimension)
        trace = PipelineTrace()

        # Input gate: nothing else runs for a rejected image.
        with _Timer() as t:
            verdict = self.image_safety(request)
        if not verdict.allowed:
            raise UnsafeImageError(verdict.reason or "image rejected")
        trace.stages.append(StageRecord(STAGE_SAFETY, t.ms, "ok"))

        embedding = self._resolve_embedding(request)

        with _Timer() as t:
            prediction = self._predict_category(embedding)
            node: CategoryNode | None = None
            if prediction is not None and prediction.category_id in self.store.taxonomy:
                node = self.store.taxonomy.get(prediction.category_id)
        trace.stages.append(
            StageRecord(
                STAGE_CATEGORY,
                t.ms,
                f"{node.id} ({prediction.confidence:.2f})" if node and prediction else "empty",
                fallback_taken=node is None,
            )
        )

        opts = request.options
        thresholds = self.config.thresholds
        if opts.tau_identical is not None or opts.tau_similar is not None:
            thresholds = MatchThresholds(
                tau_identical=opts.tau_identical or thresholds.tau_identical,
                tau_similar=opts.tau_similar or thresholds.tau_similar,
            )
        with _Timer() as t:
            results = search(
                self.index,
                embedding,
                k=opts.k or self.config.search_k,
                thresholds=thresholds,
                category=(
                    node.id if node and self.config.category_filtered_search else None
                ),
            )
            best = None
            if results and results[0].match_level is not MatchLevel.NONE:
                best = results[0]
        trace.stages.append(
            StageRecord(
                STAGE_RETRIEVAL,
                t.ms,
                f"{best.match_level.value} {best.product_id} ({best.score:.3f})" if best else "empty",
                fallback_taken=best is None,
            )
        )

        template: AttributeTemplate | None = None
        if opts.template:
            template = AttributeTemplate(node.id if node else "custom", tuple(opts.template))
        elif node and node.attribute_template:
            template = AttributeTemplate(node.id, tuple(node.attribute_template))

        with _Timer() as t:
            refs = None
            if template and best is not None:
                reference = self.store.get_product(best.product_id)
                extracted = self.extractor.extract(reference.description, template)
                if extracted:
                    refs = extracted
                outcome = f"{len(extracted)} attributes" if extracted else "empty"
                fallback = not extracted
            else:
                outcome = "skipped"
                fallback = False
        trace.stages.append(StageRecord(STAGE_EXTRACTION, t.ms, outcome, fallback_taken=fallback))

        with _Timer() as t:
            ctx = GenerationContext(
                image_ref=request.image_ref,
                variant=richest_variant(template, refs),
                category=node,
                template=template,
                reference_attrs=refs,
            )
            instruction = build_generation_instruction(ctx, self.config.prompt_templates)
        trace.variant = ctx.variant.value
        trace.instruction = instruction
        trace.stages.append(StageRecord(STAGE_PROMPT, t.ms, ctx.variant.value))

        draft = ListingDraft(
            user_id=request.user_id,
            state=DraftState.GENERATING,
            context_snapshot=ctx.snapshot(),
        )
        draft_id = self.store.save_draft(draft)

        limits = self.config.limits
        if opts.max_chars is not None:
            limits = StreamLimits(max_chars=opts.max_chars, timeout_seconds=limits.timeout_seconds)
        with _Timer() as t:
            outcome_stream = generate_stream(
                instruction,
                request.image_ref,
                backend=self.backend_factory(ctx),
                safety=self.text_safety,
                limits=limits,
                consumer=on_chunk,
                cancel=cancel,
            )
        trace.stages.append(StageRecord(STAGE_GENERATION, t.ms, outcome_stream.status.value))

        # The draft persists whatever was generated, even on degraded outcomes,
        # so the seller can always edit manually.
        draft.generated_text = outcome_stream.text
        draft.generation_status = outcome_stream.status.value
        draft.state = DraftState.DRAFT
        self.store.save_draft(draft)

        return PipelineResult(outcome=outcome_stream, trace=trace, draft_id=draft_id)

    # -- adoption --------------------------------------------------------

    def publish_draft(self, draft_id: str, final_text: str) -> AdoptionMetrics:
        draft = self.store.get_draft(draft_id)  # NotFoundError propagates
        if draft.state is not DraftState.DRAFT:
            raise IllegalTransitionError(
                f"draft {draft_id} is {draft.state.value}, only Draft can be published"
            )
        draft.final_text = final_text
        draft.state = DraftState.PUBLISHED
        draft.published_at = time.time()
        draft.retained_ratio = retained_ratio(draft.generated_text, final_text)
        snapshot = draft.context_snapshot or {}
        refs = snapshot.get("reference_attrs") or {}
        features = listing_features(
            description=final_text,
            attributes=refs,
            template_size=len(snapshot.get("template") or []) or None,
            category_known=bool(snapshot.get("category_id")),
            image_count=1,
        )
        draft.quality_score = quality_score(features, QualityWeights.uniform())
        self.store.save_draft(draft)  # validates the Draft -> Published transition
        return AdoptionMetrics(
            draft_id=draft_id,
            published=True,
            retained_ratio=draft.retained_ratio,
            quality=draft.quality_score,
        )


def retained_ratio(generated: str, final: str) -> float:
    """Character-level LCS of generated vs published text over generated length."""
    if not generated:
        return 0.0
    return lcs_length(generated, final) / len(generated)
