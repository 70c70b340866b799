"""Corpus cleaning and instruction-dataset construction.

Cleaning applies five steps in a fixed order (quality score, risk tags,
image-text similarity, heuristic rules, stratified sampling); the first
failing step records the rejection and later steps never see the record.
Dataset building then turns surviving products into the three description
instruction variants with ChatML-ready dialog records.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .attributes import AttributeExtractor, AttributeTemplate
from .catalog import ProductRecord, Taxonomy
from .prompts import (
    DATASET_TEMPLATES,
    GenerationContext,
    InstructionRecord,
    PromptTemplates,
    Variant,
    build_generation_instruction,
    make_dialog,
)

DEFAULT_PRIVACY_PATTERNS = (
    r"1[3-9]\d{9}",            # mobile numbers
    r"https?://\S+|www\.\S+",  # URLs
    r"\d{17}[\dXx]",           # national id shapes
)

_BASIC_PUNCT = set(".,!?;:'\"()-+%&/…。，！？、：；（）~·")

STEP_QUALITY = "quality"
STEP_RISK = "risk"
STEP_IMG_TEXT = "img_text"
STEP_HEURISTIC = "heuristic"
STEP_SAMPLING = "sampling"

CLEANING_STEPS = (STEP_QUALITY, STEP_RISK, STEP_IMG_TEXT, STEP_HEURISTIC, STEP_SAMPLING)


@dataclass(frozen=True)
class CleaningConfig:
    min_quality_score: float = 0.25
    risk_tags_blocklist: frozenset[str] = frozenset(
        {"low_price_bait", "off_platform_traffic", "fraud_suspect"}
    )
    min_image_text_sim: float = 0.0
    min_len: int = 10
    max_len: int = 500
    privacy_patterns: tuple[str, ...] = DEFAULT_PRIVACY_PATTERNS
    special_char_ratio_max: float = 0.3
    per_category_cap: int = 1000

    def __post_init__(self) -> None:
        if self.min_len >= self.max_len:
            raise ValueError("min_len must be < max_len")
        for name in ("min_image_text_sim", "special_char_ratio_max"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.per_category_cap < 1:
            raise ValueError("per_category_cap must be >= 1")


@dataclass
class Scorers:
    """Pluggable record scorers; defaults keep every step in the pipeline
    while activating only the ones with real signal (image-text similarity
    passes through until a scorer is plugged in; risk tags come from the
    caller)."""

    quality_scorer: Callable[[ProductRecord], float] = lambda r: 1.0
    risk_tagger: Callable[[ProductRecord], set[str]] = lambda r: set()
    img_text_scorer: Callable[[ProductRecord], float] = lambda r: 1.0


@dataclass
class RejectionReport:
    input_count: int = 0
    accepted: int = 0
    rejections: dict[str, int] = field(
        default_factory=lambda: {step: 0 for step in CLEANING_STEPS}
    )
    reasons: dict[str, list[tuple[str, str]]] = field(default_factory=dict)

    def trail(self, record_id: str) -> list[tuple[str, str]]:
        return self.reasons.get(record_id, [])

    def check_conservation(self) -> bool:
        return self.accepted + sum(self.rejections.values()) == self.input_count

    def to_doc(self) -> dict:
        return {
            "input_count": self.input_count,
            "accepted": self.accepted,
            "rejections": dict(self.rejections),
        }


def _special_char_ratio(text: str) -> float:
    if not text:
        return 0.0
    special = sum(
        1 for ch in text if not (ch.isalnum() or ch.isspace() or ch in _BASIC_PUNCT)
    )
    return special / len(text)


def _heuristic_reason(record: ProductRecord, config: CleaningConfig) -> str | None:
    n = len(record.description)
    if n < config.min_len or n > config.max_len:
        return "length"
    for pattern in config.privacy_patterns:
        if re.search(pattern, record.description):
            return "privacy"
    if _special_char_ratio(record.description) > config.special_char_ratio_max:
        return "special_chars"
    return None


def stratified_sample(
    products: Sequence[ProductRecord],
    per_category_cap: int,
    seed: int,
) -> list[ProductRecord]:
    """Uniform per-category sample of at most ``cap`` records, seeded.

    Categories are visited in sorted order and records sorted by id before
    sampling, so a fixed seed reproduces the exact same sample.
    """
    if per_category_cap < 1:
        raise ValueError("per_category_cap must be >= 1")
    groups: dict[str, list[ProductRecord]] = {}
    for record in products:
        groups.setdefault(record.category_id, []).append(record)
    rng = random.Random(seed)
    chosen: list[ProductRecord] = []
    for category in sorted(groups):
        members = sorted(groups[category], key=lambda r: r.id)
        if len(members) <= per_category_cap:
            chosen.extend(members)
        else:
            chosen.extend(rng.sample(members, per_category_cap))
    return sorted(chosen, key=lambda r: r.id)


def clean_corpus(
    products: Sequence[ProductRecord],
    config: CleaningConfig,
    scorers: Scorers | None = None,
    seed: int = 0,
) -> tuple[list[ProductRecord], RejectionReport]:
    """Apply the five cleaning steps in order; returns survivors + report.

    The per-record reason trail lists every step that evaluated the record,
    ending at its first failure, which makes the step ordering auditable.
    """
    s = scorers or Scorers()
    report = RejectionReport(input_count=len(products))
    survivors: list[ProductRecord] = []
    for record in products:
        trail: list[tuple[str, str]] = []
        report.reasons[record.id] = trail

        if s.quality_scorer(record) < config.min_quality_score:
            trail.append((STEP_QUALITY, "fail:low_quality"))
            report.rejections[STEP_QUALITY] += 1
            continue
        trail.append((STEP_QUALITY, "pass"))

        tags = s.risk_tagger(record) & config.risk_tags_blocklist
        if tags:
            trail.append((STEP_RISK, f"fail:{sorted(tags)[0]}"))
            report.rejections[STEP_RISK] += 1
            continue
        trail.append((STEP_RISK, "pass"))

        if s.img_text_scorer(record) < config.min_image_text_sim:
            trail.append((STEP_IMG_TEXT, "fail:low_similarity"))
            report.rejections[STEP_IMG_TEXT] += 1
            continue
        trail.append((STEP_IMG_TEXT, "pass"))

        reason = _heuristic_reason(record, config)
        if reason is not None:
            trail.append((STEP_HEURISTIC, f"fail:{reason}"))
            report.rejections[STEP_HEURISTIC] += 1
            continue
        trail.append((STEP_HEURISTIC, "pass"))
        survivors.append(record)

    sampled = stratified_sample(survivors, config.per_category_cap, seed)
    sampled_ids = {r.id for r in sampled}
    for record in survivors:
        if record.id in sampled_ids:
            report.reasons[record.id].append((STEP_SAMPLING, "pass"))
        else:
            report.reasons[record.id].append((STEP_SAMPLING, "fail:sampled_out"))
            report.rejections[STEP_SAMPLING] += 1
    report.accepted = len(sampled)
    return sampled, report


# ---------------------------------------------------------------------------
# Instruction dataset construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetMix:
    """Fractions per instruction variant and per task family (each sums to 1)."""

    variants: dict[Variant, float] = field(
        default_factory=lambda: {
            Variant.IMAGE_ONLY: 1.0 / 3.0,
            Variant.IMAGE_TEMPLATE: 1.0 / 3.0,
            Variant.IMAGE_TEMPLATE_REFERENCE: 1.0 / 3.0,
        }
    )
    task_families: dict[str, float] = field(
        default_factory=lambda: {
            "description_generation": 1.0,
            "domain_understanding": 0.0,
            "general_qa": 0.0,
        }
    )

    def __post_init__(self) -> None:
        for axis_name, axis in (("variants", self.variants), ("task_families", self.task_families)):
            if any(v < 0 for v in axis.values()):
                raise ValueError(f"{axis_name}: fractions must be nonnegative")
            if abs(sum(axis.values()) - 1.0) > 1e-9:
                raise ValueError(f"{axis_name}: fractions must sum to 1")

    def draw_variant(self, rng: random.Random) -> Variant:
        x = rng.random()
        acc = 0.0
        for variant in (Variant.IMAGE_ONLY, Variant.IMAGE_TEMPLATE, Variant.IMAGE_TEMPLATE_REFERENCE):
            acc += self.variants.get(variant, 0.0)
            if x < acc:
                return variant
        return Variant.IMAGE_TEMPLATE_REFERENCE


@dataclass
class DatasetBuildReport:
    total: int = 0
    variant_counts: dict[str, int] = field(default_factory=dict)
    fallback_to_image_only: int = 0
    demoted_to_template: int = 0

    def to_doc(self) -> dict:
        return {
            "total": self.total,
            "variant_counts": dict(self.variant_counts),
            "fallback_to_image_only": self.fallback_to_image_only,
            "demoted_to_template": self.demoted_to_template,
        }


def product_image_ref(product: ProductRecord, index: int = 0) -> str:
    # Catalog records carry embeddings, not files; the opaque ref names the record.
    return f"catalog://{product.id}/{index}"


def build_instruction_dataset(
    products: Sequence[ProductRecord],
    mix: DatasetMix,
    extractor: AttributeExtractor,
    taxonomy: Taxonomy,
    templates: PromptTemplates = DATASET_TEMPLATES,
    seed: int = 0,
) -> tuple[list[InstructionRecord], DatasetBuildReport]:
    """Turn products into instruction dialogs, one per product.

    The drawn variant uses attribute extraction on the target description:
    extracted NAMES fill the template clause and (for the reference variant)
    extracted VALUES fill the reference clause; the assistant turn is the
    original user description. Products whose extraction or category cannot
    support the drawn variant demote to the richest variant still valid.
    """
    rng = random.Random(seed)
    report = DatasetBuildReport()
    records: list[InstructionRecord] = []
    for product in sorted(products, key=lambda r: r.id):
        drawn = mix.draw_variant(rng)
        node = taxonomy.get(product.category_id) if product.category_id in taxonomy else None
        category_template = (
            AttributeTemplate(node.id, tuple(node.attribute_template))
            if node and node.attribute_template
            else None
        )

        template = None
        refs = None
        variant = Variant.IMAGE_ONLY
        if drawn is not Variant.IMAGE_ONLY:
            if category_template is None:
                report.fallback_to_image_only += 1
            else:
                extracted = extractor.extract(product.description, category_template)
                if extracted:
                    template = AttributeTemplate(node.id, tuple(extracted.values.keys()))
                    if drawn is Variant.IMAGE_TEMPLATE_REFERENCE:
                        refs = extracted
                        variant = Variant.IMAGE_TEMPLATE_REFERENCE
                    else:
                        variant = Variant.IMAGE_TEMPLATE
                else:
                    # Nothing extracted: keep the template clause from the
                    # category's own template, variant capped at ImageTemplate.
                    template = category_template
                    variant = Variant.IMAGE_TEMPLATE
                    if drawn is Variant.IMAGE_TEMPLATE_REFERENCE:
                        report.demoted_to_template += 1

        ctx = GenerationContext(
            image_ref=product_image_ref(product),
            variant=variant,
            category=node,
            template=template,
            reference_attrs=refs,
        )
        instruction = build_generation_instruction(ctx, templates)
        records.append(
            make_dialog(
                user_text=instruction,
                assistant_text=product.description,
                image_ref=ctx.image_ref,
                task_tag="description_generation",
                source_id=product.id,
            )
        )
        report.total += 1
        report.variant_counts[variant.value] = report.variant_counts.get(variant.value, 0) + 1
    return records, report


# ---------------------------------------------------------------------------
# General QA scaffolding
# ---------------------------------------------------------------------------

GENERAL_QA_TASK_TYPES = (
    "image information description",
    "image emotion analysis",
    "image action recognition",
    "existence check of elements in the image",
    "image text extraction",
    "analysis of object interactions in the image",
    "object attribute recognition in the image",
    "image multiple-choice question answering",
    "visual reasoning",
    "visual common sense reasoning",
    "image style appreciation",
    "content creation based on the image",
    "writing product descriptions based on the image",
)


@dataclass(frozen=True)
class QaPromptConfig:
    task_types: tuple[str, ...] = GENERAL_QA_TASK_TYPES
    max_instructions: int = 20
    max_answer_words: int = 100
    per_task_cap: int = 3


def scaffold_general_qa(image_ref: str, config: QaPromptConfig | None = None) -> str:
    """Mega-prompt asking an external LLM for diverse QA pairs on one image."""
    cfg = config or QaPromptConfig()
    types = ", ".join(cfg.task_types)
    return (
        "Based on the given image, design multiple types of task questions and answers. "
        f"The task types include: {types}. "
        f"Below, provide up to {cfg.max_instructions} diverse instructions for all the above "
        "tasks, including different language styles and precise answers. The instructions "
        f"should include both questions and statements. Answers should be less than "
        f"{cfg.max_answer_words} words. Each task should have fewer than {cfg.per_task_cap} "
        "instructions. Output format:\n\n"
        "Instruction1: Example Instruction1\n\n"
        "Answer1: Example Answer1\n\n"
        "Task1: Example Task1\n\n"
        "Instruction2: Example Instruction2\n\n"
        "Answer2: Example Answer2\n\n"
        "Task2: Example Task2\n\n"
        "..."
    )


_QA_BLOCK_RE = re.compile(
    r"Instruction(\d+):\s*(?P<instruction>.*?)\s*"
    r"Answer\1:\s*(?P<answer>.*?)\s*"
    r"Task\1:\s*(?P<task>.*?)\s*"
    r"(?=Instruction\d+:|\Z)",
    re.DOTALL,
)

_QA_START_RE = re.compile(r"Instruction\d+:")


def parse_general_qa(
    response: str,
    image_ref: str,
    source_id: str = "",
) -> tuple[list[InstructionRecord], int]:
    """Split an LLM response into InstructionN/AnswerN/TaskN dialog records.

    Malformed blocks (missing or misnumbered fields) are skipped and counted.
    """
    candidates = len(_QA_START_RE.findall(response))
    records: list[InstructionRecord] = []
    for m in _QA_BLOCK_RE.finditer(response):
        instruction = m.group("instruction").strip()
        answer = m.group("answer").strip()
        task = m.group("task").strip()
        if not instruction or not answer or not task:
            continue
        records.append(
            make_dialog(
                user_text=instruction,
                assistant_text=answer,
                image_ref=image_ref,
                task_tag=task,
                source_id=source_id,
            )
        )
    return records, candidates - len(records)
