"""Instruction assembly and ChatML serialization with loss-mask spans.

Instruction wording lives in template profiles (slot-based, loadable from a
JSON file) because the canonical phrasing is locale-owned config, not code:
the serving profile phrases prompts the way the online composer speaks, the
dataset profile the way training samples are written.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .attributes import AttributeTemplate, ExtractedAttributes
from .catalog import CategoryNode

IM_START = "<im_start>"
IM_END = "<im_end>"
IMG_OPEN = "<img>"
IMG_CLOSE = "</img>"

_FORBIDDEN_IN_TEXT = (IM_START, IM_END, IMG_OPEN, IMG_CLOSE)

ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"


class PromptError(Exception):
    pass


class InconsistentContextError(PromptError):
    pass


class InvalidRecordError(PromptError):
    pass


class SerializationMismatchError(PromptError):
    pass


# ---------------------------------------------------------------------------
# Generation contexts
# ---------------------------------------------------------------------------


class Variant(str, Enum):
    IMAGE_ONLY = "ImageOnly"
    IMAGE_TEMPLATE = "ImageTemplate"
    IMAGE_TEMPLATE_REFERENCE = "ImageTemplateReference"


def richest_variant(
    template: AttributeTemplate | None,
    reference_attrs: ExtractedAttributes | None,
) -> Variant:
    """Most informative variant whose preconditions hold."""
    if template and reference_attrs:
        return Variant.IMAGE_TEMPLATE_REFERENCE
    if template:
        return Variant.IMAGE_TEMPLATE
    return Variant.IMAGE_ONLY


@dataclass
class GenerationContext:
    image_ref: str
    variant: Variant
    category: CategoryNode | None = None
    template: AttributeTemplate | None = None
    reference_attrs: ExtractedAttributes | None = None

    def validate(self) -> None:
        if self.variant is Variant.IMAGE_TEMPLATE_REFERENCE:
            if not self.template or not self.reference_attrs:
                raise InconsistentContextError(
                    "ImageTemplateReference requires a template and nonempty reference attributes"
                )
        elif self.variant is Variant.IMAGE_TEMPLATE:
            if not self.template:
                raise InconsistentContextError("ImageTemplate requires a template")

    def snapshot(self) -> dict[str, Any]:
        return {
            "image_ref": self.image_ref,
            "variant": self.variant.value,
            "category_id": self.category.id if self.category else None,
            "template": list(self.template.names) if self.template else None,
            "reference_attrs": dict(self.reference_attrs.values) if self.reference_attrs else None,
        }


# ---------------------------------------------------------------------------
# Instruction templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplates:
    """Slot-based instruction wording for the three variants.

    Bodies may use ``{category}``, ``{template}`` and ``{references}``.
    The reference clause may use ``{name}``, ``{name_lower}`` and ``{value}``.
    """

    image_only: str
    image_template: str
    image_template_reference: str
    template_joiner: str = " + "
    reference_clause: str = "{name} is {value}"
    reference_joiner: str = ", "
    reference_final_joiner: str | None = None
    fallback_category_label: str = "general"

    @classmethod
    def from_file(cls, path: str) -> "PromptTemplates":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(**doc)


# Online-serving phrasing: one paragraph, reference clauses rendered as
# "the <attribute> is <value>".
SERVING_TEMPLATES = PromptTemplates(
    image_only=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a {category} category with the product image as shown in the picture. "
        "Please write a paragraph description for this product."
    ),
    image_template=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a {category} category with the product image as shown in the picture, "
        "and the copy template is {template}. "
        "Please write a paragraph description for this product."
    ),
    image_template_reference=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a {category} category with the product image as shown in the picture, "
        "and the copy template is {template}. In which, {references}, "
        "please write a paragraph description for this product."
    ),
    template_joiner=" + ",
    reference_clause="the {name_lower} is {value}",
    reference_joiner=", ",
    reference_final_joiner=None,
)

# Dataset-building phrasing: "copywriting template", "where <Name> is <value>".
DATASET_TEMPLATES = PromptTemplates(
    image_only=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a listing for a {category} product. The product images are as shown. "
        "Please write a product description for this item, enhancing and expanding it reasonably."
    ),
    image_template=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a listing for a {category} product. The product images are as shown. "
        "The copywriting template is {template}. "
        "Please write a product description for this item, enhancing and expanding it "
        "reasonably according to the template."
    ),
    image_template_reference=(
        "You are an experienced seller on a second-hand trading platform and need to "
        "post a listing for a {category} product. The product images are as shown. "
        "The copywriting template is {template}, where {references}. "
        "Please write a product description for this item, enhancing and expanding it "
        "reasonably according to the template."
    ),
    template_joiner="+",
    reference_clause="{name} is {value}",
    reference_joiner=", ",
    reference_final_joiner=", and ",
)


def _join_references(
    template: AttributeTemplate,
    refs: ExtractedAttributes,
    cfg: PromptTemplates,
) -> str:
    clauses = [
        cfg.reference_clause.format(name=name, name_lower=name.lower(), value=refs.values[name])
        for name in template.names
        if name in refs.values
    ]
    if len(clauses) >= 2 and cfg.reference_final_joiner is not None:
        return cfg.reference_joiner.join(clauses[:-1]) + cfg.reference_final_joiner + clauses[-1]
    return cfg.reference_joiner.join(clauses)


def build_generation_instruction(
    ctx: GenerationContext,
    templates: PromptTemplates = SERVING_TEMPLATES,
) -> str:
    """Render the instruction text for a generation context."""
    ctx.validate()
    category_label = ctx.category.name if ctx.category else templates.fallback_category_label
    slots = {"category": category_label, "template": "", "references": ""}
    if ctx.variant is Variant.IMAGE_ONLY:
        body = templates.image_only
    elif ctx.variant is Variant.IMAGE_TEMPLATE:
        assert ctx.template is not None
        slots["template"] = templates.template_joiner.join(ctx.template.names)
        body = templates.image_template
    else:
        assert ctx.template is not None and ctx.reference_attrs is not None
        slots["template"] = templates.template_joiner.join(ctx.template.names)
        slots["references"] = _join_references(ctx.template, ctx.reference_attrs, templates)
        body = templates.image_template_reference
    return body.format(**slots)


# ---------------------------------------------------------------------------
# Instruction records and ChatML
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    kind: str  # "text" | "image"
    value: str


def text_segment(value: str) -> Segment:
    return Segment("text", value)


def image_segment(ref: str) -> Segment:
    return Segment("image", ref)


@dataclass(frozen=True)
class Turn:
    role: str
    segments: tuple[Segment, ...]

    @property
    def loss_masked(self) -> bool:
        # Only assistant tokens contribute to training loss.
        return self.role != ROLE_ASSISTANT


@dataclass(frozen=True)
class InstructionRecord:
    turns: tuple[Turn, ...]
    # Metadata rides in the .chatml.jsonl envelope, not the serialized text,
    # so record identity (and round-trip equality) is the dialog itself.
    task_tag: str = field(default="", compare=False)
    source_id: str = field(default="", compare=False)

    def validate(self) -> None:
        if not self.turns:
            raise InvalidRecordError("record has no turns")
        for i, turn in enumerate(self.turns):
            expected = ROLE_USER if i % 2 == 0 else ROLE_ASSISTANT
            if turn.role != expected:
                raise InvalidRecordError(
                    f"turn {i} role {turn.role!r}: roles must alternate starting with user"
                )
            if not turn.segments:
                raise InvalidRecordError(f"turn {i} has no segments")
            prev_kind = None
            for seg in turn.segments:
                if seg.kind == "text":
                    if not seg.value:
                        raise InvalidRecordError(f"turn {i}: empty text segment")
                    if prev_kind == "text":
                        raise InvalidRecordError(f"turn {i}: adjacent text segments (merge them)")
                    for marker in _FORBIDDEN_IN_TEXT:
                        if marker in seg.value:
                            raise InvalidRecordError(f"turn {i}: text contains marker {marker!r}")
                elif seg.kind == "image":
                    if not seg.value or "\n" in seg.value:
                        raise InvalidRecordError(f"turn {i}: bad image ref {seg.value!r}")
                    for marker in _FORBIDDEN_IN_TEXT:
                        if marker in seg.value:
                            raise InvalidRecordError(f"turn {i}: image ref contains {marker!r}")
                else:
                    raise InvalidRecordError(f"turn {i}: unknown segment kind {seg.kind!r}")
                prev_kind = seg.kind


def make_dialog(
    user_text: str | None,
    assistant_text: str,
    image_ref: str | None = None,
    task_tag: str = "",
    source_id: str = "",
) -> InstructionRecord:
    """Single-round record: user turn (optional image + text), assistant answer."""
    segments: list[Segment] = []
    if image_ref:
        segments.append(image_segment(image_ref))
    if user_text:
        segments.append(text_segment(user_text))
    record = InstructionRecord(
        turns=(
            Turn(ROLE_USER, tuple(segments)),
            Turn(ROLE_ASSISTANT, (text_segment(assistant_text),)),
        ),
        task_tag=task_tag,
        source_id=source_id,
    )
    record.validate()
    return record


def _render_turn_content(turn: Turn, image_counter: list[int]) -> str:
    parts = []
    for seg in turn.segments:
        if seg.kind == "image":
            image_counter[0] += 1
            parts.append(f"Picture {image_counter[0]}: {IMG_OPEN}{seg.value}{IMG_CLOSE}")
        else:
            parts.append(seg.value)
    return "".join(parts)


def to_chatml_record(record: InstructionRecord) -> str:
    record.validate()
    image_counter = [0]
    out = []
    for turn in record.turns:
        content = _render_turn_content(turn, image_counter)
        out.append(f"{IM_START}{turn.role}\n{content}{IM_END}\n")
    return "".join(out)


def to_chatml(records: Iterable[InstructionRecord]) -> str:
    """Concatenate record serializations.

    Records are separated by one blank line: within a record turns abut as
    ``<im_end>\\n<im_start>``, so the ``<im_end>\\n\\n<im_start>`` boundary
    is unambiguous (marker strings cannot occur inside segment content).
    """
    return "\n".join(to_chatml_record(r) for r in records)


_IMAGE_RE = re.compile(r"Picture \d+: " + re.escape(IMG_OPEN) + r"(.*?)" + re.escape(IMG_CLOSE))


def _parse_segments(content: str) -> tuple[Segment, ...]:
    segments: list[Segment] = []
    pos = 0
    for m in _IMAGE_RE.finditer(content):
        if m.start() > pos:
            segments.append(text_segment(content[pos : m.start()]))
        segments.append(image_segment(m.group(1)))
        pos = m.end()
    if pos < len(content):
        segments.append(text_segment(content[pos:]))
    return tuple(segments)


def from_chatml_record(text: str) -> InstructionRecord:
    """Parse one record's serialization back into an InstructionRecord."""
    turns: list[Turn] = []
    pos = 0
    while pos < len(text):
        if not text.startswith(IM_START, pos):
            raise InvalidRecordError(f"expected {IM_START!r} at offset {pos}")
        role_start = pos + len(IM_START)
        nl = text.find("\n", role_start)
        if nl == -1:
            raise InvalidRecordError("missing newline after role")
        role = text[role_start:nl]
        end = text.find(IM_END, nl + 1)
        if end == -1:
            raise InvalidRecordError(f"missing {IM_END!r} terminator")
        content = text[nl + 1 : end]
        turns.append(Turn(role, _parse_segments(content)))
        pos = end + len(IM_END)
        if text.startswith("\n", pos):
            pos += 1
        else:
            raise InvalidRecordError(f"missing newline after {IM_END!r}")
    record = InstructionRecord(turns=tuple(turns))
    record.validate()
    return record


def from_chatml(text: str) -> list[InstructionRecord]:
    """Invert :func:`to_chatml`."""
    if not text:
        return []
    boundary = f"{IM_END}\n\n{IM_START}"
    records: list[InstructionRecord] = []
    start = 0
    while True:
        i = text.find(boundary, start)
        if i == -1:
            records.append(from_chatml_record(text[start:]))
            break
        cut = i + len(IM_END) + 1  # keep "<im_end>\n" with the current record
        records.append(from_chatml_record(text[start:cut]))
        start = cut + 1  # skip the separator line
    return records


def loss_mask_spans(record: InstructionRecord, serialized: str) -> list[tuple[int, int]]:
    """Byte ranges of serialized text that contribute to training loss.

    Ranges cover each assistant turn's content plus its terminating
    ``<im_end>`` marker; user turns, role headers and framing newlines are
    excluded. Offsets are UTF-8 byte positions, half-open ``[start, end)``.
    """
    record.validate()
    spans: list[tuple[int, int]] = []
    image_counter = [0]
    offset = 0
    for turn in record.turns:
        header = f"{IM_START}{turn.role}\n"
        content = _render_turn_content(turn, image_counter)
        header_len = len(header.encode("utf-8"))
        content_len = len(content.encode("utf-8"))
        end_len = len(IM_END.encode("utf-8"))
        if turn.role == ROLE_ASSISTANT:
            spans.append((offset + header_len, offset + header_len + content_len + end_len))
        offset += header_len + content_len + end_len + 1  # trailing "\n"
    expected_len = offset
    if to_chatml_record(record) != serialized or len(serialized.encode("utf-8")) != expected_len:
        raise SerializationMismatchError("serialized text does not match the record")
    return spans


def chatml_jsonl_line(record: InstructionRecord) -> str:
    """One ``.chatml.jsonl`` line: serialized text plus loss-span annotations."""
    text = to_chatml_record(record)
    spans = loss_mask_spans(record, text)
    return json.dumps(
        {
            "text": text,
            "loss_spans": [[s, e] for s, e in spans],
            "metadata": {"task_tag": record.task_tag, "source_id": record.source_id},
        },
        ensure_ascii=False,
    )


def write_chatml_jsonl(records: Iterable[InstructionRecord], path: str) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(chatml_jsonl_line(record) + "\n")
            n += 1
    return n
