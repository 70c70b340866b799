"""Key-attribute extraction from product descriptions.

The reference extractor is deterministic: a per-category lexicon of known
surface values plus regex patterns. A model-backed extractor can be plugged
behind the same :class:`AttributeExtractor` protocol, driven by
:func:`build_extraction_prompt`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Protocol

DEFAULT_CATEGORY = "*"


class LexiconError(Exception):
    pass


@dataclass(frozen=True)
class AttributeTemplate:
    """Ordered key-attribute names for one category."""

    category_id: str
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate attribute names in template for {self.category_id!r}")

    def __bool__(self) -> bool:
        return bool(self.names)


@dataclass
class ExtractedAttributes:
    """Attribute values found in a description.

    Keys are a subset of the template, in template order; attributes that
    were not found are absent rather than empty.
    """

    category_id: str
    values: dict[str, str] = field(default_factory=dict)

    def validate(self, template: AttributeTemplate) -> None:
        order = {name: i for i, name in enumerate(template.names)}
        last = -1
        for key, value in self.values.items():
            if key not in order:
                raise ValueError(f"attribute {key!r} not in template")
            if not value:
                raise ValueError(f"attribute {key!r} has an empty value")
            if order[key] < last:
                raise ValueError("attribute keys out of template order")
            last = order[key]

    def __bool__(self) -> bool:
        return bool(self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AttributeMatcher:
    values: tuple[str, ...] = ()
    patterns: tuple[re.Pattern[str], ...] = ()


class ExtractionLexicon:
    """Per-(category, attribute) gazetteers and regex patterns.

    The ``*`` category section applies to every category and merges with
    (after) category-specific entries.
    """

    def __init__(self, sections: dict[str, dict[str, AttributeMatcher]]):
        self._sections = sections

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ExtractionLexicon":
        sections: dict[str, dict[str, AttributeMatcher]] = {}
        for category_id, attrs in doc.items():
            section: dict[str, AttributeMatcher] = {}
            for attr_name, entry in attrs.items():
                values = tuple(entry.get("values", ()))
                for v in values:
                    if not v:
                        raise LexiconError(
                            f"{category_id}/{attr_name}: gazetteer entries must be nonempty"
                        )
                try:
                    patterns = tuple(re.compile(p) for p in entry.get("patterns", ()))
                except re.error as exc:
                    raise LexiconError(f"{category_id}/{attr_name}: bad pattern: {exc}") from exc
                section[attr_name] = AttributeMatcher(values=values, patterns=patterns)
            sections[category_id] = section
        return cls(sections)

    @classmethod
    def from_file(cls, path: str) -> "ExtractionLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))

    def matchers(self, category_id: str, attribute: str) -> AttributeMatcher:
        specific = self._sections.get(category_id, {}).get(attribute)
        shared = self._sections.get(DEFAULT_CATEGORY, {}).get(attribute)
        if specific and shared:
            return AttributeMatcher(
                values=specific.values + shared.values,
                patterns=specific.patterns + shared.patterns,
            )
        return specific or shared or AttributeMatcher()


def _best_match(description: str, matcher: AttributeMatcher) -> str | None:
    """Leftmost-longest candidate across gazetteer values and patterns.

    Earliest start position wins; at equal starts the longer match wins.
    Gazetteer values match case-insensitively but the extracted value is the
    verbatim description substring.
    """
    best: tuple[int, int] | None = None  # (start, -length)
    best_text: str | None = None
    for value in matcher.values:
        m = re.search(re.escape(value), description, re.IGNORECASE)
        if m and m.group(0):
            key = (m.start(), -(m.end() - m.start()))
            if best is None or key < best:
                best, best_text = key, m.group(0)
    for pattern in matcher.patterns:
        m = pattern.search(description)
        if m and m.group(0):
            key = (m.start(), -(m.end() - m.start()))
            if best is None or key < best:
                best, best_text = key, m.group(0)
    return best_text


def extract_attributes(
    description: str,
    template: AttributeTemplate,
    lexicon: ExtractionLexicon,
) -> ExtractedAttributes:
    """Extract template attributes from a description, deterministically.

    Every returned value is a contiguous substring of the description; keys
    are emitted in template order and unfound attributes are omitted.
    """
    if not template:
        raise ValueError("template must be nonempty")
    values: dict[str, str] = {}
    for name in template.names:
        matcher = lexicon.matchers(template.category_id, name)
        found = _best_match(description, matcher)
        if found:
            values[name] = found
    return ExtractedAttributes(category_id=template.category_id, values=values)


def serialize_attributes(attrs: ExtractedAttributes) -> str:
    """Single JSON object, keys in template order, absent attributes omitted."""
    return json.dumps(attrs.values, ensure_ascii=False, indent=2)


def parse_attributes(text: str, category_id: str) -> ExtractedAttributes:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("attribute JSON must be an object")
    return ExtractedAttributes(category_id=category_id, values={str(k): str(v) for k, v in doc.items()})


def build_extraction_prompt(
    description: str,
    template: AttributeTemplate,
    product_noun: str = "product",
) -> str:
    """Instruction for a model-backed extractor (same output contract)."""
    if not template:
        raise ValueError("template must be nonempty")
    names = ", ".join(template.names)
    return (
        f"Extract the {names} for the following {product_noun}. "
        f"Output the result in JSON format. "
        f"Product description: {description}"
    )


class AttributeExtractor(Protocol):
    def extract(self, description: str, template: AttributeTemplate) -> ExtractedAttributes: ...


class RuleBasedExtractor:
    """Reference extractor: deterministic lexicon matching."""

    def __init__(self, lexicon: ExtractionLexicon):
        self.lexicon = lexicon

    def extract(self, description: str, template: AttributeTemplate) -> ExtractedAttributes:
        return extract_attributes(description, template, self.lexicon)
