"""Listing quality score: explainable weighted sum over 11 features.

Feature weights are operator-owned config; the default is uniform. The
per-listing feature derivation below is a documented heuristic so the score
can be computed for any draft or catalog record without external models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..catalog import ProductRecord, Taxonomy

FEATURE_NAMES: tuple[str, ...] = (
    "category_accuracy",
    "attribute_fill_rate",
    "description_length_score",
    "description_fluency",
    "title_present",
    "image_count_score",
    "image_aesthetic",
    "video_present",
    "price_filled",
    "brand_specified",
    "condition_specified",
)

FEATURE_COUNT = len(FEATURE_NAMES)  # 11

_LENGTH_SATURATION = 120  # chars at which the length feature reaches 1.0
_IMAGE_SATURATION = 3
_NEUTRAL_AESTHETIC = 0.5  # no aesthetics model in scope; neutral placeholder


class QualityError(Exception):
    pass


class WeightMismatchError(QualityError):
    pass


@dataclass(frozen=True)
class QualityFeatureVector:
    values: Mapping[str, float]

    def __post_init__(self) -> None:
        if set(self.values) != set(FEATURE_NAMES):
            missing = set(FEATURE_NAMES) - set(self.values)
            extra = set(self.values) - set(FEATURE_NAMES)
            raise QualityError(f"feature vector mismatch (missing={missing}, extra={extra})")
        for name, value in self.values.items():
            if not (0.0 <= value <= 1.0):
                raise QualityError(f"feature {name}={value} outside [0, 1]")


@dataclass(frozen=True)
class QualityWeights:
    values: Mapping[str, float]

    def __post_init__(self) -> None:
        for name, value in self.values.items():
            if value < 0.0:
                raise WeightMismatchError(f"weight {name}={value} must be nonnegative")
        total = sum(self.values.values())
        if abs(total - 1.0) > 1e-9:
            raise WeightMismatchError(f"weights must sum to 1, got {total}")

    @classmethod
    def uniform(cls) -> "QualityWeights":
        return cls({name: 1.0 / FEATURE_COUNT for name in FEATURE_NAMES})


def quality_score(features: QualityFeatureVector, weights: QualityWeights) -> float:
    """Weighted sum of the 11 features; in [0, 1], display as x100."""
    if set(weights.values) != set(features.values):
        raise WeightMismatchError("weights do not cover the feature vector")
    return sum(weights.values[name] * features.values[name] for name in features.values)


def display_score(score: float) -> float:
    return round(score * 100.0, 2)


def _clamp(x: float) -> float:
    return max(0.0, min(1.0, x))


def _fluency(text: str) -> float:
    # Share of word-ish characters; crude but monotone in readability.
    if not text:
        return 0.0
    ok = sum(1 for ch in text if ch.isalnum() or ch.isspace() or ch in ".,!?;:'\"()-%+")
    return _clamp(ok / len(text))


def listing_features(
    description: str,
    attributes: Mapping[str, str] | None = None,
    template_size: int | None = None,
    category_known: bool = False,
    image_count: int = 0,
    video_count: int = 0,
    price: float | None = None,
) -> QualityFeatureVector:
    attrs = attributes or {}
    if template_size:
        fill_rate = _clamp(len(attrs) / template_size)
    else:
        fill_rate = _clamp(len(attrs) / 5.0)
    keys_folded = {k.casefold() for k in attrs}
    return QualityFeatureVector(
        {
            "category_accuracy": 1.0 if category_known else 0.0,
            "attribute_fill_rate": fill_rate,
            "description_length_score": _clamp(len(description) / _LENGTH_SATURATION),
            "description_fluency": _fluency(description),
            "title_present": 1.0 if description.strip() else 0.0,
            "image_count_score": _clamp(image_count / _IMAGE_SATURATION),
            "image_aesthetic": _NEUTRAL_AESTHETIC,
            "video_present": 1.0 if video_count > 0 else 0.0,
            "price_filled": 1.0 if price is not None else 0.0,
            "brand_specified": 1.0 if any("brand" in k for k in keys_folded) else 0.0,
            "condition_specified": 1.0 if any("condition" in k for k in keys_folded) else 0.0,
        }
    )


def record_features(record: ProductRecord, taxonomy: Taxonomy | None = None) -> QualityFeatureVector:
    if taxonomy is not None and record.category_id in taxonomy:
        category_known = True
        template_size = len(taxonomy.get(record.category_id).attribute_template) or None
    else:
        category_known = bool(record.category_id)
        template_size = None
    return listing_features(
        description=record.description,
        attributes=record.attributes,
        template_size=template_size,
        category_known=category_known,
        image_count=record.image_count,
        video_count=record.video_count,
        price=record.price,
    )


def record_quality_scorer(taxonomy: Taxonomy | None = None, weights: QualityWeights | None = None):
    """Default quality scorer for corpus cleaning (weighted feature sum)."""
    w = weights or QualityWeights.uniform()

    def scorer(record: ProductRecord) -> float:
        return quality_score(record_features(record, taxonomy), w)

    return scorer
