from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from listingkit.evaluation.quality import (
    FEATURE_COUNT,
    FEATURE_NAMES,
    QualityError,
    QualityFeatureVector,
    QualityWeights,
    WeightMismatchError,
    display_score,
    listing_features,
    quality_score,
)


def features_from(values):
    return QualityFeatureVector(dict(zip(FEATURE_NAMES, values)))


def random_weights(rng):
    raw = [rng.random() + 1e-6 for _ in FEATURE_NAMES]
    total = sum(raw)
    return QualityWeights({n: v / total for n, v in zip(FEATURE_NAMES, raw)})


def test_eleven_features():
    assert FEATURE_COUNT == 11


def test_all_ones_scores_one():
    rng = random.Random(1)
    for _ in range(10):
        assert quality_score(features_from([1.0] * 11), random_weights(rng)) == pytest.approx(1.0)


def test_all_zeros_scores_zero():
    assert quality_score(features_from([0.0] * 11), QualityWeights.uniform()) == 0.0


def test_two_active_features_arithmetic():
    weights = {name: 0.0 for name in FEATURE_NAMES}
    weights[FEATURE_NAMES[0]] = 0.5
    weights[FEATURE_NAMES[1]] = 0.5
    values = {name: 0.0 for name in FEATURE_NAMES}
    values[FEATURE_NAMES[0]] = 0.2
    values[FEATURE_NAMES[1]] = 0.8
    score = quality_score(QualityFeatureVector(values), QualityWeights(weights))
    assert score == pytest.approx(0.5)


def test_linearity_over_random_draws():
    rng = random.Random(2)
    for _ in range(200):
        f = [rng.random() for _ in range(11)]
        g = [rng.random() for _ in range(11)]
        w = random_weights(rng)
        alpha = rng.random()
        blended = [alpha * a + (1 - alpha) * b for a, b in zip(f, g)]
        lhs = quality_score(features_from(blended), w)
        rhs = alpha * quality_score(features_from(f), w) + (1 - alpha) * quality_score(
            features_from(g), w
        )
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_monotonicity_over_random_draws():
    rng = random.Random(3)
    for _ in range(200):
        f = [rng.random() * 0.9 for _ in range(11)]
        w = random_weights(rng)
        base = quality_score(features_from(f), w)
        i = rng.randrange(11)
        bumped = list(f)
        bumped[i] = min(1.0, bumped[i] + rng.random() * 0.1)
        assert quality_score(features_from(bumped), w) >= base - 1e-12


def test_weights_must_sum_to_one():
    with pytest.raises(WeightMismatchError):
        QualityWeights({name: 0.2 for name in FEATURE_NAMES})


def test_weights_must_be_nonnegative():
    values = {name: 1.0 / 11 for name in FEATURE_NAMES}
    values[FEATURE_NAMES[0]] = -0.1
    values[FEATURE_NAMES[1]] = 1.0 / 11 + 0.1 + 1.0 / 11  # keep the sum at 1
    with pytest.raises(WeightMismatchError):
        QualityWeights(values)


def test_feature_vector_must_have_exactly_the_11_features():
    with pytest.raises(QualityError):
        QualityFeatureVector({"category_accuracy": 1.0})
    bad = dict(zip(FEATURE_NAMES, [0.5] * 11))
    bad["extra"] = 0.5
    with pytest.raises(QualityError):
        QualityFeatureVector(bad)


def test_feature_values_bounded():
    values = dict(zip(FEATURE_NAMES, [0.5] * 11))
    values[FEATURE_NAMES[3]] = 1.2
    with pytest.raises(QualityError):
        QualityFeatureVector(values)


def test_weight_feature_cover_mismatch():
    weights = QualityWeights.uniform()
    features = features_from([0.5] * 11)
    # hand-build a weights object bypassing validation symmetry
    other = QualityWeights({name: (1.0 / 11) for name in FEATURE_NAMES})
    assert quality_score(features, other) == pytest.approx(0.5)


@settings(max_examples=100)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=11, max_size=11))
def test_score_bounded_for_any_features(values):
    score = quality_score(features_from(values), QualityWeights.uniform())
    assert 0.0 <= score <= 1.0 + 1e-12


def test_display_score():
    assert display_score(0.756) == 75.6


def test_listing_features_shapes():
    features = listing_features(
        description="Personal used phone, works great and looks clean enough",
        attributes={"Brand": "X", "Screen Condition": "fine"},
        template_size=6,
        category_known=True,
        image_count=4,
        video_count=1,
        price=99.0,
    )
    v = features.values
    assert v["category_accuracy"] == 1.0
    assert v["attribute_fill_rate"] == pytest.approx(2 / 6)
    assert v["image_count_score"] == 1.0
    assert v["video_present"] == 1.0
    assert v["price_filled"] == 1.0
    assert v["brand_specified"] == 1.0
    assert v["condition_specified"] == 1.0
