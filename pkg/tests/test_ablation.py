from __future__ import annotations

import pytest

from listingkit.evaluation.ablation import (
    AblationConfig,
    DEFAULT_CONFIGS,
    METRIC_COLUMNS,
    run_ablation,
)
from listingkit.fixtures import make_fixture


@pytest.fixture(scope="module")
def table():
    fixture = make_fixture(seed=7, products_per_category=40, queries_per_category=8)
    return run_ablation(fixture)


def test_table_has_one_row_per_config_with_all_columns(table):
    assert len(table.rows) == len(DEFAULT_CONFIGS)
    for row in table.rows:
        assert set(METRIC_COLUMNS) <= set(row.metrics)
        assert len(METRIC_COLUMNS) == 9


def test_image_only_row_has_zero_attribute_accuracy(table):
    row = table.row_for(AblationConfig(image=True))
    assert row.metrics["attribute_accuracy"] == 0.0


def test_reference_row_doubles_attribute_accuracy(table):
    image_only = table.row_for(AblationConfig(image=True)).metrics
    with_ref = table.row_for(AblationConfig(image=True, reference=True)).metrics
    assert with_ref["attribute_accuracy"] >= 2.0 * image_only["attribute_accuracy"]
    assert with_ref["attribute_accuracy"] > 0.5
    assert with_ref["sim"] > image_only["sim"]


def test_render_is_aligned_text(table):
    text = table.render()
    lines = text.splitlines()
    assert len(lines) == 1 + len(table.rows)
    assert "ACC" in lines[0] and "SIM" in lines[0] and "ROUGEL" in lines[0]


def test_to_doc_shape(table):
    doc = table.to_doc()
    assert len(doc["rows"]) == len(table.rows)
    for row in doc["rows"]:
        assert {"image", "category", "reference"} <= set(row)
