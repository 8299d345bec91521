"""Scoring conventions for extraction metrics.

The ten-document fixture below is scored by hand and the counts frozen;
every convention (abstention, undefined gold, list equality) is covered
by at least one row.

    doc  gold          predicted    outcome
    d0   "10"          "10"         correct
    d1   "11"          "99"         incorrect
    d2   "12"          None         bottom (abstained on a defined value)
    d3   "13"          (missing)    bottom (a missing doc is an abstention)
    d4   None          "5"          incorrect (claimed an absent value)
    d5   None          None         neutral
    d6   ["a", "b"]    ["a", "b"]   correct (lists compare element-wise)
    d7   ["a", "b"]    ["b", "a"]   incorrect (order matters)
    d8   "18"          "18"         correct
    d9   "19"          "19"         correct

    correct=4  incorrect=3  bottom=2  defined=8
    precision = 4/7      recall = 4/8      f1 = 8/15
"""

from __future__ import annotations

import json

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from landex.docmodel import DocumentError
from landex.evaluate import (
    EvalReport,
    evaluate,
    evaluate_field,
    load_records,
    report_to_obj,
)

TEN_DOC_GOLD = {
    "d0": "10", "d1": "11", "d2": "12", "d3": "13", "d4": None, "d5": None,
    "d6": ["a", "b"], "d7": ["a", "b"], "d8": "18", "d9": "19",
}
TEN_DOC_PREDICTIONS = {
    "d0": "10", "d1": "99", "d2": None, "d4": "5", "d5": None,
    "d6": ["a", "b"], "d7": ["b", "a"], "d8": "18", "d9": "19",
}


def test_ten_doc_fixture_matches_hand_computation():
    report = evaluate_field("total", TEN_DOC_PREDICTIONS, TEN_DOC_GOLD)
    assert (report.correct, report.incorrect) == (4, 3)
    assert (report.bottom, report.defined) == (2, 8)
    assert report.precision == pytest.approx(4 / 7, abs=1e-12)
    assert report.recall == pytest.approx(4 / 8, abs=1e-12)
    assert report.f1 == pytest.approx(8 / 15, abs=1e-12)


def test_all_abstentions_score_zero_not_nan():
    gold = {"a": "1", "b": "2"}
    report = evaluate_field("f", {"a": None}, gold)
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
    assert report.bottom == 2  # the explicit None and the missing doc


def test_empty_gold_defines_nothing():
    report = evaluate_field("f", {}, {"a": None})
    assert report == EvalReport("f", 0, 0, 0, 0)
    assert report.recall == 0.0


def test_unknown_document_rejected():
    with pytest.raises(DocumentError, match="unknown documents"):
        evaluate_field("f", {"ghost": "1"}, {"a": "1"})


def test_evaluate_scores_only_predicted_fields():
    gold = {"total": {"d0": "1"}, "items": {"d0": ["x"]}}
    reports = evaluate({"total": {"d0": "1"}}, gold)
    assert sorted(reports) == ["total"]
    assert reports["total"].correct == 1


def test_evaluate_rejects_unknown_fields_and_empty_input():
    gold = {"total": {"d0": "1"}}
    with pytest.raises(DocumentError, match="unknown field"):
        evaluate({"bogus": {"d0": "1"}}, gold)
    with pytest.raises(DocumentError, match="no predictions"):
        evaluate({}, gold)


def test_report_serialization_is_json_friendly():
    report = evaluate_field("total", TEN_DOC_PREDICTIONS, TEN_DOC_GOLD)
    obj = report_to_obj(report)
    assert obj == json.loads(json.dumps(obj))
    assert obj["precision"] == round(4 / 7, 6)
    assert obj["f1"] == round(8 / 15, 6)
    assert {"field", "correct", "incorrect", "bottom", "defined"} < set(obj)


# ---------------------------------------------------------------------------
# Record files
# ---------------------------------------------------------------------------


def test_load_records_round_trip(tmp_path):
    path = tmp_path / "preds.jsonl"
    rows = [{"doc_id": "d1", "field": "total", "value": None},
            {"doc_id": "d0", "field": "total", "value": "9"},
            {"doc_id": "d0", "field": "items", "value": ["a"]}]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert load_records(path) == {"total": {"d1": None, "d0": "9"},
                                  "items": {"d0": ["a"]}}


def test_load_records_reports_the_offending_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"doc_id": "d0", "field": "f", "value": 1}\nnot json\n')
    with pytest.raises(DocumentError, match=r"bad\.jsonl:2"):
        load_records(path)
    path.write_text('{"doc_id": "d0", "field": "f"}\n')
    with pytest.raises(DocumentError, match=":1: bad record"):
        load_records(path)


def test_load_records_rejects_duplicates(tmp_path):
    path = tmp_path / "dup.jsonl"
    row = json.dumps({"doc_id": "d0", "field": "f", "value": "1"}) + "\n"
    path.write_text(row + row)
    with pytest.raises(DocumentError, match="duplicate record"):
        load_records(path)


# ---------------------------------------------------------------------------
# Metric invariants
# ---------------------------------------------------------------------------

values = st.none() | st.text(max_size=3) | st.lists(st.text(max_size=2),
                                                    max_size=3)


@st.composite
def scored_pairs(draw):
    gold = draw(st.dictionaries(st.sampled_from([f"d{i}" for i in range(8)]),
                                values, max_size=8))
    predictions = {k: draw(values) for k in gold if draw(st.booleans())}
    return gold, predictions


@given(scored_pairs())
@settings(max_examples=150)
def test_metric_invariants(pair):
    gold, predictions = pair
    report = evaluate_field("f", predictions, gold)
    assert 0.0 <= report.precision <= 1.0
    assert 0.0 <= report.recall <= 1.0
    assert 0.0 <= report.f1 <= 1.0
    # correct and bottom only ever count documents with defined gold
    assert report.correct + report.bottom <= report.defined
    assert (report.f1 == 0.0) == (report.correct == 0)
    if report.defined:
        assert report.recall == report.correct / report.defined
