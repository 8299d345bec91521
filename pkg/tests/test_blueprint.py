"""Blueprint construction and the blueprint distance.

Expected values for the distance were computed with the independent
oracles at the top of the file (set algebra for Jaccard, a textbook
dynamic program for Levenshtein) and then frozen into the assertions.
"""

from __future__ import annotations

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from landex.blueprint import (
    ABSENT,
    FREQUENT,
    VARIABLE,
    BoxBlueprint,
    BoxSummary,
    CommonValueIndex,
    NeighborContent,
    TreeBlueprint,
    blueprint_box,
    blueprint_from_obj,
    blueprint_to_obj,
    blueprint_tree,
    common_values,
    delta,
    frequent_ngrams,
    mode_blueprint,
    text_ngrams,
    whole_document_blueprint,
)
from landex.docmodel import (
    BoxDocument,
    BoxRegion,
    DocumentError,
    TextBox,
    TreeDocument,
    TreeRegion,
)

from tests.conftest import node


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def oracle_jaccard(s1: set, s2: set) -> float:
    union = s1 | s2
    if not union:
        return 0.0
    return 1.0 - len(s1 & s2) / len(union)


def oracle_levenshtein(a, b) -> int:
    """Plain recursive edit distance with memoization."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        if a[i] == b[j]:
            return go(i + 1, j + 1)
        return 1 + min(go(i + 1, j), go(i, j + 1), go(i + 1, j + 1))

    return go(0, 0)


# ---------------------------------------------------------------------------
# Common values and frequent n-grams
# ---------------------------------------------------------------------------


def test_common_values_single_doc_keeps_all_node_values():
    doc = TreeDocument(node("r", node("a", text="x"), node("b", text="y")))
    idx = common_values([doc])
    # interior node data is the pre-order join of its descendants' text
    assert idx.values == frozenset({"x", "y", "x y"})


def test_common_values_is_intersection():
    d1 = TreeDocument(node("r", node("a", text="Date:"), node("b", text="Apr 3")))
    d2 = TreeDocument(node("r", node("a", text="Date:"), node("b", text="May 9")))
    idx = common_values([d1, d2])
    assert "Date:" in idx.values
    assert "Apr 3" not in idx.values and "May 9" not in idx.values


def test_common_values_empty_cluster_raises():
    with pytest.raises(DocumentError):
        common_values([])


def test_text_ngrams_window():
    grams = text_ngrams("engine number plate", 2)
    assert grams == {
        "engine", "number", "plate",
        "engine number", "number plate",
    }


def box_line(texts, y=0.0, w=40.0, h=10.0, gap=10.0, x0=0.0):
    boxes = []
    x = x0
    for t in texts:
        boxes.append(TextBox(t, x, y, w, h))
        x += w + gap
    return boxes


def test_frequent_ngrams_keeps_top_half_with_lexicographic_ties():
    d1 = BoxDocument(box_line(["alpha", "beta", "gamma"]), doc_id="d1")
    d2 = BoxDocument(box_line(["alpha", "beta", "delta"]), doc_id="d2")
    idx = frequent_ngrams([d1, d2], max_n=5)
    # 4 distinct unigrams -> ceil(4/2) = 2 kept; alpha/beta tie at count 2
    # and win over the count-1 grams; alpha sorts before beta.
    assert idx.frequent == (("alpha", 2), ("beta", 2))
    assert idx.frequent_set() == {"alpha", "beta"}


def test_frequent_ngrams_doc_frequency_not_term_frequency():
    # "noise" appears three times in one document but only that one
    # document; "label" appears once in each of two documents.
    d1 = BoxDocument(box_line(["noise", "noise", "noise", "label"]))
    d2 = BoxDocument(box_line(["label", "other"]))
    idx = frequent_ngrams([d1, d2], max_n=1)
    ranked = dict(idx.frequent)
    assert ranked["label"] == 2
    assert idx.frequent[0][0] == "label"


def test_frequent_ngrams_ceiling_on_odd_counts():
    d1 = BoxDocument(box_line(["a", "b", "c"]))
    idx = frequent_ngrams([d1], max_n=1)
    assert len(idx.frequent) == 2  # ceil(3/2)


# ---------------------------------------------------------------------------
# Tree blueprints
# ---------------------------------------------------------------------------


def test_tag_path_strips_positional_indices():
    # td is the 2nd cell of the 3rd row of the 4th table: the blueprint
    # records only body/table/tr/td.
    rows = [node("tr", node("td", text="x"), node("td", text="x"))
            for _ in range(3)]
    rows[2] = node("tr", node("td", text="x"), node("td", text="MARK"))
    tables = [node("table", *[node("tr", node("td", text="x"),
                                   node("td", text="x")) for _ in range(3)])
              for _ in range(3)]
    tables.append(node("table", *rows))
    doc = TreeDocument(node("body", node("div", text="hdr"), *tables))
    idx = CommonValueIndex(values=frozenset({"MARK"}))
    bp = blueprint_tree(TreeRegion(None, 0, 0), doc, idx)
    assert bp.paths == frozenset({"body/table/tr/td"})


def test_region_blueprint_paths_exclude_anchor():
    doc = TreeDocument(node("body", node("table",
                                         node("tr", node("td", text="Depart:"),
                                              node("td", text="7:00")))))
    idx = CommonValueIndex(values=frozenset({"Depart:"}))
    region = TreeRegion(anchor=(0,), start=0, end=0)  # the whole table row
    bp = blueprint_tree(region, doc, idx)
    assert bp.paths == frozenset({"tr/td"})


def test_whole_document_blueprint_lists_every_tag_path(itinerary_doc):
    bp = whole_document_blueprint(itinerary_doc)
    assert isinstance(bp, TreeBlueprint)
    assert "body" in bp.paths
    assert "body/div/h1" in bp.paths
    assert "body/table/tr/td" in bp.paths
    # index-free: the two tables collapse onto the same paths
    assert len(bp.paths) == 6


def test_structural_blueprint_ignores_text_changes(itinerary_doc):
    other = TreeDocument(itinerary_doc.root, doc_id="same-shape")
    assert whole_document_blueprint(itinerary_doc) == whole_document_blueprint(other)


# ---------------------------------------------------------------------------
# Box blueprints
# ---------------------------------------------------------------------------


def scanned_form():
    """Two rows: label row on top, variable values underneath."""
    labels = box_line(["Chassis number", "Engine number", "Reg Date"], y=0)
    values = box_line(["MB123", "E998", "01/02/2020"], y=20)
    return BoxDocument(labels + values, doc_id="form")


FORM_IDX = CommonValueIndex(frequent=(
    ("Chassis number", 3), ("Engine number", 3), ("Reg Date", 3),
))


def test_box_summary_four_sides():
    doc = scanned_form()
    bp = blueprint_box(BoxRegion(tuple(range(6))), doc, FORM_IDX)
    assert [s.ngram for s in bp.summaries] == [
        "Chassis number", "Engine number", "Reg Date",
    ]
    engine = bp.summaries[1]
    assert engine.top == NeighborContent(ABSENT)
    assert engine.left == NeighborContent(FREQUENT, "Chassis number")
    assert engine.right == NeighborContent(FREQUENT, "Reg Date")
    assert engine.bottom == NeighborContent(VARIABLE)


def test_box_summary_translation_invariant():
    doc = scanned_form()
    shifted = BoxDocument(
        [TextBox(b.text, b.x + 311.0, b.y + 97.0, b.w, b.h) for b in doc.boxes],
        doc_id="shifted",
    )
    region = BoxRegion(tuple(range(6)))
    assert blueprint_box(region, doc, FORM_IDX) == blueprint_box(region, shifted, FORM_IDX)


def test_box_summary_scaling_invariant():
    doc = scanned_form()
    scaled = BoxDocument(
        [TextBox(b.text, b.x * 2.5, b.y * 2.5, b.w * 2.5, b.h * 2.5) for b in doc.boxes],
        doc_id="scaled",
    )
    region = BoxRegion(tuple(range(6)))
    assert blueprint_box(region, doc, FORM_IDX) == blueprint_box(region, scaled, FORM_IDX)


def test_neighbors_limited_to_region_members():
    doc = scanned_form()
    # Drop "Reg Date" (index 2) from the region: Engine number's right
    # neighbor must become its former second-nearest... which is out of
    # cone, so the side reads Absent.
    region = BoxRegion((0, 1, 3, 4, 5))
    bp = blueprint_box(region, doc, FORM_IDX)
    engine = next(s for s in bp.summaries if s.ngram == "Engine number")
    assert engine.right == NeighborContent(ABSENT)


def test_far_neighbor_reads_absent():
    # gap of 160 between 40-wide boxes: center distance 200 > 3 * 40
    boxes = [TextBox("Engine number", 0, 0, 40, 10),
             TextBox("Reg Date", 200, 0, 40, 10)]
    doc = BoxDocument(boxes)
    bp = blueprint_box(BoxRegion((0, 1)), doc, FORM_IDX)
    assert bp.summaries[0].right == NeighborContent(ABSENT)


def test_neighbor_requires_perpendicular_overlap():
    # candidate is inside the right cone but its vertical span does not
    # intersect the source's, so it is not a right neighbor
    boxes = [TextBox("Engine number", 0, 0, 40, 10),
             TextBox("Reg Date", 50, 10, 40, 10)]
    doc = BoxDocument(boxes)
    bp = blueprint_box(BoxRegion((0, 1)), doc, FORM_IDX)
    assert bp.summaries[0].right == NeighborContent(ABSENT)


def test_variable_text_boxes_get_no_summary():
    doc = scanned_form()
    bp = blueprint_box(BoxRegion((3, 4, 5)), doc, FORM_IDX)
    assert bp.summaries == ()


def test_whole_document_box_blueprint_requires_index():
    doc = scanned_form()
    with pytest.raises(DocumentError):
        whole_document_blueprint(doc)
    bp = whole_document_blueprint(doc, FORM_IDX)
    assert isinstance(bp, BoxBlueprint)
    assert len(bp.summaries) == 3


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------


def test_delta_tree_jaccard_hand_value():
    b1 = TreeBlueprint(frozenset({"a", "b"}))
    b2 = TreeBlueprint(frozenset({"a", "c"}))
    assert delta(b1, b2) == pytest.approx(2 / 3)
    assert delta(b1, b2) == pytest.approx(oracle_jaccard({"a", "b"}, {"a", "c"}))


def test_delta_tree_both_empty_is_zero():
    assert delta(TreeBlueprint(frozenset()), TreeBlueprint(frozenset())) == 0.0


def summary(ngram, **sides):
    base = {d: NeighborContent(ABSENT) for d in ("top", "left", "right", "bottom")}
    base.update(sides)
    return BoxSummary(ngram=ngram, **base)


def test_delta_box_levenshtein_hand_value():
    b1 = BoxBlueprint((summary("a"), summary("b"), summary("c")))
    b2 = BoxBlueprint((summary("a"), summary("c")))
    # delete "b": one edit over max length 3
    assert delta(b1, b2) == pytest.approx(1 / 3)


def test_delta_box_side_change_counts_as_substitution():
    b1 = BoxBlueprint((summary("a"), summary("b")))
    b2 = BoxBlueprint((summary("a"),
                       summary("b", right=NeighborContent(VARIABLE))))
    assert delta(b1, b2) == pytest.approx(1 / 2)


def test_delta_box_both_empty_is_zero():
    assert delta(BoxBlueprint(()), BoxBlueprint(())) == 0.0


def test_delta_mixed_kinds_raise():
    with pytest.raises(DocumentError):
        delta(TreeBlueprint(frozenset()), BoxBlueprint(()))


path_sets = st.frozensets(st.sampled_from(["a", "b", "c", "d", "a/b", "a/c"]),
                          max_size=6)


@given(path_sets, path_sets)
def test_delta_tree_matches_oracle(s1, s2):
    assert delta(TreeBlueprint(s1), TreeBlueprint(s2)) == pytest.approx(
        oracle_jaccard(set(s1), set(s2)))


@given(path_sets, path_sets, path_sets)
def test_delta_tree_is_a_metric(s1, s2, s3):
    b1, b2, b3 = TreeBlueprint(s1), TreeBlueprint(s2), TreeBlueprint(s3)
    assert delta(b1, b1) == 0.0
    assert delta(b1, b2) == delta(b2, b1)
    assert 0.0 <= delta(b1, b2) <= 1.0
    assert delta(b1, b3) <= delta(b1, b2) + delta(b2, b3) + 1e-9


summaries_strategy = st.lists(
    st.builds(summary, st.sampled_from(["a", "b", "c"])), max_size=5,
).map(tuple)


@given(summaries_strategy, summaries_strategy)
@settings(max_examples=60)
def test_delta_box_matches_oracle_and_is_symmetric(t1, t2):
    b1, b2 = BoxBlueprint(t1), BoxBlueprint(t2)
    d = delta(b1, b2)
    assert d == delta(b2, b1)
    assert 0.0 <= d <= 1.0
    longest = max(len(t1), len(t2))
    expected = oracle_levenshtein(t1, t2) / longest if longest else 0.0
    assert d == pytest.approx(expected)
    assert delta(b1, b1) == 0.0


# ---------------------------------------------------------------------------
# Aggregation and serialization
# ---------------------------------------------------------------------------


def test_mode_blueprint_majority_wins():
    a = TreeBlueprint(frozenset({"x"}))
    b = TreeBlueprint(frozenset({"y"}))
    assert mode_blueprint([b, a, a]) == a


def test_mode_blueprint_tie_takes_first_occurrence():
    a = TreeBlueprint(frozenset({"x"}))
    b = TreeBlueprint(frozenset({"y"}))
    assert mode_blueprint([b, a]) == b


def test_mode_blueprint_empty_raises():
    with pytest.raises(DocumentError):
        mode_blueprint([])


def test_blueprint_obj_roundtrip_tree():
    bp = TreeBlueprint(frozenset({"body/table", "body"}))
    assert blueprint_from_obj(blueprint_to_obj(bp)) == bp


def test_blueprint_obj_roundtrip_box():
    doc = scanned_form()
    bp = blueprint_box(BoxRegion(tuple(range(6))), doc, FORM_IDX)
    assert blueprint_from_obj(blueprint_to_obj(bp)) == bp


def test_blueprint_obj_unknown_kind_raises():
    with pytest.raises(DocumentError):
        blueprint_from_obj({"kind": "mystery"})
