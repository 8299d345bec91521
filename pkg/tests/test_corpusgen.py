"""Synthetic corpus generator: determinism, gold bookkeeping, perturbations.

The outside-ROI perturbations are checked against structural oracles:
serialized-subtree diffs for trees (untouched sections must survive
byte-identically) and pairwise center deltas for boxes (translation may
not change any relative offset).
"""

from __future__ import annotations

import json
import random

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from landex.corpusgen import (
    BOX_PERTURBATIONS,
    DUPLICATE_ROI,
    ENGINE_NUMBER,
    INSERT_AD_BANNER,
    INSERT_SECTION,
    MUTATE_INSIDE_ROI,
    PERMUTE_SECTIONS,
    REMOVE_ROI,
    TRANSLATE_BOXES,
    TREE_PERTURBATIONS,
    PerturbationSpec,
    build_document,
    design_template,
    generate_corpus,
    perturb_document,
)
from landex.docmodel import (
    DocumentError,
    TreeDocument,
    data_at,
    load_annotations,
    load_document,
    locate,
    serialize_tree,
)


def tree_template(seed=0):
    return design_template("tree", seed)


def box_template(seed=0):
    return design_template("box", seed)


def build(template, doc_id="d0", ordinal=0, salt="t"):
    return build_document(template, doc_id, random.Random(salt), set(), ordinal)


def perturbed(template, kind, ordinal=0, salt="p"):
    gen = build(template, "base", ordinal, salt)
    return gen, perturb_document(gen, template, kind,
                                 random.Random(salt + kind), "mut")


def section_bytes(doc: TreeDocument):
    return [serialize_tree(TreeDocument(child, doc_id="s"))
            for child in doc.root.children]


# ---------------------------------------------------------------------------
# Templates and document construction
# ---------------------------------------------------------------------------


def test_design_template_is_deterministic():
    assert design_template("tree", 7) == design_template("tree", 7)
    assert design_template("tree", 7) != design_template("tree", 8)


def test_design_template_rejects_unknown_kind():
    with pytest.raises(DocumentError):
        design_template("pdf", 0)


def test_tree_annotations_resolve_to_their_values():
    template = tree_template()
    gen = build(template)
    for field in template.fields:
        ann = gen.annotations[field.name]
        texts = [data_at(gen.doc, loc) for loc in ann.locations]
        assert tuple(texts) == ann.values
        assert gen.gold[field.name] == ann.expected()


def test_box_annotations_resolve_to_their_values():
    template = box_template()
    gen = build(template)
    for field in template.fields:
        ann = gen.annotations[field.name]
        assert data_at(gen.doc, ann.locations[0]) == ann.values[0]


def test_designed_landmark_occurs_exactly_once():
    for template in (tree_template(), box_template()):
        gen = build(template)
        for field in template.fields:
            assert len(locate(gen.doc, field.landmark)) == 1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["tree", "box"]))
def test_any_seed_builds_resolvable_documents(seed, kind):
    template = design_template(kind, seed)
    gen = build(template, salt=f"s{seed}")
    for field in template.fields:
        ann = gen.annotations[field.name]
        assert tuple(data_at(gen.doc, loc) for loc in ann.locations) == ann.values


def test_field_values_unique_within_a_corpus(tmp_path):
    generate_corpus(tree_template(), tmp_path, train_docs=6, test_docs=4)
    values = []
    for line in (tmp_path / "gold.jsonl").read_text().splitlines():
        v = json.loads(line)["value"]
        values.extend(v if isinstance(v, list) else [v])
    assert len(values) == len(set(values))


# ---------------------------------------------------------------------------
# Tree perturbations against the subtree-diff oracle
# ---------------------------------------------------------------------------


def test_insert_section_keeps_roi_subtrees_byte_identical():
    gen, mut = perturbed(tree_template(), INSERT_SECTION)
    before, after = section_bytes(gen.doc), section_bytes(mut.doc)
    assert len(after) == len(before) + 1
    leftover = list(after)
    for blob in before:
        leftover.remove(blob)  # every original section survives untouched
    assert len(leftover) == 1
    assert mut.gold == gen.gold


def test_ad_banner_lands_first_and_changes_nothing_else():
    gen, mut = perturbed(tree_template(), INSERT_AD_BANNER)
    before, after = section_bytes(gen.doc), section_bytes(mut.doc)
    assert after[1:] == before
    assert mut.doc.root.children[0].attrs.get("class") == "ad-banner"
    assert mut.gold == gen.gold


def test_permute_sections_is_a_proper_permutation():
    gen, mut = perturbed(tree_template(), PERMUTE_SECTIONS)
    before, after = section_bytes(gen.doc), section_bytes(mut.doc)
    assert sorted(before) == sorted(after)
    assert before != after
    assert mut.gold == gen.gold


def test_duplicate_roi_doubles_the_list_gold():
    template = tree_template()
    gen, mut = perturbed(template, DUPLICATE_ROI)
    single, listed = template.fields
    assert mut.gold[single.name] == gen.gold[single.name]
    assert mut.gold[listed.name] == gen.gold[listed.name] * 2
    assert len(locate(mut.doc, listed.landmark)) == 2


def test_remove_roi_drops_landmark_and_gold():
    template = tree_template()
    gen, mut = perturbed(template, REMOVE_ROI)
    removed = [f.name for f in template.fields if mut.gold[f.name] is None]
    assert len(removed) == 1
    field = next(f for f in template.fields if f.name == removed[0])
    assert locate(mut.doc, field.landmark) == []
    other = next(f for f in template.fields if f.name != removed[0])
    assert mut.gold[other.name] == gen.gold[other.name]


def test_mutate_inside_roi_retags_labels_only():
    template = tree_template()
    gen, mut = perturbed(template, MUTATE_INSIDE_ROI)
    # visible text is untouched: only structure inside the ROI changed
    assert data_at(mut.doc, ()) == data_at(gen.doc, ())
    assert mut.gold == gen.gold
    retagged = [loc for loc in gen.layout["label_locations"].values()
                if mut.doc.node(loc).tag == "b"]
    assert len(retagged) == len(template.fields)


# ---------------------------------------------------------------------------
# Box perturbations
# ---------------------------------------------------------------------------


def test_translate_boxes_preserves_relative_geometry():
    gen, mut = perturbed(box_template(), TRANSLATE_BOXES)
    a, b = gen.doc.boxes, mut.doc.boxes
    assert [x.text for x in a] == [x.text for x in b]
    dx, dy = b[0].x - a[0].x, b[0].y - a[0].y
    assert (dx, dy) != (0, 0)
    for box_a, box_b in zip(a, b):
        assert (box_b.x - box_a.x, box_b.y - box_a.y) == (dx, dy)
        assert (box_b.w, box_b.h) == (box_a.w, box_a.h)
    assert mut.gold == gen.gold


def test_box_insertions_land_far_outside_the_layout():
    for kind in (INSERT_SECTION, INSERT_AD_BANNER):
        gen, mut = perturbed(box_template(), kind)
        assert len(mut.doc.boxes) == len(gen.doc.boxes) + 1
        extent = max(b.y + b.h for b in gen.doc.boxes)
        assert mut.doc.boxes[-1].y >= extent + 400  # beyond any neighbor cone
        assert mut.gold == gen.gold


def test_box_mutate_wedges_a_frequent_box_between_label_and_value():
    template = box_template()
    gen, mut = perturbed(template, MUTATE_INSIDE_ROI)
    assert len(mut.doc.boxes) == len(gen.doc.boxes) + len(template.fields)
    for field in template.fields:
        label_idx, value_idx = gen.layout["field_boxes"][field.name]
        label, value = gen.doc.box(label_idx), gen.doc.box(value_idx)
        wedge = next(b for b in mut.doc.boxes
                     if b.text == template.title and b.y == label.y)
        assert label.x + label.w < wedge.x < wedge.x + wedge.w < value.x
    assert mut.gold == gen.gold  # the true value is still on the page


def test_box_remove_roi_deletes_the_label_value_pair():
    template = box_template()
    gen, mut = perturbed(template, REMOVE_ROI)
    removed = [f for f in template.fields if mut.gold[f.name] is None]
    assert len(removed) == 1
    assert locate(mut.doc, removed[0].landmark) == []
    assert len(mut.doc.boxes) == len(gen.doc.boxes) - 2


# ---------------------------------------------------------------------------
# Applicability and validation
# ---------------------------------------------------------------------------


def test_perturbation_kind_matrix_is_enforced():
    tree_gen = build(tree_template())
    with pytest.raises(DocumentError):
        perturb_document(tree_gen, tree_template(), TRANSLATE_BOXES,
                         random.Random(0), "x")
    box_gen = build(box_template())
    for kind in (PERMUTE_SECTIONS, DUPLICATE_ROI):
        with pytest.raises(DocumentError):
            perturb_document(box_gen, box_template(), kind,
                             random.Random(0), "x")
    assert set(TREE_PERTURBATIONS) & set(BOX_PERTURBATIONS) == {
        INSERT_SECTION, REMOVE_ROI, MUTATE_INSIDE_ROI, INSERT_AD_BANNER}


def test_perturbation_spec_validation():
    with pytest.raises(DocumentError):
        PerturbationSpec("ShuffleEverything", 1)
    with pytest.raises(DocumentError):
        PerturbationSpec(REMOVE_ROI, 0)


# ---------------------------------------------------------------------------
# Corpus layout on disk
# ---------------------------------------------------------------------------


def test_same_seed_generates_identical_bytes(tmp_path):
    specs = (PerturbationSpec(REMOVE_ROI, 2), PerturbationSpec(PERMUTE_SECTIONS, 2))
    for d in ("a", "b"):
        generate_corpus(tree_template(5), tmp_path / d, train_docs=4,
                        test_docs=2, perturbations=specs)
    files_a = sorted(p.relative_to(tmp_path / "a")
                     for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b")
                     for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == \
            (tmp_path / "b" / rel).read_bytes()


def test_manifest_names_every_document_once(tmp_path):
    manifest = generate_corpus(box_template(), tmp_path, train_docs=3,
                               test_docs=2,
                               perturbations=(PerturbationSpec(REMOVE_ROI, 2),))
    ids = [e["doc_id"] for e in manifest["docs"]]
    assert len(ids) == len(set(ids)) == 7
    roles = [e["role"] for e in manifest["docs"]]
    assert roles.count("train") == 3
    assert roles.count("test") == 2
    assert roles.count("perturbed") == 2
    for entry in manifest["docs"]:
        path = tmp_path / entry["file"]
        assert path.is_file()
        assert load_document(path).doc_id == entry["doc_id"]
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest


def test_annotations_cover_training_docs_only(tmp_path):
    generate_corpus(tree_template(), tmp_path, train_docs=3, test_docs=2)
    ann = load_annotations(tmp_path / "annotations.json")
    assert sorted(ann) == ["train-000", "train-001", "train-002"]
    assert sorted(ann["train-000"]) == sorted(
        f.name for f in tree_template().fields)


def test_gold_covers_every_doc_field_pair_sorted(tmp_path):
    manifest = generate_corpus(tree_template(), tmp_path, train_docs=2,
                               perturbations=(PerturbationSpec(REMOVE_ROI, 1),))
    records = [json.loads(line)
               for line in (tmp_path / "gold.jsonl").read_text().splitlines()]
    keys = [(r["doc_id"], r["field"]) for r in records]
    assert keys == sorted(keys)
    fields = sorted(f.name for f in tree_template().fields)
    assert keys == sorted((e["doc_id"], f) for e in manifest["docs"]
                          for f in fields)
    assert any(r["value"] is None for r in records)  # the removed ROI


def test_empty_training_request_rejected(tmp_path):
    with pytest.raises(DocumentError):
        generate_corpus(tree_template(), tmp_path, train_docs=0)


# ---------------------------------------------------------------------------
# The chassis family
# ---------------------------------------------------------------------------


def test_chassis_halves_and_row_shapes():
    template = design_template("chassis", 0)
    rows = []
    for ordinal in range(6):
        gen = build(template, f"d{ordinal}", ordinal, salt=f"c{ordinal}")
        has_engine = ENGINE_NUMBER in [b.text for b in gen.doc.boxes]
        rows.append((ordinal, has_engine, len(gen.annotations["chassis"].locations)))
    assert [r[1] for r in rows] == [True] * 3 + [False] * 3
    assert [r[2] for r in rows] == [2, 3, 4, 2, 3, 4]  # value + 1..3 extras


def test_chassis_annotation_concats_the_row():
    template = design_template("chassis", 0)
    gen = build(template, ordinal=1)
    ann = gen.annotations["chassis"]
    assert ann.agg.kind == "concat"
    assert ann.expected() == gen.gold["chassis"]
    assert data_at(gen.doc, ann.locations[0]) == gen.gold["chassis"]
    assert ENGINE_NUMBER not in [data_at(gen.doc, loc) for loc in ann.locations]
