"""Deterministic synthetic corpora with designed landmarks.

Each template describes a document family (a tree layout or a box
layout) with one designed landmark phrase per field. Values are unique
single tokens, so no value fragment is ever shared across the corpus —
shared fragments would compete with the designed landmark for the top
rank. Perturbations produce labeled test documents for the robustness
properties: everything outside the regions of interest may change
freely, while in-region structure changes must be caught by the
blueprint gate.
"""

from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .docmodel import (
    AggKind,
    Annotation,
    BoxDocument,
    CONCAT,
    DocumentError,
    Document,
    ORDERED_LIST,
    SINGLE,
    TextBox,
    TreeDocument,
    TreeNode,
    save_annotations,
    serialize_boxes,
    serialize_tree,
)

INSERT_SECTION = "InsertSectionOutsideRoi"
PERMUTE_SECTIONS = "PermuteSections"
DUPLICATE_ROI = "DuplicateRoi"
REMOVE_ROI = "RemoveRoi"
MUTATE_INSIDE_ROI = "MutateInsideRoi"
TRANSLATE_BOXES = "TranslateBoxes"
INSERT_AD_BANNER = "InsertAdBanner"

TREE_PERTURBATIONS = (INSERT_SECTION, PERMUTE_SECTIONS, DUPLICATE_ROI,
                      REMOVE_ROI, MUTATE_INSIDE_ROI, INSERT_AD_BANNER)
BOX_PERTURBATIONS = (INSERT_SECTION, TRANSLATE_BOXES, REMOVE_ROI,
                     MUTATE_INSIDE_ROI, INSERT_AD_BANNER)
ALL_PERTURBATIONS = tuple(sorted(set(TREE_PERTURBATIONS + BOX_PERTURBATIONS)))


@dataclass(frozen=True)
class PerturbationSpec:
    """A batch of perturbed test documents of one kind."""

    kind: str
    count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ALL_PERTURBATIONS:
            raise DocumentError(f"unknown perturbation kind: {self.kind!r}")
        if self.count < 1:
            raise DocumentError("perturbation count must be positive")


@dataclass(frozen=True)
class FieldSpec:
    name: str
    landmark: str       # the designed landmark phrase (a label token)
    agg: str            # single | ordered_list | concat
    value_kind: str     # money | date | code | time | word


@dataclass(frozen=True)
class TemplateSpec:
    corpus_id: str
    kind: str           # tree | box | chassis (a box family)
    seed: int
    title: str
    style: str          # tree: table | dl | divspan; box: plain
    fields: Tuple[FieldSpec, ...]
    noise: Tuple[str, ...]

    @property
    def doc_kind(self) -> str:
        return "tree" if self.kind == "tree" else "box"


# ---------------------------------------------------------------------------
# Vocabulary pools (label tokens never reappear in titles, noise, or ads)
# ---------------------------------------------------------------------------

SINGLE_LABELS = ("Total:", "Order:", "Carrier:", "Status:", "Tracking:",
                 "Balance:", "Due:", "Account:", "Invoice:", "Route:",
                 "Issued:", "Expires:")
LIST_LABELS = ("Items:", "Passengers:", "Stops:", "Tags:", "Seats:",
               "Lines:")
TITLES = ("Order Summary", "Trip Receipt", "Booking Confirmation",
          "Payment Record", "Shipment Notice", "Reservation Details")
NOISE_SENTENCES = ("Thanks for shopping with us",
                   "Please keep this message for your records",
                   "Questions are answered within two business days",
                   "Delivery windows may vary by region",
                   "Rates include all applicable charges")
AD_TEXTS = ("Limited offer save twenty percent today",
            "Download our app for faster checkout",
            "Refer a friend and earn rewards")
TREE_STYLES = ("table", "dl", "divspan")
WORDS = ("amber", "basalt", "cobalt", "dune", "ember", "fjord", "garnet",
         "heron", "indigo", "juniper", "krill", "lumen", "maple", "nadir",
         "onyx", "pumice", "quartz", "russet", "sable", "tundra")

ENGINE_NUMBER = "4567890123456"   # constant so digit-run(13) profiles as a
                                  # cluster-frequent value; never extracted


def _fresh_value(kind: str, rng: random.Random, used: set) -> str:
    for _ in range(1000):
        if kind == "money":
            value = f"${rng.randint(3, 999)}.{rng.randint(0, 99):02d}"
        elif kind == "date":
            value = f"2024-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        elif kind == "code":
            letters = "".join(rng.choice("ABCDEFGHJKLMNPQRSTUVWXYZ")
                              for _ in range(2))
            value = f"{letters}-{rng.randint(1000, 9999)}"
        elif kind == "time":
            value = f"{rng.randint(1, 12)}:{rng.randint(0, 59):02d}"
        elif kind == "word":
            value = f"{rng.choice(WORDS)}-{rng.randint(10, 99)}"
        else:
            raise DocumentError(f"unknown value kind: {kind!r}")
        if value not in used:
            used.add(value)
            return value
    raise DocumentError(f"value pool exhausted for kind {kind!r}")


def design_template(kind: str, seed: int,
                    corpus_id: Optional[str] = None) -> TemplateSpec:
    """A concrete corpus family derived deterministically from the seed."""
    if kind not in ("tree", "box", "chassis"):
        raise DocumentError(f"unknown corpus kind: {kind!r}")
    rng = random.Random(f"{seed}:design:{kind}")
    corpus_id = corpus_id or f"{kind}-{seed}"
    if kind == "chassis":
        # the constant n-grams are budgeted against the frequent-set cut:
        # with six training docs (18 unique value grams) exactly 17
        # constants put the half-corpus engine number on the last kept
        # rank while no per-doc value sneaks in — title 10 grams,
        # footer 6, label 1
        return TemplateSpec(
            corpus_id=corpus_id, kind=kind, seed=seed,
            title="OFFICIAL VEHICLE RECORD CARD", style="plain",
            fields=(FieldSpec("chassis", "Chassis:", CONCAT, "code"),),
            noise=("Keep this certificate",),
        )
    title = rng.choice(TITLES)
    singles = rng.sample(SINGLE_LABELS, 2)
    if kind == "tree":
        fields = (
            FieldSpec("main", singles[0], SINGLE,
                      rng.choice(("money", "date", "code", "time"))),
            FieldSpec("entries", rng.choice(LIST_LABELS), ORDERED_LIST,
                      "word"),
        )
        style = rng.choice(TREE_STYLES)
    else:
        fields = (
            FieldSpec("main", singles[0], SINGLE,
                      rng.choice(("money", "code"))),
            FieldSpec("other", singles[1], SINGLE,
                      rng.choice(("date", "time"))),
        )
        style = "plain"
    noise = tuple(rng.sample(NOISE_SENTENCES, 2))
    return TemplateSpec(corpus_id=corpus_id, kind=kind, seed=seed,
                        title=title, style=style, fields=fields, noise=noise)


# ---------------------------------------------------------------------------
# Document builders
# ---------------------------------------------------------------------------


@dataclass
class GenDoc:
    """One generated document with its gold values and build layout."""

    doc: Document
    gold: Dict[str, object]                  # field -> value (None = absent)
    annotations: Dict[str, Annotation]       # training locations
    layout: dict                             # builder bookkeeping


def _node(tag: str, *children: TreeNode, text: str = "",
          attrs: Optional[dict] = None) -> TreeNode:
    return TreeNode(tag=tag, attrs=attrs or {}, text=text,
                    children=list(children))


def _single_section(style: str, label: str, value: str) -> TreeNode:
    if style == "table":
        return _node("table", _node("tr", _node("td", text=label),
                                    _node("td", text=value)))
    if style == "dl":
        return _node("dl", _node("dt", text=label), _node("dd", text=value))
    return _node("div", _node("span", text=label), _node("span", text=value))


def _list_section(label: str, values: Sequence[str]) -> TreeNode:
    items = [_node("li", text=v) for v in values]
    return _node("div", _node("h3", text=label), _node("ul", *items))


def _build_tree_doc(template: TemplateSpec, doc_id: str,
                    rng: random.Random, used: set) -> GenDoc:
    single, listed = template.fields
    value = _fresh_value(single.value_kind, rng, used)
    items = tuple(_fresh_value(listed.value_kind, rng, used)
                  for _ in range(rng.randint(2, 4)))

    sections: List[Tuple[str, TreeNode]] = [
        (single.name, _single_section(template.style, single.landmark, value)),
        (listed.name, _list_section(listed.landmark, items)),
    ]
    sections.extend(("noise", _node("div", _node("p", text=s)))
                    for s in template.noise)
    order = random.Random(f"{template.seed}:sections").sample(
        range(len(sections)), len(sections))
    body = [_node("div", _node("h1", text=template.title))]
    field_sections: Dict[str, int] = {}
    for pos in order:
        name, section = sections[pos]
        if name != "noise":
            field_sections[name] = len(body)
        body.append(section)
    doc = TreeDocument(_node("body", *body), doc_id=doc_id)

    s = field_sections[single.name]
    if template.style == "table":
        single_loc, label_loc = (s, 0, 1), (s, 0, 0)
    else:
        single_loc, label_loc = (s, 1), (s, 0)
    t = field_sections[listed.name]
    annotations = {
        single.name: Annotation((single_loc,), AggKind(SINGLE), (value,)),
        listed.name: Annotation(tuple((t, 1, i) for i in range(len(items))),
                                AggKind(ORDERED_LIST), items),
    }
    gold = {single.name: value, listed.name: list(items)}
    layout = {"field_sections": field_sections,
              "label_locations": {single.name: label_loc,
                                  listed.name: (t, 0)}}
    return GenDoc(doc=doc, gold=gold, annotations=annotations, layout=layout)


def _box(text: str, x: float, y: float, w: float, h: float = 16.0) -> TextBox:
    return TextBox(text, x, y, w, h)


def _index_of(doc: BoxDocument, text: str) -> int:
    for i, b in enumerate(doc.boxes):
        if b.text == text:
            return i
    raise DocumentError(f"box {text!r} lost during construction")


def _build_box_doc(template: TemplateSpec, doc_id: str,
                   rng: random.Random, used: set) -> GenDoc:
    main, other = template.fields
    values = {f.name: _fresh_value(f.value_kind, rng, used)
              for f in template.fields}
    boxes = [
        _box(template.title, 40, 16, 150),
        _box(main.landmark, 40, 56, 90), _box(values[main.name], 200, 56, 90),
        _box(other.landmark, 40, 96, 90), _box(values[other.name], 200, 96, 90),
        _box(template.noise[0], 40, 152, 240),
        _box(f"Ref {_fresh_value('word', rng, used)}", 40, 192, 160),
    ]
    doc = BoxDocument(boxes, doc_id=doc_id)
    annotations = {}
    pairs = {}
    for f in template.fields:
        label_idx = _index_of(doc, f.landmark)
        value_idx = _index_of(doc, values[f.name])
        annotations[f.name] = Annotation((value_idx,), AggKind(SINGLE),
                                         (values[f.name],))
        pairs[f.name] = (label_idx, value_idx)
    gold = dict(values)
    return GenDoc(doc=doc, gold=gold, annotations=annotations,
                  layout={"field_boxes": pairs})


def _build_chassis_doc(template: TemplateSpec, doc_id: str,
                       rng: random.Random, used: set,
                       with_engine: bool, extras: int) -> GenDoc:
    """Label over a value row of varying width; engine docs end the row
    with the 13-digit number the region walk must stop before."""
    field = template.fields[0]
    chassis = _fresh_value("code", rng, used)
    # two-digit year, so each extra is one clean date-shaped token
    extra_values = [_fresh_value("date", rng, used)[2:].replace("-", "/")
                    for _ in range(extras)]
    boxes = [
        _box(template.title, 40, 12, 150),
        _box(field.landmark, 40, 40, 80),
        _box(chassis, 40, 64, 80),
    ]
    boxes.extend(_box(v, 130 + i * 90, 64, 80)
                 for i, v in enumerate(extra_values))
    if with_engine:
        boxes.append(_box(ENGINE_NUMBER, 130 + extras * 90, 64, 80))
    # the footer sits under the first column only, so the varying tail of
    # the value row never gains or loses a neighbor as the row grows
    boxes.append(_box(template.noise[0], 40, 140, 60))
    doc = BoxDocument(boxes, doc_id=doc_id)
    row = (_index_of(doc, chassis),) + tuple(_index_of(doc, v)
                                             for v in extra_values)
    annotations = {field.name: Annotation(row, AggKind(CONCAT), (chassis,))}
    return GenDoc(doc=doc, gold={field.name: chassis},
                  annotations=annotations,
                  layout={"with_engine": with_engine})


def build_document(template: TemplateSpec, doc_id: str, rng: random.Random,
                   used: set, ordinal: int = 0) -> GenDoc:
    if template.kind == "tree":
        return _build_tree_doc(template, doc_id, rng, used)
    if template.kind == "box":
        return _build_box_doc(template, doc_id, rng, used)
    # chassis: engine docs first so the engine-stopping walk precedes the
    # never-failing row walk in candidate rank (the selection tie-break)
    half = (ordinal % 6) < 3
    return _build_chassis_doc(template, doc_id, rng, used,
                              with_engine=half, extras=(ordinal % 3) + 1)


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


def _apply_tree_perturbation(gen: GenDoc, template: TemplateSpec, kind: str,
                             rng: random.Random, doc_id: str) -> GenDoc:
    root = copy.deepcopy(gen.doc.root)
    gold = dict(gen.gold)
    sections = root.children
    field_sections = dict(gen.layout["field_sections"])
    single_name, listed_name = (f.name for f in template.fields)

    if kind == INSERT_SECTION:
        pos = rng.randint(0, len(sections))
        sections.insert(pos, _node("div", _node(
            "p", text=f"Reference {_fresh_value('word', rng, set())}")))
    elif kind == INSERT_AD_BANNER:
        sections.insert(0, _node("div", _node("span", text=rng.choice(AD_TEXTS)),
                                 attrs={"class": "ad-banner"}))
    elif kind == PERMUTE_SECTIONS:
        order = list(range(len(sections)))
        while True:
            rng.shuffle(order)
            if order != sorted(order):
                break
        root.children = [sections[i] for i in order]
    elif kind == DUPLICATE_ROI:
        idx = field_sections[listed_name]
        sections.insert(idx + 1, copy.deepcopy(sections[idx]))
        gold[listed_name] = gold[listed_name] + gold[listed_name]
    elif kind == REMOVE_ROI:
        name = rng.choice([single_name, listed_name])
        del sections[field_sections[name]]
        gold[name] = None
    elif kind == MUTATE_INSIDE_ROI:
        # retag each label node: the region keeps its shape but its
        # common-value path set no longer matches the blueprint
        for loc in gen.layout["label_locations"].values():
            node = root
            for step in loc:
                node = node.children[step]
            node.tag = "b"
    else:
        raise DocumentError(f"{kind} does not apply to tree documents")
    return GenDoc(doc=TreeDocument(root, doc_id=doc_id), gold=gold,
                  annotations={}, layout={})


def _apply_box_perturbation(gen: GenDoc, template: TemplateSpec, kind: str,
                            rng: random.Random, doc_id: str) -> GenDoc:
    boxes = list(gen.doc.boxes)
    gold = dict(gen.gold)
    max_y = max(b.y + b.h for b in boxes)

    if kind == TRANSLATE_BOXES:
        dx, dy = rng.randint(-40, 300), rng.randint(-40, 300)
        boxes = [TextBox(b.text, b.x + dx, b.y + dy, b.w, b.h) for b in boxes]
    elif kind == INSERT_SECTION:
        boxes.append(_box(f"Note {_fresh_value('word', rng, set())}",
                          40, max_y + 400, 160))
    elif kind == INSERT_AD_BANNER:
        boxes.append(_box(rng.choice(AD_TEXTS), 40, max_y + 460, 300))
    elif kind == REMOVE_ROI:
        name = rng.choice(sorted(gen.layout["field_boxes"]))
        label_idx, value_idx = gen.layout["field_boxes"][name]
        for i in sorted((label_idx, value_idx), reverse=True):
            del boxes[i]
        gold[name] = None
    elif kind == MUTATE_INSIDE_ROI:
        # wedge a copy of the title (a cluster-frequent value) between
        # each label and its value: the region walk now summarizes a
        # frequent neighbor where training saw a variable one
        for name in sorted(gen.layout["field_boxes"]):
            label_idx, _ = gen.layout["field_boxes"][name]
            label = gen.doc.box(label_idx)
            boxes.append(_box(template.title, label.x + label.w + 6,
                              label.y, 56, label.h))
    else:
        raise DocumentError(f"{kind} does not apply to box documents")
    return GenDoc(doc=BoxDocument(boxes, doc_id=doc_id), gold=gold,
                  annotations={}, layout={})


def perturb_document(gen: GenDoc, template: TemplateSpec, kind: str,
                     rng: random.Random, doc_id: str) -> GenDoc:
    allowed = (TREE_PERTURBATIONS if template.doc_kind == "tree"
               else BOX_PERTURBATIONS)
    if kind not in allowed:
        raise DocumentError(
            f"perturbation {kind!r} does not apply to {template.doc_kind} corpora")
    if template.doc_kind == "tree":
        return _apply_tree_perturbation(gen, template, kind, rng, doc_id)
    return _apply_box_perturbation(gen, template, kind, rng, doc_id)


# ---------------------------------------------------------------------------
# Corpus assembly
# ---------------------------------------------------------------------------


def _doc_filename(doc: Document) -> str:
    suffix = ".boxes.json" if isinstance(doc, BoxDocument) else ".json"
    return f"{doc.doc_id}{suffix}"


def _write_doc(doc: Document, docs_dir: Path) -> str:
    payload = (serialize_boxes(doc) if isinstance(doc, BoxDocument)
               else serialize_tree(doc))
    name = _doc_filename(doc)
    (docs_dir / name).write_bytes(payload + b"\n")
    return f"docs/{name}"


def generate_corpus(template: TemplateSpec, out_dir: str | Path,
                    train_docs: int = 5, test_docs: int = 0,
                    perturbations: Sequence[PerturbationSpec] = ()) -> dict:
    """Write a corpus directory and return (and save) its manifest.

    Layout: ``docs/`` holds one file per document, ``annotations.json``
    covers the training documents, ``gold.jsonl`` holds one record per
    (document, field), and ``manifest.json`` ties everything together.
    Identical arguments produce byte-identical output.
    """
    if train_docs < 1:
        raise DocumentError("a corpus needs at least one training document")
    out = Path(out_dir)
    docs_dir = out / "docs"
    docs_dir.mkdir(parents=True, exist_ok=True)

    used: set = set()
    entries = []
    annotations: Dict[str, dict] = {}
    gold_records = []

    def register(gen: GenDoc, role: str, perturbation: Optional[str]) -> None:
        file = _write_doc(gen.doc, docs_dir)
        entries.append({"doc_id": gen.doc.doc_id, "file": file, "role": role,
                        "perturbation": perturbation})
        if role == "train":
            annotations[gen.doc.doc_id] = gen.annotations
        for f in template.fields:
            gold_records.append({"doc_id": gen.doc.doc_id, "field": f.name,
                                 "value": gen.gold.get(f.name)})

    for i in range(train_docs):
        rng = random.Random(f"{template.seed}:train:{i}")
        register(build_document(template, f"train-{i:03d}", rng, used, i),
                 "train", None)
    for i in range(test_docs):
        rng = random.Random(f"{template.seed}:test:{i}")
        register(build_document(template, f"test-{i:03d}", rng, used,
                                train_docs + i), "test", None)
    for spec in perturbations:
        slug = spec.kind.lower()
        for i in range(spec.count):
            rng = random.Random(
                f"{template.seed}:{spec.seed}:perturb:{spec.kind}:{i}")
            base = build_document(template, f"{slug}-{i:03d}", rng, used,
                                  train_docs + test_docs + i)
            register(perturb_document(base, template, spec.kind, rng,
                                      base.doc.doc_id), "perturbed", spec.kind)

    manifest = {
        "corpus_id": template.corpus_id,
        "kind": template.doc_kind,
        "family": template.kind,
        "seed": template.seed,
        "style": template.style,
        "title": template.title,
        "fields": [{"name": f.name, "landmark": f.landmark, "agg": f.agg,
                    "value_kind": f.value_kind} for f in template.fields],
        "docs": entries,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    save_annotations(annotations, out / "annotations.json")
    gold_records.sort(key=lambda r: (r["doc_id"], r["field"]))
    with open(out / "gold.jsonl", "w", encoding="utf-8") as fh:
        for record in gold_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest
