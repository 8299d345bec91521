"""Structural fingerprints of regions and the distance that compares them.

A tree blueprint is the set of index-free tag paths leading to the
common-value nodes of a region; a box blueprint is the document-ordered
list of BoxSummary records (one per frequent-n-gram box in the region,
describing what sits on each of its four sides). Blueprints drive both
clustering (whole-document and ROI fingerprints) and the runtime gate
that rejects regions whose layout drifted from training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .config import GeometryConfig
from .docmodel import (
    BoxDocument,
    BoxRegion,
    DocumentError,
    TreeDocument,
    TreeRegion,
    data_at,
    region_locations,
)

# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeBlueprint:
    paths: frozenset  # of "tag/tag/..." strings, positional indices stripped

    def sorted_paths(self) -> list:
        return sorted(self.paths)


ABSENT = "absent"
FREQUENT = "frequent"
VARIABLE = "variable"


@dataclass(frozen=True)
class NeighborContent:
    """What sits immediately next to a box: nothing, a frequent n-gram,
    or variable text."""

    kind: str
    ngram: str = ""

    def __post_init__(self) -> None:
        if self.kind not in (ABSENT, FREQUENT, VARIABLE):
            raise ValueError(f"bad neighbor kind {self.kind!r}")
        if self.kind != FREQUENT and self.ngram:
            raise ValueError("only frequent neighbors carry an ngram")


@dataclass(frozen=True)
class BoxSummary:
    ngram: str
    top: NeighborContent
    left: NeighborContent
    right: NeighborContent
    bottom: NeighborContent


@dataclass(frozen=True)
class BoxBlueprint:
    summaries: tuple  # of BoxSummary, in document order


Blueprint = Union[TreeBlueprint, BoxBlueprint]


@dataclass(frozen=True)
class CommonValueIndex:
    """Cluster-level text statistics backing blueprint construction.

    ``values`` (trees): strings that appear as some node's data in every
    document of the cluster. ``frequent`` (boxes): (ngram, doc count)
    pairs, ranked, truncated to the top half.
    """

    values: frozenset = frozenset()
    frequent: tuple = ()

    def frequent_set(self) -> frozenset:
        return frozenset(ng for ng, _ in self.frequent)


# ---------------------------------------------------------------------------
# Common-value mining
# ---------------------------------------------------------------------------


def common_values(cluster: Sequence[TreeDocument]) -> CommonValueIndex:
    """Values (node data strings, non-empty, trimmed) present in every doc."""
    if not cluster:
        raise DocumentError("empty cluster")
    shared = None
    for doc in cluster:
        doc_values = {data_at(doc, p) for p in doc.paths()}
        doc_values.discard("")
        shared = doc_values if shared is None else shared & doc_values
    return CommonValueIndex(values=frozenset(shared))


def text_ngrams(text: str, max_n: int) -> set:
    """All word n-grams (1..max_n, space-joined) of one text."""
    words = text.split()
    grams = set()
    for n in range(1, max_n + 1):
        for i in range(len(words) - n + 1):
            grams.add(" ".join(words[i:i + n]))
    return grams


def frequent_ngrams(cluster: Sequence[BoxDocument], max_n: int = 5) -> CommonValueIndex:
    """The top half of box-text n-grams, ranked by document frequency.

    Exactly ceil(distinct/2) entries survive; ties break lexicographically.
    """
    if not cluster:
        raise DocumentError("empty cluster")
    counts: dict[str, int] = {}
    for doc in cluster:
        doc_grams = set()
        for box in doc.boxes:
            doc_grams |= text_ngrams(box.text, max_n)
        for gram in doc_grams:
            counts[gram] = counts.get(gram, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = math.ceil(len(ranked) / 2)
    return CommonValueIndex(frequent=tuple(ranked[:keep]))


# ---------------------------------------------------------------------------
# Tree blueprints
# ---------------------------------------------------------------------------


def _tag_path(doc: TreeDocument, path, region: TreeRegion) -> str:
    """Index-free tag path of a member node, relative to the region anchor."""
    start_len = 0 if region.anchor is None else len(region.anchor) + 1
    return "/".join(doc.node(path[:k]).tag for k in range(start_len, len(path) + 1))


def blueprint_tree(region: TreeRegion, doc: TreeDocument,
                   idx: Optional[CommonValueIndex]) -> TreeBlueprint:
    """Tag paths (indices stripped) to the region's common-value nodes.

    With ``idx=None`` every node counts, yielding the pure structural
    fingerprint used for whole-document clustering.
    """
    paths = set()
    for p in region_locations(region, doc):
        if idx is not None and data_at(doc, p) not in idx.values:
            continue
        paths.add(_tag_path(doc, p, region))
    return TreeBlueprint(paths=frozenset(paths))


# ---------------------------------------------------------------------------
# Box blueprints
# ---------------------------------------------------------------------------

_DIRS = ("top", "left", "right", "bottom")


def _cone_neighbor(doc: BoxDocument, member_indices, source, direction,
                   geometry: GeometryConfig):
    """Nearest region box within a 90-degree cone on the given side.

    Overlap of the perpendicular projections is required; the side reads
    Absent when the nearest candidate sits farther than the cutoff factor
    times the source box's extent along that axis.
    """
    src = doc.box(source)
    best = None
    for i in member_indices:
        if i == source:
            continue
        b = doc.box(i)
        dx = b.cx - src.cx
        dy = b.cy - src.cy
        if direction == "right":
            in_cone = dx > 0 and abs(dy) <= dx
            overlap = min(src.y + src.h, b.y + b.h) - max(src.y, b.y)
        elif direction == "left":
            in_cone = dx < 0 and abs(dy) <= -dx
            overlap = min(src.y + src.h, b.y + b.h) - max(src.y, b.y)
        elif direction == "bottom":
            in_cone = dy > 0 and abs(dx) <= dy
            overlap = min(src.x + src.w, b.x + b.w) - max(src.x, b.x)
        else:  # top
            in_cone = dy < 0 and abs(dx) <= -dy
            overlap = min(src.x + src.w, b.x + b.w) - max(src.x, b.x)
        if not in_cone or overlap <= 0:
            continue
        dist = math.hypot(dx, dy)
        if best is None or dist < best[0] or (dist == best[0] and i < best[1]):
            best = (dist, i)
    if best is None:
        return None
    extent = src.w if direction in ("left", "right") else src.h
    if best[0] > geometry.absent_distance_factor * extent:
        return None
    return best[1]


def blueprint_box(region: BoxRegion, doc: BoxDocument, idx: CommonValueIndex,
                  geometry: GeometryConfig = GeometryConfig()) -> BoxBlueprint:
    """One BoxSummary per frequent box of the region, in document order.

    Neighbor classification looks only at boxes inside the region, so the
    fingerprint is untouched by anything beyond the region boundary.
    """
    frequent = idx.frequent_set()
    members = sorted(region.indices)
    summaries = []
    for i in members:
        text = doc.box(i).text.strip()
        if text not in frequent:
            continue
        sides = {}
        for direction in _DIRS:
            nb = _cone_neighbor(doc, members, i, direction, geometry)
            if nb is None:
                sides[direction] = NeighborContent(ABSENT)
            else:
                nb_text = doc.box(nb).text.strip()
                if nb_text in frequent:
                    sides[direction] = NeighborContent(FREQUENT, nb_text)
                else:
                    sides[direction] = NeighborContent(VARIABLE)
        summaries.append(BoxSummary(ngram=text, **sides))
    return BoxBlueprint(summaries=tuple(summaries))


def whole_document_blueprint(doc, idx: Optional[CommonValueIndex] = None,
                             geometry: GeometryConfig = GeometryConfig()) -> Blueprint:
    """Fingerprint of the entire document (region = whole doc).

    Trees use every node (no common-value filter); boxes need a frequent
    n-gram index, normally computed over the whole training corpus.
    """
    if isinstance(doc, TreeDocument):
        return blueprint_tree(TreeRegion(None, 0, 0), doc, None)
    if idx is None:
        raise DocumentError("box whole-document blueprint needs a frequent-ngram index")
    if not doc.boxes:
        return BoxBlueprint(summaries=())
    return blueprint_box(BoxRegion(tuple(range(len(doc.boxes)))), doc, idx, geometry)


# ---------------------------------------------------------------------------
# Blueprint distance
# ---------------------------------------------------------------------------


def _levenshtein(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, item_a in enumerate(a, start=1):
        cur = [i]
        for j, item_b in enumerate(b, start=1):
            cost = 0 if item_a == item_b else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def delta(b1: Blueprint, b2: Blueprint) -> float:
    """Blueprint distance in [0, 1].

    Trees: Jaccard distance over path sets (two empty sets are identical).
    Boxes: Levenshtein over summary sequences, normalized by the longer
    length.
    """
    if isinstance(b1, TreeBlueprint) and isinstance(b2, TreeBlueprint):
        union = b1.paths | b2.paths
        if not union:
            return 0.0
        return 1.0 - len(b1.paths & b2.paths) / len(union)
    if isinstance(b1, BoxBlueprint) and isinstance(b2, BoxBlueprint):
        longest = max(len(b1.summaries), len(b2.summaries))
        if longest == 0:
            return 0.0
        return _levenshtein(b1.summaries, b2.summaries) / longest
    raise DocumentError(
        f"cannot compare blueprints of different kinds: {type(b1).__name__} vs {type(b2).__name__}"
    )


def mode_blueprint(blueprints: Sequence[Blueprint]) -> Blueprint:
    """The most frequent blueprint; ties go to the earliest occurrence."""
    if not blueprints:
        raise DocumentError("no blueprints to aggregate")
    best = None
    best_count = 0
    for i, bp in enumerate(blueprints):
        count = sum(1 for other in blueprints if other == bp)
        if count > best_count:
            best, best_count = bp, count
    return best


# ---------------------------------------------------------------------------
# Serialization (stable ordering for byte-identical bundles)
# ---------------------------------------------------------------------------


def _neighbor_to_obj(nc: NeighborContent):
    if nc.kind == FREQUENT:
        return {"kind": FREQUENT, "ngram": nc.ngram}
    return {"kind": nc.kind}


def _neighbor_from_obj(obj) -> NeighborContent:
    return NeighborContent(obj["kind"], obj.get("ngram", ""))


def blueprint_to_obj(bp: Blueprint) -> dict:
    if isinstance(bp, TreeBlueprint):
        return {"kind": "tree", "paths": bp.sorted_paths()}
    return {
        "kind": "box",
        "summaries": [
            {
                "ngram": s.ngram,
                "top": _neighbor_to_obj(s.top),
                "left": _neighbor_to_obj(s.left),
                "right": _neighbor_to_obj(s.right),
                "bottom": _neighbor_to_obj(s.bottom),
            }
            for s in bp.summaries
        ],
    }


def blueprint_from_obj(obj: dict) -> Blueprint:
    if obj["kind"] == "tree":
        return TreeBlueprint(paths=frozenset(obj["paths"]))
    if obj["kind"] == "box":
        return BoxBlueprint(summaries=tuple(
            BoxSummary(
                ngram=s["ngram"],
                top=_neighbor_from_obj(s["top"]),
                left=_neighbor_from_obj(s["left"]),
                right=_neighbor_from_obj(s["right"]),
                bottom=_neighbor_from_obj(s["bottom"]),
            )
            for s in obj["summaries"]
        ))
    raise DocumentError(f"unknown blueprint kind {obj.get('kind')!r}")
