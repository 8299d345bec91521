"""Hop-based region programs for tree documents.

A HopsProgram relocates a region relative to a landmark occurrence:
climb ``parent_hops`` ancestors to a node n1, then take the sibling
span [idx(n1) - left_hops, idx(n1) + right_hops] under n1's parent.
Learning finds the per-document minimal program via the lowest common
ancestor of landmark and values; reconciliation combines documents by
maximizing the parent hops and re-deriving each document's sibling
offsets at that forced depth before maximizing those too.

Execution never clamps: a sibling span that leaves the anchor's child
range signals a layout mismatch and yields None (the caller treats it
like a failed blueprint gate). The one boundary that cannot overflow is
the root — a program that climbs all the way up denotes the whole
document, since there is no sibling axis there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .docmodel import (
    DocumentError,
    TreeDocument,
    TreePath,
    TreeRegion,
    enclosing_region,
)


class RegionConflictError(DocumentError):
    """Cluster documents disagree too much for one hops program.

    Raised during reconciliation when a forced parent depth underflows a
    document's landmark depth (landmarks at different depths) or a value
    escapes the forced anchor. Callers typically drop the cluster.
    """


@dataclass(frozen=True)
class HopsProgram:
    parent_hops: int
    left_hops: int
    right_hops: int

    def __post_init__(self) -> None:
        for field in ("parent_hops", "left_hops", "right_hops"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be >= 0")


@dataclass(frozen=True)
class HopsExample:
    """One training document with its landmark and annotated locations."""

    doc: TreeDocument
    landmark: TreePath
    values: tuple  # of TreePath, non-empty


def learn_hops(doc: TreeDocument, landmark_loc: TreePath,
               value_locs: Sequence[TreePath]) -> HopsProgram:
    """The minimal hops program for one document.

    Equivalent to taking the smallest enclosing region of the landmark
    and all values and reading the hop counts off it. When a value is an
    ancestor of the landmark the enclosing region is that ancestor's own
    subtree, so the program climbs one level past the LCA.
    """
    if not value_locs:
        raise DocumentError("cannot learn a region from zero value locations")
    region = enclosing_region([landmark_loc, *value_locs], doc)
    if region.anchor is None:
        return HopsProgram(len(landmark_loc), 0, 0)
    a = len(region.anchor)
    j = landmark_loc[a]
    return HopsProgram(len(landmark_loc) - a - 1, j - region.start, region.end - j)


def exec_hops(prog: HopsProgram, doc: TreeDocument,
              landmark_loc: TreePath) -> Optional[TreeRegion]:
    """Apply a hops program at one landmark occurrence; None on mismatch."""
    cut = len(landmark_loc) - prog.parent_hops
    if cut < 0:
        return None
    if cut == 0:
        return TreeRegion(None, 0, 0)
    anchor = landmark_loc[:cut - 1]
    j = landmark_loc[cut - 1]
    start = j - prog.left_hops
    end = j + prog.right_hops
    if start < 0 or end >= len(doc.node(anchor).children):
        return None
    return TreeRegion(anchor, start, end)


def _offsets_at(example: HopsExample, parent_hops: int) -> tuple:
    """Sibling offsets for one document with the parent depth forced.

    Well-defined whenever ``parent_hops`` is at least the document's own
    learned value: raising the anchor only widens the subtree, so every
    value stays below it.
    """
    landmark = example.landmark
    cut = len(landmark) - parent_hops
    if cut < 0:
        raise RegionConflictError(
            f"doc {example.doc.doc_id!r}: landmark depth {len(landmark)} "
            f"cannot absorb {parent_hops} parent hops")
    if cut == 0:
        return 0, 0  # the whole document; offsets are moot
    anchor = landmark[:cut - 1]
    j = landmark[cut - 1]
    idxs = [j]
    for v in example.values:
        if len(v) <= len(anchor) or v[:len(anchor)] != anchor:
            raise RegionConflictError(
                f"doc {example.doc.doc_id!r}: value {v} escapes the forced anchor")
        idxs.append(v[len(anchor)])
    return j - min(idxs), max(idxs) - j


def reconcile_hops(examples: Sequence[HopsExample]) -> HopsProgram:
    """Combine per-document programs into one covering every example.

    Parent hops is the maximum of the learned values; each document's
    sibling offsets are re-derived at that depth and maximized side by
    side. The result's region on any training document is a superset of
    that document's minimal region.
    """
    if not examples:
        raise DocumentError("cannot reconcile zero examples")
    parent = max(
        learn_hops(ex.doc, ex.landmark, ex.values).parent_hops for ex in examples
    )
    left = right = 0
    for ex in examples:
        sl, sr = _offsets_at(ex, parent)
        left = max(left, sl)
        right = max(right, sr)
    return HopsProgram(parent, left, right)


def hops_to_obj(prog: HopsProgram) -> dict:
    return {
        "parentHops": prog.parent_hops,
        "siblingHopsLeft": prog.left_hops,
        "siblingHopsRight": prog.right_hops,
    }


def hops_from_obj(obj: dict) -> HopsProgram:
    return HopsProgram(obj["parentHops"], obj["siblingHopsLeft"],
                       obj["siblingHopsRight"])
