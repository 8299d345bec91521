"""Joint clustering of training documents and landmark inference.

Stage 1 groups documents whose whole-document fingerprints match exactly
(fine-grained formats). Stage 2 proposes landmark n-grams per fine
cluster, scores them against the annotated value locations, and
fingerprints the region of interest each candidate induces. Stage 3
merges fine clusters whose ROI fingerprints agree for some shared
candidate, so formats that differ only outside the region of interest
end up in one cluster; the winning landmark is then re-scored on the
merged cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .blueprint import (
    Blueprint,
    blueprint_box,
    blueprint_tree,
    common_values,
    delta,
    frequent_ngrams,
    text_ngrams,
    whole_document_blueprint,
)
from .config import GeometryConfig, ScoringConfig
from .docmodel import (
    Annotation,
    BoxDocument,
    Document,
    DocumentError,
    TreeDocument,
    enclosing_region,
    locate,
    region_locations,
)


@dataclass(frozen=True)
class Cluster:
    """A group of same-kind documents, identified by its sorted doc ids."""

    doc_ids: tuple
    kind: str

    def __post_init__(self) -> None:
        if not self.doc_ids:
            raise DocumentError("cluster must contain at least one document")
        if tuple(sorted(set(self.doc_ids))) != self.doc_ids:
            raise DocumentError("cluster doc ids must be sorted and unique")
        if self.kind not in ("tree", "box"):
            raise DocumentError(f"unknown document kind {self.kind!r}")

    @property
    def cluster_id(self) -> str:
        """The smallest contained doc id; orders clusters and breaks ties."""
        return self.doc_ids[0]


@dataclass(frozen=True)
class LandmarkCandidate:
    """A shared n-gram with its averaged score and feature components."""

    ngram: str
    score: float
    distance: float
    region_size: float


def corpus_index(docs: Sequence[Document]) -> dict:
    """Map doc_id -> document, rejecting missing or duplicate ids."""
    out: dict = {}
    for doc in docs:
        if not doc.doc_id:
            raise DocumentError("clustering needs documents with non-empty doc ids")
        if doc.doc_id in out:
            raise DocumentError(f"duplicate doc id {doc.doc_id!r}")
        out[doc.doc_id] = doc
    return out


# ---------------------------------------------------------------------------
# Initial clustering
# ---------------------------------------------------------------------------


def initial_clusters(docs: Sequence[Document],
                     geometry: GeometryConfig = GeometryConfig(),
                     max_n: int = 5) -> list:
    """Group docs whose whole-document blueprints match exactly.

    Exact match is blueprint equality, which coincides with distance 0
    for both blueprint kinds. Output is ordered by smallest doc id.
    """
    docs = list(docs)
    if not docs:
        raise DocumentError("cannot cluster an empty corpus")
    kinds = {doc.kind for doc in docs}
    if len(kinds) > 1:
        raise DocumentError(f"mixed document kinds in one corpus: {sorted(kinds)}")
    kind = kinds.pop()
    idx = frequent_ngrams(docs, max_n) if kind == "box" else None
    groups: dict = {}
    for doc in docs:
        bp = whole_document_blueprint(doc, idx, geometry)
        groups.setdefault(bp, []).append(doc.doc_id)
    clusters = [Cluster(tuple(sorted(ids)), kind) for ids in groups.values()]
    return sorted(clusters, key=lambda c: c.cluster_id)


# ---------------------------------------------------------------------------
# Landmark candidates
# ---------------------------------------------------------------------------


def _own_texts(doc: Document) -> list:
    if isinstance(doc, TreeDocument):
        return [doc.node(p).text.strip() for p in doc.paths()]
    return [box.text for box in doc.boxes]


def _doc_ngrams(doc: Document, max_n: int) -> set:
    grams: set = set()
    for text in _own_texts(doc):
        grams |= text_ngrams(text, max_n)
    return grams


def _all_stop(gram: str, stop_words: frozenset) -> bool:
    return all(tok.lower() in stop_words for tok in gram.split())


def _hops(p1: tuple, p2: tuple) -> int:
    n = 0
    while n < len(p1) and n < len(p2) and p1[n] == p2[n]:
        n += 1
    return (len(p1) - n) + (len(p2) - n)


def nearest_occurrence(doc: Document, occurrences, value_locs):
    """The occurrence closest in document order to any annotated location.

    This is the training-time ROI anchor. ``occurrences`` arrives in
    document order and min() is stable, so ties resolve to the earlier
    occurrence.
    """
    if isinstance(doc, TreeDocument):
        return _nearest_occurrence(doc.preorder_index, occurrences, value_locs)
    return _nearest_occurrence(lambda i: i, occurrences, value_locs)


def _nearest_occurrence(indices_of, occurrences, value_locs):
    return min(occurrences,
               key=lambda occ: min(abs(indices_of(occ) - indices_of(v))
                                   for v in value_locs))


def _tree_features(doc: TreeDocument, occurrences, value_locs):
    occ = _nearest_occurrence(doc.preorder_index, occurrences, value_locs)
    i = doc.preorder_index(occ)
    dist = min((_hops(occ, v) + 1) + abs(i - doc.preorder_index(v))
               for v in value_locs)
    region = enclosing_region(list(value_locs) + [occ], doc)
    return occ, float(dist), float(len(region_locations(region, doc)))


def _box_features(doc: BoxDocument, occurrences, value_locs):
    occ = _nearest_occurrence(lambda i: i, occurrences, value_locs)

    def center(i):
        b = doc.box(i)
        return (b.x + b.w / 2.0, b.y + b.h / 2.0)

    cx, cy = center(occ)
    dist = min(math.hypot(cx - vx, cy - vy)
               for vx, vy in (center(v) for v in value_locs))
    boxes = [doc.box(i) for i in list(value_locs) + [occ]]
    width = max(b.x + b.w for b in boxes) - min(b.x for b in boxes)
    height = max(b.y + b.h for b in boxes) - min(b.y for b in boxes)
    return occ, float(dist), float(width * height)


def landmark_candidates(cluster: Cluster, corpus: Mapping,
                        annotations: Mapping[str, Annotation],
                        weights: ScoringConfig = ScoringConfig()) -> list:
    """Shared n-grams of the cluster, scored and ranked, best first.

    An n-gram is a candidate when it occurs in every document's own
    texts and at least one of its tokens is not a stop word. Per
    document the score is 1 / (1 + wd*distance + ws*regionSize), where
    the features are measured at the occurrence nearest (in document
    order) to the annotated locations; per-candidate score and features
    are the per-document averages. Ties break lexicographically; at
    most ``weights.top_k`` survive. No shared n-gram yields [].
    """
    docs = [corpus[d] for d in cluster.doc_ids]
    for doc_id in cluster.doc_ids:
        if doc_id not in annotations:
            raise DocumentError(f"document {doc_id!r} has no annotation for scoring")

    shared: Optional[set] = None
    for doc in docs:
        grams = _doc_ngrams(doc, weights.max_n)
        shared = grams if shared is None else shared & grams
    stop = frozenset(w.lower() for w in weights.stop_words)
    shared = {g for g in shared if not _all_stop(g, stop)}
    if not shared:
        return []

    candidates = []
    for gram in sorted(shared):
        scores, dists, sizes = [], [], []
        for doc in docs:
            occurrences = locate(doc, gram)
            value_locs = annotations[doc.doc_id].locations
            if isinstance(doc, TreeDocument):
                _, dist, size = _tree_features(doc, occurrences, value_locs)
            else:
                _, dist, size = _box_features(doc, occurrences, value_locs)
            scores.append(1.0 / (1.0 + weights.w_distance * dist
                                 + weights.w_region_size * size))
            dists.append(dist)
            sizes.append(size)
        n = len(docs)
        candidates.append(LandmarkCandidate(
            ngram=gram,
            score=sum(scores) / n,
            distance=sum(dists) / n,
            region_size=sum(sizes) / n,
        ))
    candidates.sort(key=lambda c: (-c.score, c.ngram))
    return candidates[:weights.top_k]


# ---------------------------------------------------------------------------
# ROI blueprints and cluster merging
# ---------------------------------------------------------------------------


def roi_blueprints(cluster: Cluster, corpus: Mapping, candidates: Sequence,
                   annotations: Mapping[str, Annotation],
                   geometry: GeometryConfig = GeometryConfig(),
                   max_n: int = 5) -> dict:
    """Per doc: (ngram, blueprint) of the ROI each candidate induces.

    The ROI is the enclosing region of the annotated locations plus the
    candidate's first located occurrence. Blueprints are relative to
    the cluster's common-value index (trees) or frequent n-grams
    (boxes). Candidates a document happens not to contain are skipped
    for that document.
    """
    if not candidates:
        raise DocumentError("roi_blueprints needs at least one candidate")
    docs = [corpus[d] for d in cluster.doc_ids]
    if cluster.kind == "tree":
        idx = common_values(docs)
    else:
        idx = frequent_ngrams(docs, max_n)
    out: dict = {}
    for doc_id in cluster.doc_ids:
        doc = corpus[doc_id]
        value_locs = list(annotations[doc_id].locations)
        pairs = []
        for cand in candidates:
            occurrences = locate(doc, cand.ngram)
            if not occurrences:
                continue
            region = enclosing_region(value_locs + [occurrences[0]], doc)
            if cluster.kind == "tree":
                bp = blueprint_tree(region, doc, idx)
            else:
                bp = blueprint_box(region, doc, idx, geometry)
            pairs.append((cand.ngram, bp))
        out[doc_id] = pairs
    return out


def roi_distance(pairs1: Sequence, pairs2: Sequence) -> float:
    """Min blueprint distance over same-landmark pairs; inf if none match."""
    best = math.inf
    for m1, b1 in pairs1:
        for m2, b2 in pairs2:
            if m1 == m2:
                best = min(best, delta(b1, b2))
    return best


def _cluster_distance(c1: Cluster, c2: Cluster, doc_dist) -> float:
    total = 0.0
    for d1 in c1.doc_ids:
        for d2 in c2.doc_ids:
            dd = doc_dist(d1, d2)
            if math.isinf(dd):
                return math.inf
            total += dd
    return total / (len(c1.doc_ids) * len(c2.doc_ids))


def merge_clusters(clusters: Sequence[Cluster], roi_maps: Mapping,
                   threshold: float = 0.0) -> list:
    """Average-linkage agglomeration of clusters with matching ROIs.

    Document distance is ``roi_distance`` over the precomputed maps.
    The pair with the lowest average distance merges first (ties by the
    two cluster ids), repeating while some pair's average is within the
    threshold. Merging is kind-preserving and terminates in fewer than
    ``len(clusters)`` steps.
    """
    merged = sorted(clusters, key=lambda c: c.cluster_id)
    cache: dict = {}

    def doc_dist(d1: str, d2: str) -> float:
        key = (d1, d2) if d1 <= d2 else (d2, d1)
        if key not in cache:
            cache[key] = roi_distance(roi_maps[key[0]], roi_maps[key[1]])
        return cache[key]

    while len(merged) > 1:
        best = None
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                d = _cluster_distance(merged[i], merged[j], doc_dist)
                if d > threshold:
                    continue
                key = (d, merged[i].cluster_id, merged[j].cluster_id)
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            break
        _, i, j = best
        union = Cluster(tuple(sorted(merged[i].doc_ids + merged[j].doc_ids)),
                        merged[i].kind)
        merged = sorted([c for k, c in enumerate(merged) if k not in (i, j)]
                        + [union], key=lambda c: c.cluster_id)
    return merged


def infer_landmarks_and_cluster(docs: Sequence[Document],
                                annotations: Mapping[str, Annotation],
                                weights: ScoringConfig = ScoringConfig(),
                                geometry: GeometryConfig = GeometryConfig(),
                                threshold: float = 0.0) -> list:
    """Full pipeline: fine clusters -> candidates -> ROI merge -> landmarks.

    Returns (cluster, landmark) pairs ordered by cluster id. The
    landmark is the top-scoring candidate recomputed on the merged
    cluster, or None when its documents share no usable n-gram (the
    caller decides how to degrade).
    """
    docs = list(docs)
    if not docs:
        raise DocumentError("cannot infer landmarks from an empty training set")
    corpus = corpus_index(docs)
    fine = initial_clusters(docs, geometry, weights.max_n)

    roi_maps: dict = {}
    for cluster in fine:
        candidates = landmark_candidates(cluster, corpus, annotations, weights)
        if candidates:
            roi_maps.update(roi_blueprints(
                cluster, corpus, candidates, annotations, geometry, weights.max_n))
        else:
            for doc_id in cluster.doc_ids:
                roi_maps[doc_id] = []

    coarse = merge_clusters(fine, roi_maps, threshold)
    out = []
    for cluster in coarse:
        candidates = landmark_candidates(cluster, corpus, annotations, weights)
        out.append((cluster, candidates[0].ngram if candidates else None))
    return out
