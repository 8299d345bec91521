"""Program assembly and the Extract operator.

A field's extraction program is an ordered list of tuples
(landmark, region program, blueprint, value program, optional guard),
one per document cluster. Extraction walks the tuples: every landmark
occurrence proposes a region, the region's fingerprint is gated against
the trained blueprint, surviving regions run the value program, and the
first tuple producing any values wins. Everything else here exists to
build those tuples from annotated training documents and to persist
them losslessly.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .blueprint import (
    Blueprint,
    CommonValueIndex,
    TreeBlueprint,
    blueprint_box,
    blueprint_from_obj,
    blueprint_to_obj,
    blueprint_tree,
    common_values,
    delta,
    frequent_ngrams,
    mode_blueprint,
)
from .cluster import (
    Cluster,
    corpus_index,
    infer_landmarks_and_cluster,
    landmark_candidates,
    nearest_occurrence,
)
from .config import Config, GeometryConfig
from .docmodel import (
    AggKind,
    Annotation,
    BoxRegion,
    Document,
    DocumentError,
    ORDERED_LIST,
    TreeRegion,
    data_at,
    locate,
)
from .region_box import (
    BoxExample,
    DisjunctProgram,
    disjunct_from_obj,
    disjunct_to_obj,
    candidate_paths,
    exec_disjunct,
    profile_patterns,
    select_disjunction,
)
from .region_tree import (
    HopsExample,
    HopsProgram,
    RegionConflictError,
    exec_hops,
    hops_from_obj,
    hops_to_obj,
    reconcile_hops,
)
from .value_extract import (
    SynthesisError,
    ValueExample,
    ValueProgram,
    eval_selector,
    exec_value_program,
    synthesize_value_program,
    value_from_obj,
    value_to_obj,
)

BUNDLE_VERSION = 1


@dataclass(frozen=True)
class HierarchyGuard:
    """An outer program whose extracted locations select usable landmark
    occurrences for the inner tuple."""

    program: "ExtractionProgram"


@dataclass(frozen=True)
class ExtractionTuple:
    landmark: str
    region_program: object          # HopsProgram | DisjunctProgram
    blueprint: Blueprint
    value_program: ValueProgram
    values_index: CommonValueIndex
    guard: Optional[HierarchyGuard] = None

    @property
    def kind(self) -> str:
        return "tree" if isinstance(self.blueprint, TreeBlueprint) else "box"


@dataclass(frozen=True)
class ExtractionProgram:
    field: str
    agg: AggKind
    tuples: tuple
    threshold: float = 0.0

    def __post_init__(self) -> None:
        if not self.tuples:
            raise DocumentError("extraction program needs at least one tuple")
        if not 0.0 <= self.threshold <= 1.0:
            raise DocumentError(f"threshold {self.threshold} outside [0, 1]")


# ---------------------------------------------------------------------------
# Extraction (the Extract operator)
# ---------------------------------------------------------------------------


def _exec_region(tup: ExtractionTuple, doc, occurrence,
                 geometry: GeometryConfig):
    if isinstance(tup.region_program, HopsProgram):
        return exec_hops(tup.region_program, doc, occurrence)
    return exec_disjunct(doc, occurrence, tup.region_program, geometry)


def region_blueprint(region, doc, idx: CommonValueIndex,
                     geometry: GeometryConfig = GeometryConfig()) -> Blueprint:
    """Fingerprint a region against a stored common-value index."""
    if isinstance(region, TreeRegion):
        return blueprint_tree(region, doc, idx)
    return blueprint_box(region, doc, idx, geometry)


def _guard_allows(occurrence, locations) -> bool:
    """An occurrence passes the guard when some guard-extracted location
    is the occurrence itself or one of its ancestors (trees), or the
    occurrence's own box (box documents)."""
    for loc in locations:
        if isinstance(occurrence, tuple) and isinstance(loc, tuple):
            if occurrence[:len(loc)] == loc:
                return True
        elif occurrence == loc:
            return True
    return False


def _occurrence_runs(doc, tup: ExtractionTuple, threshold: float,
                     geometry: GeometryConfig) -> list:
    """Per landmark occurrence: (occurrence, region or None, values or None).

    The region entry is None when the region program fails or the
    blueprint gate rejects; values are None whenever no value survives.
    """
    occurrences = locate(doc, tup.landmark)
    if tup.guard is not None:
        allowed = extract_locations(doc, tup.guard.program, geometry)
        occurrences = [o for o in occurrences if _guard_allows(o, allowed)]
    runs = []
    for occ in occurrences:
        region = _exec_region(tup, doc, occ, geometry)
        if region is not None:
            bp = region_blueprint(region, doc, tup.values_index, geometry)
            if delta(bp, tup.blueprint) > threshold:
                region = None
        values = (exec_value_program(region, doc, tup.value_program)
                  if region is not None else None)
        runs.append((occ, region, values))
    return runs


def _check_kind(doc, program: ExtractionProgram) -> None:
    if program.tuples[0].kind != doc.kind:
        raise DocumentError(
            f"program for {program.tuples[0].kind} documents applied to "
            f"a {doc.kind} document")


def extract(doc: Document, program: ExtractionProgram,
            geometry: GeometryConfig = GeometryConfig()):
    """Run the program; the first tuple producing values wins.

    Returns the aggregated field value, or None when every tuple comes
    up empty (or aggregation itself fails, e.g. a single-valued field
    with two surviving values).
    """
    _check_kind(doc, program)
    for tup in program.tuples:
        produced = []
        for _, _, values in _occurrence_runs(doc, tup, program.threshold,
                                             geometry):
            if values is not None:
                produced.extend(values)
        if produced:
            return program.agg.combine(produced)
    return None


def matching_tuples(doc: Document, program: ExtractionProgram,
                    geometry: GeometryConfig = GeometryConfig()) -> list:
    """Indices of every tuple that would produce values on this doc.

    Extraction keeps first-match semantics; this is the diagnostic for
    documents legitimately matched by more than one cluster's tuple.
    """
    _check_kind(doc, program)
    out = []
    for i, tup in enumerate(program.tuples):
        runs = _occurrence_runs(doc, tup, program.threshold, geometry)
        if any(values for _, _, values in runs):
            out.append(i)
    return out


def extract_locations(doc: Document, program: ExtractionProgram,
                      geometry: GeometryConfig = GeometryConfig()) -> list:
    """Locations of the extracted values instead of their strings.

    Tree programs report the selector's matched node paths; box
    programs report the surviving region's box indices. Used by
    hierarchy guards, whose values *are* landmark locations.
    """
    _check_kind(doc, program)
    for tup in program.tuples:
        locations: list = []
        produced = False
        for _, region, values in _occurrence_runs(doc, tup,
                                                  program.threshold, geometry):
            if values is None:
                continue
            produced = True
            if isinstance(region, BoxRegion):
                locations.extend(sorted(region.indices))
            else:
                locations.extend(
                    eval_selector(tup.value_program.selector, region, doc))
        if produced:
            return locations
    return []


# ---------------------------------------------------------------------------
# Per-cluster tuple synthesis
# ---------------------------------------------------------------------------


def synthesize_tuple(cluster: Cluster, landmark: str, corpus: Mapping,
                     annotations: Mapping[str, Annotation],
                     config: Config = Config()) -> ExtractionTuple:
    """Assemble one extraction tuple from a cluster's annotated docs.

    Training anchors each document at the landmark occurrence nearest
    to its annotated locations, learns and reconciles the region
    program, fingerprints the produced regions (the blueprint is their
    mode), and synthesizes the value program from region/value pairs.
    """
    docs = [corpus[d] for d in cluster.doc_ids]
    anchors = {}
    for doc in docs:
        occurrences = locate(doc, landmark)
        if not occurrences:
            raise SynthesisError(
                f"landmark {landmark!r} not locatable in {doc.doc_id!r}")
        anchors[doc.doc_id] = nearest_occurrence(
            doc, occurrences, annotations[doc.doc_id].locations)

    if cluster.kind == "tree":
        examples = [HopsExample(doc, anchors[doc.doc_id],
                                tuple(annotations[doc.doc_id].locations))
                    for doc in docs]
        try:
            region_program = reconcile_hops(examples)
        except RegionConflictError as err:
            raise SynthesisError(
                f"cluster {cluster.cluster_id!r}: {err}") from err
        idx = common_values(docs)
    else:
        examples = [BoxExample(doc, anchors[doc.doc_id],
                               tuple(annotations[doc.doc_id].locations))
                    for doc in docs]
        field_values = [v for doc in docs
                        for v in annotations[doc.doc_id].values]
        idx = frequent_ngrams(docs, config.scoring.max_n)
        patterns = profile_patterns(field_values, idx)
        candidates = candidate_paths(examples, patterns, config.synthesis,
                                     config.geometry, config.seed)
        selection = select_disjunction(candidates, examples, config.geometry)
        if not selection.full:
            missing = [docs[i].doc_id for i in range(len(docs))
                       if i not in selection.covered]
            raise SynthesisError(
                f"cluster {cluster.cluster_id!r}: no path disjunction covers "
                f"{missing}")
        region_program = selection.program

    regions = {}
    for doc in docs:
        if cluster.kind == "tree":
            region = exec_hops(region_program, doc, anchors[doc.doc_id])
        else:
            region = exec_disjunct(doc, anchors[doc.doc_id], region_program,
                                   config.geometry)
        if region is None:
            raise SynthesisError(
                f"cluster {cluster.cluster_id!r}: region program fails on "
                f"training doc {doc.doc_id!r}")
        regions[doc.doc_id] = region

    blueprint = mode_blueprint([
        region_blueprint(regions[doc.doc_id], doc, idx, config.geometry)
        for doc in docs])

    value_examples = [
        ValueExample(regions[doc.doc_id], doc,
                     tuple(annotations[doc.doc_id].values))
        for doc in docs]
    value_program = synthesize_value_program(value_examples, config.synthesis)

    return ExtractionTuple(
        landmark=landmark,
        region_program=region_program,
        blueprint=blueprint,
        value_program=value_program,
        values_index=idx,
    )


# ---------------------------------------------------------------------------
# Hierarchical landmark disambiguation
# ---------------------------------------------------------------------------


def hierarchical_refine(cluster: Cluster, tup: ExtractionTuple,
                        corpus: Mapping,
                        annotations: Mapping[str, Annotation],
                        field: str, config: Config = Config(),
                        depth: Optional[int] = None):
    """Add a guard when spurious landmark occurrences survive the gate.

    Reruns the tuple per occurrence on the training docs. If some doc
    produces a strict superset of its annotated values, the occurrences
    that extract a subset of them become a new annotation and a guard
    program is synthesized on it; at extraction time the guard's output
    locations select which occurrences the tuple may use. Returns
    (tuple, note); the note explains why no guard was attached (None
    when one was, or when none was needed).
    """
    if depth is None:
        depth = config.runtime.hierarchy_depth
    if depth <= 0:
        return tup, "hierarchy depth exhausted"

    spurious = False
    good_locations: dict = {}
    bad_locations: dict = {}
    for doc_id in cluster.doc_ids:
        doc = corpus[doc_id]
        annotated = Counter(annotations[doc_id].values)
        produced: Counter = Counter()
        good, bad = [], []
        for occ, _, values in _occurrence_runs(
                doc, tup, config.runtime.blueprint_threshold, config.geometry):
            if values is None:
                continue
            produced.update(values)
            if not Counter(values) - annotated:
                good.append(occ)
            else:
                bad.append(occ)
        if produced != annotated and not (annotated - produced):
            spurious = True
        good_locations[doc_id] = good
        bad_locations[doc_id] = bad

    if not spurious:
        return tup, None

    if any(not locs for locs in good_locations.values()):
        return tup, "no good landmark occurrence on some training doc"

    guard = _synthesize_guard(cluster, corpus, good_locations, bad_locations,
                              field, config, depth)
    if guard is None:
        return tup, "guard synthesis failed: no candidate isolates the good occurrences"
    return replace(tup, guard=HierarchyGuard(guard)), None


def _guard_sound_on(doc, program: ExtractionProgram, good, bad,
                    geometry: GeometryConfig) -> bool:
    """A guard must keep every good occurrence and no bad one."""
    locations = extract_locations(doc, program, geometry)
    return (all(_guard_allows(occ, locations) for occ in good)
            and not any(_guard_allows(occ, locations) for occ in bad))


def _synthesize_guard(cluster: Cluster, corpus: Mapping, good_locations,
                      bad_locations, field: str, config: Config,
                      depth: int) -> Optional[ExtractionProgram]:
    """Landmark candidates are tried in rank order until one yields a
    program that provably separates good from bad occurrences on the
    training docs.

    The obvious top candidate is often the inner tuple's own landmark
    (distance 0 to itself), which cannot disambiguate; verification is
    what pushes the search on to a contextual landmark.
    """
    guard_annotations = {
        doc_id: Annotation(
            locations=tuple(locs),
            agg=AggKind(ORDERED_LIST),
            values=tuple(data_at(corpus[doc_id], loc) for loc in locs),
        )
        for doc_id, locs in good_locations.items()
    }
    guard_field = f"{field}::guard"
    candidates = landmark_candidates(cluster, corpus, guard_annotations,
                                     config.scoring)
    for candidate in candidates:
        try:
            gtup = synthesize_tuple(cluster, candidate.ngram, corpus,
                                    guard_annotations, config)
        except SynthesisError:
            continue
        gtup, _ = hierarchical_refine(cluster, gtup, corpus,
                                      guard_annotations, guard_field,
                                      config, depth - 1)
        program = ExtractionProgram(
            field=guard_field, agg=AggKind(ORDERED_LIST), tuples=(gtup,),
            threshold=config.runtime.blueprint_threshold)
        if all(_guard_sound_on(corpus[d], program, good_locations[d],
                               bad_locations[d], config.geometry)
               for d in cluster.doc_ids):
            return program
    return None


# ---------------------------------------------------------------------------
# End-to-end training
# ---------------------------------------------------------------------------


def train_program(docs: Sequence[Document],
                  annotations: Mapping[str, Annotation], field: str,
                  config: Config = Config()):
    """Cluster, infer landmarks, and synthesize one tuple per cluster.

    Returns (program, report). The report lists every cluster with its
    landmark and outcome; clusters without a usable landmark or with a
    failed synthesis are skipped there rather than failing the run.
    Raises when no cluster at all yields a tuple.
    """
    docs = list(docs)
    if not docs:
        raise DocumentError("cannot train on an empty document set")
    missing = [d.doc_id for d in docs if d.doc_id not in annotations]
    if missing:
        raise DocumentError(f"documents without annotations: {missing}")

    aggs = {annotations[d.doc_id].agg for d in docs}
    if len(aggs) > 1:
        raise DocumentError(f"conflicting aggregation kinds for {field!r}")
    agg = aggs.pop()

    corpus = corpus_index(docs)
    pairs = infer_landmarks_and_cluster(
        docs, annotations, config.scoring, config.geometry,
        config.runtime.merge_threshold)
    pairs.sort(key=lambda cl: (-len(cl[0].doc_ids), cl[0].cluster_id))

    tuples = []
    report = []
    for cluster, landmark in pairs:
        entry = {"cluster": list(cluster.doc_ids), "landmark": landmark}
        if landmark is None:
            entry.update(status="skipped", detail="no shared landmark n-gram")
            report.append(entry)
            continue
        try:
            tup = synthesize_tuple(cluster, landmark, corpus, annotations,
                                   config)
        except SynthesisError as err:
            entry.update(status="skipped", detail=str(err))
            report.append(entry)
            continue
        note = None
        if config.runtime.enable_hierarchy:
            tup, note = hierarchical_refine(cluster, tup, corpus, annotations,
                                            field, config)
        entry.update(status="ok",
                     guarded=tup.guard is not None,
                     detail=note)
        report.append(entry)
        tuples.append(tup)

    if not tuples:
        raise SynthesisError(
            f"no cluster produced a tuple for field {field!r}: "
            + "; ".join(e["detail"] or "?" for e in report))
    program = ExtractionProgram(field=field, agg=agg, tuples=tuple(tuples),
                                threshold=config.runtime.blueprint_threshold)
    return program, report


# ---------------------------------------------------------------------------
# Bundle persistence
# ---------------------------------------------------------------------------


def _index_to_obj(idx: CommonValueIndex) -> dict:
    return {"values": sorted(idx.values),
            "frequent": [[gram, count] for gram, count in idx.frequent]}


def _index_from_obj(obj: dict) -> CommonValueIndex:
    return CommonValueIndex(
        values=frozenset(obj["values"]),
        frequent=tuple((gram, count) for gram, count in obj["frequent"]))


def _region_program_to_obj(prog) -> dict:
    if isinstance(prog, HopsProgram):
        return {"kind": "hops", **hops_to_obj(prog)}
    return {"kind": "paths", **disjunct_to_obj(prog)}


def _region_program_from_obj(obj: dict):
    if obj["kind"] == "hops":
        return hops_from_obj(obj)
    if obj["kind"] == "paths":
        return disjunct_from_obj(obj)
    raise DocumentError(f"unknown region program kind {obj['kind']!r}")


def _tuple_to_obj(tup: ExtractionTuple) -> dict:
    return {
        "landmark": tup.landmark,
        "regionProgram": _region_program_to_obj(tup.region_program),
        "blueprint": blueprint_to_obj(tup.blueprint),
        "valueProgram": value_to_obj(tup.value_program),
        "valuesIndex": _index_to_obj(tup.values_index),
        "guard": (None if tup.guard is None
                  else program_to_obj(tup.guard.program)),
    }


def _tuple_from_obj(obj: dict) -> ExtractionTuple:
    guard = obj.get("guard")
    return ExtractionTuple(
        landmark=obj["landmark"],
        region_program=_region_program_from_obj(obj["regionProgram"]),
        blueprint=blueprint_from_obj(obj["blueprint"]),
        value_program=value_from_obj(obj["valueProgram"]),
        values_index=_index_from_obj(obj["valuesIndex"]),
        guard=None if guard is None else HierarchyGuard(
            program_from_obj(guard)),
    )


def program_to_obj(program: ExtractionProgram) -> dict:
    return {
        "field": program.field,
        "agg": {"kind": program.agg.kind, "separator": program.agg.separator},
        "threshold": program.threshold,
        "tuples": [_tuple_to_obj(t) for t in program.tuples],
    }


def program_from_obj(obj: dict) -> ExtractionProgram:
    return ExtractionProgram(
        field=obj["field"],
        agg=AggKind(obj["agg"]["kind"], obj["agg"]["separator"]),
        tuples=tuple(_tuple_from_obj(t) for t in obj["tuples"]),
        threshold=obj["threshold"],
    )


def save_bundle(program: ExtractionProgram, path) -> None:
    """Versioned, human-editable, byte-stable JSON bundle."""
    payload = {"version": BUNDLE_VERSION, "program": program_to_obj(program)}
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_bundle(path) -> ExtractionProgram:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise DocumentError(f"cannot read bundle {path}: {err}") from err
    version = payload.get("version")
    if version != BUNDLE_VERSION:
        raise DocumentError(
            f"bundle version {version!r} not supported (expected "
            f"{BUNDLE_VERSION})")
    return program_from_obj(payload["program"])
