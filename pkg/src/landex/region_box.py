"""Geometric region programs for box documents.

A path program walks from a landmark box through its neighbors:
Absolute(dir, k) steps to the k successive nearest neighbors in one
direction, Relative(dir, pattern, inclusive) keeps stepping until a box
matches the pattern (collecting every box it walks across). A disjunct
program tries its paths in order and keeps the first that executes.

Synthesis is enumerative: breadth-first over motion sequences with
failed prefixes pruned (a prefix that dies on some training document
cannot be rescued by more motions), then greedy set cover assembles a
disjunction from candidates synthesized on small document subsets.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, List, Optional, Sequence

from .config import GeometryConfig, SynthesisConfig
from .docmodel import BoxDocument, BoxIndex, BoxRegion, DocumentError

TOP = "top"
LEFT = "left"
RIGHT = "right"
BOTTOM = "bottom"
DIRECTIONS = (TOP, LEFT, RIGHT, BOTTOM)


# ---------------------------------------------------------------------------
# Pattern tokens
# ---------------------------------------------------------------------------

DIGIT_RUN = "digit-run"
DATE = "date"
TIME = "time"
UPPERCASE_WORD = "uppercase-word"
ALNUM_RUN = "alnum-run"
CURRENCY = "currency"
END_OF_LINE = "end-of-line"

_TOKEN_REGEXES = {
    DATE: re.compile(r"\d{1,2}[/\-.]\d{1,2}[/\-.]\d{2,4}"),
    TIME: re.compile(r"\d{1,2}:\d{2}(?::\d{2})?(?:\s?[APap][Mm])?"),
    UPPERCASE_WORD: re.compile(r"[A-Z]+"),
    ALNUM_RUN: re.compile(r"[A-Za-z0-9]+"),
    CURRENCY: re.compile(r"[$€£₹]\s?\d[\d,]*(?:\.\d{1,2})?"),
}


@dataclass(frozen=True)
class PatternToken:
    """A whole-box-text matcher. ``end-of-line`` is positional: it never
    matches a box and instead terminates a relative walk at the edge."""

    kind: str
    length: int = 0  # digit-run only

    def __post_init__(self) -> None:
        if self.kind == DIGIT_RUN:
            if self.length < 1:
                raise ValueError("digit-run needs a positive length")
        elif self.kind not in _TOKEN_REGEXES and self.kind != END_OF_LINE:
            raise ValueError(f"unknown pattern token {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind == DIGIT_RUN:
            return f"digit-run({self.length})"
        return self.kind

    def matches(self, text: str) -> bool:
        if self.kind == END_OF_LINE:
            return False
        stripped = text.strip()
        if self.kind == DIGIT_RUN:
            return re.fullmatch(rf"\d{{{self.length}}}", stripped) is not None
        return _TOKEN_REGEXES[self.kind].fullmatch(stripped) is not None


def token_from_name(name: str) -> PatternToken:
    m = re.fullmatch(r"digit-run\((\d+)\)", name)
    if m:
        return PatternToken(DIGIT_RUN, int(m.group(1)))
    return PatternToken(name)


def find_spans(token: PatternToken, text: str) -> List[tuple]:
    """(start, end) spans of the token inside a larger text, left to
    right. ``end-of-line`` yields the single empty span at the end;
    digit runs must be exact (not embedded in longer runs)."""
    if token.kind == END_OF_LINE:
        return [(len(text), len(text))]
    if token.kind == DIGIT_RUN:
        pattern = re.compile(rf"(?<!\d)\d{{{token.length}}}(?!\d)")
    else:
        pattern = _TOKEN_REGEXES[token.kind]
    return [(m.start(), m.end()) for m in pattern.finditer(text)]


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

ABSOLUTE = "absolute"
RELATIVE = "relative"


@dataclass(frozen=True)
class Motion:
    kind: str
    direction: str
    steps: int = 0
    pattern: Optional[PatternToken] = None
    inclusive: bool = False

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise ValueError(f"bad direction {self.direction!r}")
        if self.kind == ABSOLUTE:
            if not 1 <= self.steps <= 4:
                raise ValueError("absolute step count must be in 1..4")
            if self.pattern is not None:
                raise ValueError("absolute motions carry no pattern")
        elif self.kind == RELATIVE:
            if self.pattern is None:
                raise ValueError("relative motions need a pattern")
        else:
            raise ValueError(f"bad motion kind {self.kind!r}")

    def sort_key(self) -> tuple:
        return (self.kind, self.direction, self.steps,
                self.pattern.name if self.pattern else "", self.inclusive)


def absolute(direction: str, steps: int) -> Motion:
    return Motion(ABSOLUTE, direction, steps=steps)


def relative(direction: str, pattern: PatternToken, inclusive: bool = False) -> Motion:
    return Motion(RELATIVE, direction, pattern=pattern, inclusive=inclusive)


@dataclass(frozen=True)
class PathProgram:
    motions: tuple = ()

    def __post_init__(self) -> None:
        if len(self.motions) > 4:
            raise ValueError("path programs hold at most 4 motions")

    def sort_key(self) -> tuple:
        return tuple(m.sort_key() for m in self.motions)


@dataclass(frozen=True)
class DisjunctProgram:
    paths: tuple = ()


@dataclass(frozen=True)
class BoxExample:
    """One training document: landmark occurrence plus annotated boxes."""

    doc: BoxDocument
    landmark: BoxIndex
    values: tuple  # of BoxIndex

    def target(self) -> frozenset:
        return frozenset(self.values) | {self.landmark}


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def neighbors(doc: BoxDocument, origin: BoxIndex, direction: str,
              geometry: GeometryConfig = GeometryConfig()) -> List[BoxIndex]:
    """Boxes strictly in ``direction`` whose perpendicular span overlaps
    the origin's by the configured fraction, nearest first."""
    src = doc.box(origin)
    out = []
    for i in range(len(doc.boxes)):
        if i == origin:
            continue
        b = doc.box(i)
        if direction == RIGHT:
            ahead = b.cx > src.cx
            overlap = min(src.y + src.h, b.y + b.h) - max(src.y, b.y)
            need = geometry.min_perpendicular_overlap * src.h
        elif direction == LEFT:
            ahead = b.cx < src.cx
            overlap = min(src.y + src.h, b.y + b.h) - max(src.y, b.y)
            need = geometry.min_perpendicular_overlap * src.h
        elif direction == BOTTOM:
            ahead = b.cy > src.cy
            overlap = min(src.x + src.w, b.x + b.w) - max(src.x, b.x)
            need = geometry.min_perpendicular_overlap * src.w
        else:
            ahead = b.cy < src.cy
            overlap = min(src.x + src.w, b.x + b.w) - max(src.x, b.x)
            need = geometry.min_perpendicular_overlap * src.w
        if not ahead or overlap < need:
            continue
        out.append((math.hypot(b.cx - src.cx, b.cy - src.cy), i))
    out.sort()
    return [i for _, i in out]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _apply_motion(doc: BoxDocument, visited: list, seen: set,
                  current: BoxIndex, motion: Motion,
                  geometry: GeometryConfig) -> Optional[BoxIndex]:
    """Run one motion in place; the new cursor, or None on failure."""

    def step(direction: str) -> Optional[BoxIndex]:
        nbrs = neighbors(doc, current, direction, geometry)
        return nbrs[0] if nbrs else None

    def record(i: BoxIndex) -> None:
        if i not in seen:
            seen.add(i)
            visited.append(i)

    if motion.kind == ABSOLUTE:
        for _ in range(motion.steps):
            nxt = step(motion.direction)
            if nxt is None:
                return None
            current = nxt
            record(current)
    else:
        pattern = motion.pattern
        if pattern.kind == END_OF_LINE:
            while True:
                nxt = step(motion.direction)
                if nxt is None:
                    break
                current = nxt
                record(current)
        else:
            while True:
                nxt = step(motion.direction)
                if nxt is None:
                    return None
                current = nxt
                if pattern.matches(doc.box(current).text):
                    if motion.inclusive:
                        record(current)
                    break
                record(current)
    return current


def exec_path(doc: BoxDocument, landmark: BoxIndex, prog: PathProgram,
              geometry: GeometryConfig = GeometryConfig()) -> Optional[BoxRegion]:
    """Walk the motions from the landmark; None when a motion cannot
    complete. The region lists boxes in first-visit order."""
    visited = [landmark]
    seen = {landmark}
    current: Optional[BoxIndex] = landmark
    for motion in prog.motions:
        current = _apply_motion(doc, visited, seen, current, motion, geometry)
        if current is None:
            return None
    return BoxRegion(tuple(visited))


def exec_disjunct(doc: BoxDocument, landmark: BoxIndex, prog: DisjunctProgram,
                  geometry: GeometryConfig = GeometryConfig()) -> Optional[BoxRegion]:
    """First path that executes wins; None when all fail."""
    for path in prog.paths:
        region = exec_path(doc, landmark, path, geometry)
        if region is not None:
            return region
    return None


# ---------------------------------------------------------------------------
# Pattern profiling
# ---------------------------------------------------------------------------

_FIXED_TOKENS = (
    PatternToken(DATE),
    PatternToken(TIME),
    PatternToken(UPPERCASE_WORD),
    PatternToken(ALNUM_RUN),
    PatternToken(CURRENCY),
    PatternToken(END_OF_LINE),
)


def profile_patterns(values: Iterable[str], idx=None) -> List[PatternToken]:
    """Pattern tokens for synthesis: one digit-run per run length seen in
    the field values or the cluster's frequent n-grams, plus the fixed
    token set."""
    texts = list(values)
    if idx is not None:
        texts.extend(ng for ng, _ in idx.frequent)
    lengths = sorted({len(run) for t in texts for run in re.findall(r"\d+", t)})
    tokens = [PatternToken(DIGIT_RUN, n) for n in lengths]
    tokens.extend(_FIXED_TOKENS)
    return tokens


# ---------------------------------------------------------------------------
# Enumerative synthesis
# ---------------------------------------------------------------------------


def _motion_vocabulary(patterns: Sequence[PatternToken],
                       synthesis: SynthesisConfig) -> List[Motion]:
    vocab = []
    for direction in DIRECTIONS:
        for k in range(1, synthesis.max_absolute_step + 1):
            vocab.append(absolute(direction, k))
        for pattern in patterns:
            if pattern.kind == END_OF_LINE:
                vocab.append(relative(direction, pattern, inclusive=False))
            else:
                vocab.append(relative(direction, pattern, inclusive=False))
                vocab.append(relative(direction, pattern, inclusive=True))
    return vocab


def enumerate_paths(examples: Sequence[BoxExample],
                    patterns: Sequence[PatternToken],
                    synthesis: SynthesisConfig = SynthesisConfig(),
                    geometry: GeometryConfig = GeometryConfig()) -> List[PathProgram]:
    """All motion sequences (bounded length) whose region contains every
    annotated box on every example; smallest regions first.

    Breadth-first over prefixes: executing each prefix once per example
    and dropping failed ones keeps the search far below the raw
    vocabulary**length bound.
    """
    if not examples:
        raise DocumentError("cannot synthesize from zero examples")
    vocab = _motion_vocabulary(patterns, synthesis)
    results = []
    frontier = [()]
    for _depth in range(synthesis.max_motions + 1):
        next_frontier = []
        for motions in frontier:
            prog = PathProgram(motions)
            regions = [exec_path(ex.doc, ex.landmark, prog, geometry)
                       for ex in examples]
            if any(r is None for r in regions):
                continue
            if all(set(r.indices) >= set(ex.values)
                   for r, ex in zip(regions, examples)):
                size = sum(len(r.indices) for r in regions)
                results.append((size, len(motions), prog.sort_key(), prog))
            if len(motions) < synthesis.max_motions:
                next_frontier.extend(motions + (m,) for m in vocab)
        frontier = next_frontier
    results.sort(key=lambda entry: entry[:3])
    return [prog for _, _, _, prog in results]


def _subset_candidates(examples: Sequence[BoxExample],
                       vocab: Sequence[Motion],
                       synthesis: SynthesisConfig,
                       geometry: GeometryConfig) -> List[PathProgram]:
    """Paths that run on every example and exactly cover at least one.

    Selection only rewards exact covers, so the search prunes any prefix
    whose region has already strayed outside the annotated target on
    every example (regions only grow), and it keeps one motion spelling
    per distinct behavior — a dropped respelling behaves identically on
    these examples, and whatever document it exactly covers regenerates
    it (or a region-equal twin) from that document's own singleton.
    """
    targets = [ex.target() for ex in examples]
    init = tuple(((ex.landmark,), ex.landmark) for ex in examples)
    frontier = [((), init)]
    reached = {init}
    results = []
    for _depth in range(synthesis.max_motions + 1):
        next_frontier = []
        for motions, states in frontier:
            if (all(set(v) >= set(ex.values)
                    for (v, _), ex in zip(states, examples))
                    and any(frozenset(v) == t
                            for (v, _), t in zip(states, targets))):
                prog = PathProgram(motions)
                size = sum(len(v) for v, _ in states)
                results.append((size, len(motions), prog.sort_key(), prog))
            if len(motions) == synthesis.max_motions:
                continue
            for m in vocab:
                new_states = []
                inside = False
                for (v, cur), ex, t in zip(states, examples, targets):
                    visited = list(v)
                    nxt = _apply_motion(ex.doc, visited, set(v), cur, m,
                                        geometry)
                    if nxt is None:
                        break
                    new_states.append((tuple(visited), nxt))
                    inside = inside or frozenset(visited) <= t
                else:
                    key = tuple(new_states)
                    if inside and key not in reached:
                        reached.add(key)
                        next_frontier.append((motions + (m,), key))
        frontier = next_frontier
    results.sort(key=lambda entry: entry[:3])
    return [prog for _, _, _, prog in results]


def candidate_paths(examples: Sequence[BoxExample],
                    patterns: Sequence[PatternToken],
                    synthesis: SynthesisConfig = SynthesisConfig(),
                    geometry: GeometryConfig = GeometryConfig(),
                    seed: int = 0) -> List[PathProgram]:
    """Candidates for disjunction selection, synthesized on small subsets.

    Enumerating over all documents at once would discard any program that
    dies on a single document — exactly the programs a disjunction needs
    (the engine-number walk fails wherever the engine number is absent).
    So candidates come from every singleton subset plus a bounded sample
    of 2–3-document subsets, deduplicated in first-seen order.
    """
    if not examples:
        raise DocumentError("cannot synthesize from zero examples")
    subsets: List[tuple] = [(i,) for i in range(len(examples))]
    pool = [combo for size in (2, 3) if size <= len(examples)
            for combo in combinations(range(len(examples)), size)]
    if len(pool) > synthesis.random_subsets:
        pool = sorted(random.Random(seed).sample(pool, synthesis.random_subsets))
    subsets.extend(pool)
    vocab = _motion_vocabulary(patterns, synthesis)
    seen = set()
    out: List[PathProgram] = []
    for subset in subsets:
        for prog in _subset_candidates([examples[i] for i in subset], vocab,
                                       synthesis, geometry):
            if prog not in seen:
                seen.add(prog)
                out.append(prog)
    return out


# ---------------------------------------------------------------------------
# Disjunction selection
# ---------------------------------------------------------------------------


def covers(prog: PathProgram, example: BoxExample,
           geometry: GeometryConfig = GeometryConfig()) -> bool:
    """A path covers a document when its region is exactly the annotated
    boxes plus the landmark — no extras dragged in, none missing."""
    region = exec_path(example.doc, example.landmark, prog, geometry)
    return region is not None and frozenset(region.indices) == example.target()


def greedy_cover(candidate_sets: Sequence[frozenset],
                 sizes: Sequence[int]) -> List[int]:
    """Greedy maximum-coverage pick order.

    ``sizes`` breaks coverage ties (smaller program first), then the
    candidate's rank. Stops when no candidate adds coverage.
    """
    covered: set = set()
    order: List[int] = []
    remaining = set(range(len(candidate_sets)))
    while remaining:
        best = None
        for i in sorted(remaining):
            gain = len(candidate_sets[i] - covered)
            key = (-gain, sizes[i], i)
            if gain > 0 and (best is None or key < best[0]):
                best = (key, i)
        if best is None:
            break
        _, pick = best
        order.append(pick)
        covered |= candidate_sets[pick]
        remaining.discard(pick)
    return order


@dataclass(frozen=True)
class SelectionResult:
    program: DisjunctProgram
    covered: frozenset  # indices into the example list
    total: int

    @property
    def full(self) -> bool:
        return len(self.covered) == self.total


def select_disjunction(candidates: Sequence[PathProgram],
                       examples: Sequence[BoxExample],
                       geometry: GeometryConfig = GeometryConfig()) -> SelectionResult:
    """Greedy set cover over the documents each candidate is correct on."""
    if not candidates:
        raise DocumentError("no candidate paths to select from")
    cover_sets = [
        frozenset(i for i, ex in enumerate(examples) if covers(prog, ex, geometry))
        for prog in candidates
    ]
    sizes = [len(prog.motions) for prog in candidates]
    order = greedy_cover(cover_sets, sizes)
    covered = frozenset().union(*[cover_sets[i] for i in order]) if order else frozenset()
    return SelectionResult(
        program=DisjunctProgram(tuple(candidates[i] for i in order)),
        covered=covered,
        total=len(examples),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def motion_to_obj(m: Motion) -> dict:
    if m.kind == ABSOLUTE:
        return {"kind": ABSOLUTE, "direction": m.direction, "steps": m.steps}
    return {"kind": RELATIVE, "direction": m.direction,
            "pattern": m.pattern.name, "inclusive": m.inclusive}


def motion_from_obj(obj: dict) -> Motion:
    if obj["kind"] == ABSOLUTE:
        return absolute(obj["direction"], obj["steps"])
    if obj["kind"] == RELATIVE:
        return relative(obj["direction"], token_from_name(obj["pattern"]),
                        obj["inclusive"])
    raise DocumentError(f"unknown motion kind {obj.get('kind')!r}")


def disjunct_to_obj(prog: DisjunctProgram) -> dict:
    return {"paths": [[motion_to_obj(m) for m in path.motions]
                      for path in prog.paths]}


def disjunct_from_obj(obj: dict) -> DisjunctProgram:
    return DisjunctProgram(tuple(
        PathProgram(tuple(motion_from_obj(m) for m in motions))
        for motions in obj["paths"]
    ))
