"""Value programs: pick the value-bearing node, then cut the substring.

Tree regions get a (selector, text program) pair: the selector chain
walks children/descendants from the region anchor, filtered by atoms
(tag/class/id/attribute/positional), and every matched node's data is
fed to the text program. Box regions skip the selector — the text
program runs over the space-joined region text.

Synthesis is programming-by-example: selector chains are enumerated in
rank order (fewest atoms first, structural atoms preferred over
positional ones) and accepted when a text program can reproduce every
training value through them; text programs come from enumerating
boundary-position pairs over literal delimiters and pattern tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import List, Optional, Sequence, Tuple, Union

from .config import SynthesisConfig
from .docmodel import (
    BoxDocument,
    BoxRegion,
    DocumentError,
    TreeDocument,
    TreeRegion,
    data_at,
    region_locations,
)
from .region_box import PatternToken, find_spans, profile_patterns, token_from_name


class SynthesisError(DocumentError):
    """No program in the DSL reproduces the training examples."""


# ---------------------------------------------------------------------------
# Selector DSL
# ---------------------------------------------------------------------------

CHILDREN = "children"
DESCENDANTS = "descendants"

TAG = "tag"
CLASS = "class"
ID = "id"
ATTR_CONTAINS = "attr-contains"
NTH_CHILD = "nth-child"

# ranking: structural atoms beat attribute probes beat positional ones
_ATOM_PENALTY = {TAG: 0, CLASS: 0, ID: 0, ATTR_CONTAINS: 1, NTH_CHILD: 2}


@dataclass(frozen=True)
class SelectorAtom:
    kind: str
    value: str = ""
    name: str = ""  # attr-contains only
    n: int = 0      # nth-child only

    def __post_init__(self) -> None:
        if self.kind not in _ATOM_PENALTY:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        if self.kind == NTH_CHILD:
            if self.n < 1:
                raise ValueError("nth-child positions are 1-based")
        elif not self.value:
            raise ValueError(f"{self.kind} atom needs a value")
        if self.kind == ATTR_CONTAINS and not self.name:
            raise ValueError("attr-contains needs an attribute name")

    @property
    def penalty(self) -> int:
        return _ATOM_PENALTY[self.kind]

    def matches(self, doc: TreeDocument, path) -> bool:
        node = doc.node(path)
        if self.kind == TAG:
            return node.tag == self.value
        if self.kind == CLASS:
            return self.value in node.attrs.get("class", "").split()
        if self.kind == ID:
            return node.attrs.get("id", "") == self.value
        if self.kind == ATTR_CONTAINS:
            return self.value in node.attrs.get(self.name, "")
        return bool(path) and path[-1] + 1 == self.n

    def key(self) -> tuple:
        return (self.penalty, self.kind, self.name, self.value, self.n)


@dataclass(frozen=True)
class SelectorStep:
    axis: str
    atoms: tuple = ()

    def __post_init__(self) -> None:
        if self.axis not in (CHILDREN, DESCENDANTS):
            raise ValueError(f"bad axis {self.axis!r}")


@dataclass(frozen=True)
class NodeSelector:
    chain: tuple = ()

    def __post_init__(self) -> None:
        if len(self.chain) > 4:
            raise ValueError("selector chains hold at most 4 steps")

    @property
    def atom_count(self) -> int:
        return sum(len(step.atoms) for step in self.chain)


def css(selector: NodeSelector) -> str:
    """CSS-like rendering for diagnostics (anchor-relative)."""
    parts = []
    for step in selector.chain:
        tags = [a.value for a in step.atoms if a.kind == TAG]
        text = tags[0] if tags else "*"
        for a in step.atoms:
            if a.kind == CLASS:
                text += f".{a.value}"
            elif a.kind == ID:
                text += f"#{a.value}"
            elif a.kind == ATTR_CONTAINS:
                text += f"[{a.name}*={a.value}]"
            elif a.kind == NTH_CHILD:
                text += f":nth-child({a.n})"
        parts.append(("> " if step.axis == CHILDREN else "") + text)
    return " ".join(parts) if parts else ":scope"


def _descendants(doc: TreeDocument, path) -> List[tuple]:
    out = []
    node = doc.node(path)
    stack = [(path + (i,), child) for i, child in enumerate(node.children)]
    while stack:
        p, n = stack.pop(0)
        out.append(p)
        stack[0:0] = [(p + (i,), c) for i, c in enumerate(n.children)]
    return out


def eval_selector(selector: NodeSelector, region: TreeRegion,
                  doc: TreeDocument) -> List[tuple]:
    """Matched node paths, document order, region members only."""
    anchor = region.anchor if region.anchor is not None else ()
    current = [anchor]
    if not selector.chain:
        return [p for p in current if region.contains(p)]
    for step in selector.chain:
        found = []
        seen = set()
        for p in current:
            if step.axis == CHILDREN:
                candidates = [p + (i,) for i in range(len(doc.node(p).children))]
            else:
                candidates = _descendants(doc, p)
            for cand in candidates:
                if cand in seen or not region.contains(cand):
                    continue
                if all(atom.matches(doc, cand) for atom in step.atoms):
                    seen.add(cand)
                    found.append(cand)
        current = sorted(found, key=doc.preorder_index)
    return current


# ---------------------------------------------------------------------------
# Text DSL
# ---------------------------------------------------------------------------

BEFORE = "before"
AFTER = "after"


@dataclass(frozen=True)
class Position:
    """A cut point: the k-th occurrence of a literal or pattern token,
    taken at its start (before) or end (after). Negative occurrences
    count from the right."""

    anchor: Union[str, PatternToken]
    occurrence: int
    side: str

    def __post_init__(self) -> None:
        if self.occurrence == 0:
            raise ValueError("occurrence index is 1-based, signed")
        if self.side not in (BEFORE, AFTER):
            raise ValueError(f"bad side {self.side!r}")

    @property
    def is_literal(self) -> bool:
        return isinstance(self.anchor, str)

    def anchor_name(self) -> str:
        return repr(self.anchor) if self.is_literal else self.anchor.name


def _literal_spans(literal: str, text: str) -> List[tuple]:
    spans = []
    start = 0
    while True:
        i = text.find(literal, start)
        if i < 0:
            return spans
        spans.append((i, i + len(literal)))
        start = i + len(literal)


def _pick_span(spans: List[tuple], occurrence: int, side: str) -> Optional[int]:
    if not spans:
        return None
    idx = occurrence - 1 if occurrence > 0 else len(spans) + occurrence
    if not 0 <= idx < len(spans):
        return None
    s, e = spans[idx]
    return s if side == BEFORE else e


def resolve_position(pos: Position, text: str) -> Optional[int]:
    spans = (_literal_spans(pos.anchor, text) if pos.is_literal
             else find_spans(pos.anchor, text))
    return _pick_span(spans, pos.occurrence, pos.side)


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Extract:
    start: Position
    end: Position


@dataclass(frozen=True)
class Concat:
    parts: tuple  # of text programs


TextProgram = Union[Identity, Extract, Concat]


def exec_text(prog: TextProgram, text: str) -> Optional[str]:
    """Run a text program; extracted substrings are trimmed. None when a
    position's anchor is absent or the cut points cross."""
    if isinstance(prog, Identity):
        return text
    if isinstance(prog, Extract):
        s = resolve_position(prog.start, text)
        e = resolve_position(prog.end, text)
        if s is None or e is None or s > e:
            return None
        return text[s:e].strip()
    out = []
    for part in prog.parts:
        piece = exec_text(part, text)
        if piece is None:
            return None
        out.append(piece)
    return "".join(out)


# ---------------------------------------------------------------------------
# Value programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueProgram:
    """selector None = box variant (text program over joined region text)."""

    selector: Optional[NodeSelector]
    text: TextProgram


def joined_region_text(region: BoxRegion, doc: BoxDocument) -> str:
    return " ".join(doc.box(i).text.strip() for i in region.indices)


def exec_value_program(region, doc, prog: ValueProgram) -> Optional[tuple]:
    """Extracted values (document order), or None.

    Tree regions may yield several values (one per matched node); box
    regions yield exactly one.
    """
    if prog.selector is None:
        if not isinstance(doc, BoxDocument):
            raise DocumentError("box value program applied to a tree document")
        out = exec_text(prog.text, joined_region_text(region, doc))
        return None if out is None else (out,)
    if not isinstance(doc, TreeDocument):
        raise DocumentError("tree value program applied to a box document")
    paths = eval_selector(prog.selector, region, doc)
    if not paths:
        return None
    values = []
    for p in paths:
        piece = exec_text(prog.text, data_at(doc, p))
        if piece is None:
            return None
        values.append(piece)
    return tuple(values)


def selector_atom_count(prog: ValueProgram) -> int:
    return prog.selector.atom_count if prog.selector is not None else 0


# ---------------------------------------------------------------------------
# Text-program synthesis
# ---------------------------------------------------------------------------


def _adjacent_literals(examples: Sequence[tuple]) -> List[str]:
    """Single characters bordering the expected value (immediately, and
    the nearest non-space on each side) — whitespace itself is never a
    delimiter."""
    chars = set()
    for text, expected in examples:
        start = 0
        while True:
            i = text.find(expected, start)
            if i < 0:
                break
            end = i + len(expected)
            j = i - 1
            while j >= 0 and text[j].isspace():
                j -= 1
            if i > 0 and not text[i - 1].isspace():
                chars.add(text[i - 1])
            if j >= 0:
                chars.add(text[j])
            j = end
            while j < len(text) and text[j].isspace():
                j += 1
            if end < len(text) and not text[end].isspace():
                chars.add(text[end])
            if j < len(text):
                chars.add(text[j])
            start = i + 1
    return sorted(chars)


def _position_rank(pos: Position, boundary: str) -> tuple:
    side_rank = ((0 if pos.side == AFTER else 1) if boundary == "start"
                 else (0 if pos.side == BEFORE else 1))
    return (0 if pos.is_literal else 1, abs(pos.occurrence),
            pos.occurrence < 0, side_rank, pos.anchor_name())


def _candidate_positions(anchors: Sequence, boundary: str) -> List[Position]:
    sides = (AFTER, BEFORE) if boundary == "start" else (BEFORE, AFTER)
    out = []
    for anchor in anchors:
        for k in (1, 2, 3, -1, -2, -3):
            for side in sides:
                out.append(Position(anchor, k, side))
    out.sort(key=lambda p: _position_rank(p, boundary))
    return out


def synthesize_text_program(examples: Sequence[tuple]) -> TextProgram:
    """The highest-ranked program mapping every text to its expected
    substring: Identity when possible, otherwise a boundary-pair
    Extract. Constant delimiters outrank pattern tokens; lower
    occurrence indices and the canonical sides (cut after the start
    anchor, before the end anchor) break ties.
    """
    if not examples:
        raise SynthesisError("no text examples")
    for text, expected in examples:
        if expected not in text:
            raise SynthesisError(
                f"expected value {expected!r} is not a substring of {text!r}")
    if all(text == expected for text, expected in examples):
        return Identity()

    anchors: List[Union[str, PatternToken]] = list(_adjacent_literals(examples))
    anchors.extend(profile_patterns([text for text, _ in examples]))
    starts = _candidate_positions(anchors, "start")
    ends = _candidate_positions(anchors, "end")

    # one span scan per (anchor, text); the pair loop then only indexes
    cache: dict = {}
    for anchor in anchors:
        key = anchor if isinstance(anchor, str) else anchor.name
        for text, _ in examples:
            if (key, text) not in cache:
                cache[key, text] = (_literal_spans(anchor, text)
                                    if isinstance(anchor, str)
                                    else find_spans(anchor, text))

    def cut(pos: Position, text: str) -> Optional[int]:
        key = pos.anchor if pos.is_literal else pos.anchor.name
        return _pick_span(cache[key, text], pos.occurrence, pos.side)

    best = None
    for ps, pe in product(starts, ends):
        ok = True
        for text, expected in examples:
            s = cut(ps, text)
            e = cut(pe, text)
            if s is None or e is None or s > e or text[s:e].strip() != expected:
                ok = False
                break
        if not ok:
            continue
        rank = (
            (0 if ps.is_literal else 1) + (0 if pe.is_literal else 1),
            abs(ps.occurrence) + abs(pe.occurrence),
            _position_rank(ps, "start") + _position_rank(pe, "end"),
        )
        if best is None or rank < best[0]:
            best = (rank, Extract(ps, pe))
    if best is None:
        raise SynthesisError(
            f"no boundary pair reproduces {examples[0][1]!r} from {examples[0][0]!r}")
    return best[1]


# ---------------------------------------------------------------------------
# Value-program synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueExample:
    region: object  # TreeRegion | BoxRegion
    doc: object
    expected: tuple  # of strings, document order

    def __post_init__(self) -> None:
        if not self.expected:
            raise ValueError("a value example needs at least one expected value")


_MAX_TOTAL_ATOMS = 4


def _atoms_of(doc: TreeDocument, path) -> set:
    node = doc.node(path)
    atoms = {SelectorAtom(TAG, value=node.tag)}
    for cls in node.attrs.get("class", "").split():
        atoms.add(SelectorAtom(CLASS, value=cls))
    if node.attrs.get("id"):
        atoms.add(SelectorAtom(ID, value=node.attrs["id"]))
    for name, value in node.attrs.items():
        if name not in ("class", "id") and value:
            atoms.add(SelectorAtom(ATTR_CONTAINS, value=value, name=name))
    if path:
        atoms.add(SelectorAtom(NTH_CHILD, n=path[-1] + 1))
    return atoms


def _minimal_value_nodes(doc: TreeDocument, region: TreeRegion,
                         expected: Sequence[str]) -> set:
    members = region_locations(region, doc)
    targets = set()
    for value in expected:
        holders = [p for p in members if value in data_at(doc, p)]
        for p in holders:
            if not any(q != p and q[:len(p)] == p for q in holders):
                targets.add(p)
    return targets


def _selector_candidates(examples: Sequence[ValueExample],
                         synthesis: SynthesisConfig):
    """Selector chains in rank order: total atoms, then positional-atom
    penalty, then chain length, then a stable lexicographic key."""
    final_vocab: set = set()
    mid_vocab: set = set()
    for ex in examples:
        targets = _minimal_value_nodes(ex.doc, ex.region, ex.expected)
        for t in targets:
            final_vocab |= _atoms_of(ex.doc, t)
            anchor_depth = 0 if ex.region.anchor is None else len(ex.region.anchor)
            for depth in range(anchor_depth + 1, len(t)):
                mid_vocab |= _atoms_of(ex.doc, t[:depth])
    final_atoms = sorted(final_vocab, key=SelectorAtom.key)
    mid_atoms = sorted(mid_vocab, key=SelectorAtom.key)

    def step_options(vocab, size):
        if size == 0:
            return [()]
        if size == 1:
            return [(a,) for a in vocab]
        return [tuple(sorted(pair, key=SelectorAtom.key))
                for pair in combinations(vocab, 2)]

    max_steps = min(4, synthesis.max_selector_steps)
    per_step = min(2, synthesis.max_atoms_per_step)
    for budget in range(0, _MAX_TOTAL_ATOMS + 1):
        layer = []
        for length in range(1, max_steps + 1):
            for sizes in _compositions(budget, length, per_step):
                pools = []
                for i, size in enumerate(sizes):
                    vocab = final_atoms if i == length - 1 else mid_atoms
                    opts = step_options(vocab, size)
                    pools.append([
                        SelectorStep(axis, atoms)
                        for axis in (CHILDREN, DESCENDANTS)
                        for atoms in opts
                    ])
                for steps in product(*pools):
                    layer.append(NodeSelector(tuple(steps)))
        layer.sort(key=_selector_rank)
        yield from layer
    # Last resort: the scope node itself. Navigating to a node is always
    # preferred; this only matches when the region admits its own anchor,
    # i.e. a whole-document region whose value sits on the root.
    yield NodeSelector(())


def _compositions(total: int, length: int, cap: int):
    if length == 1:
        if total <= cap:
            yield (total,)
        return
    for head in range(0, min(cap, total) + 1):
        for rest in _compositions(total - head, length - 1, cap):
            yield (head,) + rest


def _selector_rank(sel: NodeSelector) -> tuple:
    penalty = sum(a.penalty for step in sel.chain for a in step.atoms)
    lex = tuple((step.axis,) + tuple(a.key() for a in step.atoms)
                for step in sel.chain)
    return (sel.atom_count, penalty, len(sel.chain), lex)


def synthesize_value_program(examples: Sequence[ValueExample],
                             synthesis: SynthesisConfig = SynthesisConfig()) -> ValueProgram:
    """A program reproducing every training example exactly."""
    if not examples:
        raise SynthesisError("no value examples")

    if all(isinstance(ex.doc, BoxDocument) for ex in examples):
        pairs = []
        for ex in examples:
            if len(ex.expected) != 1:
                raise SynthesisError(
                    f"doc {ex.doc.doc_id!r}: box regions yield one value, "
                    f"got {len(ex.expected)} expectations")
            pairs.append((joined_region_text(ex.region, ex.doc), ex.expected[0]))
        return ValueProgram(selector=None, text=synthesize_text_program(pairs))

    if not all(isinstance(ex.doc, TreeDocument) for ex in examples):
        raise SynthesisError("cannot mix tree and box documents in one field")

    for candidate in _selector_candidates(examples, synthesis):
        pairs = []
        fits = True
        for ex in examples:
            matched = eval_selector(candidate, ex.region, ex.doc)
            if len(matched) != len(ex.expected):
                fits = False
                break
            pairs.extend((data_at(ex.doc, p), v)
                         for p, v in zip(matched, ex.expected))
        if not fits:
            continue
        try:
            text_prog = synthesize_text_program(pairs)
        except SynthesisError:
            continue
        prog = ValueProgram(selector=candidate, text=text_prog)
        if all(exec_value_program(ex.region, ex.doc, prog) == ex.expected
               for ex in examples):
            return prog
    raise SynthesisError(
        f"no selector chain isolates the values; first example expected "
        f"{examples[0].expected!r}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _atom_to_obj(a: SelectorAtom) -> dict:
    if a.kind == NTH_CHILD:
        return {"kind": a.kind, "n": a.n}
    if a.kind == ATTR_CONTAINS:
        return {"kind": a.kind, "name": a.name, "value": a.value}
    return {"kind": a.kind, "value": a.value}


def _atom_from_obj(obj: dict) -> SelectorAtom:
    return SelectorAtom(obj["kind"], value=obj.get("value", ""),
                        name=obj.get("name", ""), n=obj.get("n", 0))


def _position_to_obj(p: Position) -> dict:
    anchor = ({"literal": p.anchor} if p.is_literal
              else {"pattern": p.anchor.name})
    return {"anchor": anchor, "occurrence": p.occurrence, "side": p.side}


def _position_from_obj(obj: dict) -> Position:
    raw = obj["anchor"]
    anchor = (raw["literal"] if "literal" in raw
              else token_from_name(raw["pattern"]))
    return Position(anchor, obj["occurrence"], obj["side"])


def _text_to_obj(t: TextProgram) -> dict:
    if isinstance(t, Identity):
        return {"kind": "identity"}
    if isinstance(t, Extract):
        return {"kind": "extract", "start": _position_to_obj(t.start),
                "end": _position_to_obj(t.end)}
    return {"kind": "concat", "parts": [_text_to_obj(p) for p in t.parts]}


def _text_from_obj(obj: dict) -> TextProgram:
    kind = obj["kind"]
    if kind == "identity":
        return Identity()
    if kind == "extract":
        return Extract(_position_from_obj(obj["start"]),
                       _position_from_obj(obj["end"]))
    if kind == "concat":
        return Concat(tuple(_text_from_obj(p) for p in obj["parts"]))
    raise DocumentError(f"unknown text program kind {kind!r}")


def value_to_obj(prog: ValueProgram) -> dict:
    selector = None
    if prog.selector is not None:
        selector = {"chain": [{"axis": s.axis,
                               "atoms": [_atom_to_obj(a) for a in s.atoms]}
                              for s in prog.selector.chain]}
    return {"selector": selector, "text": _text_to_obj(prog.text)}


def value_from_obj(obj: dict) -> ValueProgram:
    selector = None
    if obj["selector"] is not None:
        selector = NodeSelector(tuple(
            SelectorStep(s["axis"], tuple(_atom_from_obj(a) for a in s["atoms"]))
            for s in obj["selector"]["chain"]
        ))
    return ValueProgram(selector=selector, text=_text_from_obj(obj["text"]))
