"""Uniform document abstraction for the two supported shapes.

A document is either an ordered labeled tree (normalized HTML) or a flat
list of geometric text boxes (OCR output). Both expose the same small
vocabulary the rest of the pipeline is written against: locations, the
data visible at a location, landmark lookup, and smallest enclosing
regions.

Locations are lightweight values: a tree location is a tuple of child
indices from the root (so tuple comparison is document pre-order), a box
location is an integer index into the document-ordered box list.

Documents are immutable after ingestion; every operation here is
read-only and safe to share across threads.
"""

from __future__ import annotations

import html.parser
import json
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

TreePath = tuple  # tuple[int, ...]
BoxIndex = int
Location = Union[TreePath, BoxIndex]


class DocumentError(Exception):
    """Invalid location, malformed input file, or mixed-kind misuse."""


# ---------------------------------------------------------------------------
# Tree documents
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    tag: str
    attrs: dict = field(default_factory=dict)
    text: str = ""
    children: list = field(default_factory=list)


class TreeDocument:
    """An ordered labeled tree plus precomputed lookup indexes.

    The constructor walks the tree once and caches, per node: its path,
    its pre-order index, and its visible data (the space-joined pre-order
    concatenation of subtree texts). Nodes must not be mutated afterwards.
    """

    kind = "tree"

    def __init__(self, root: TreeNode, doc_id: str = ""):
        self.root = root
        self.doc_id = doc_id
        self._node_at: dict[TreePath, TreeNode] = {}
        self._paths: list[TreePath] = []   # pre-order
        self._data: dict[TreePath, str] = {}
        self._build((), root)

    def _build(self, path: TreePath, node: TreeNode) -> list[str]:
        self._node_at[path] = node
        self._paths.append(path)
        parts = []
        own = node.text.strip()
        if own:
            parts.append(own)
        for i, child in enumerate(node.children):
            parts.extend(self._build(path + (i,), child))
        self._data[path] = " ".join(parts)
        return parts

    def paths(self) -> list:
        return list(self._paths)

    def node(self, path: TreePath) -> TreeNode:
        try:
            return self._node_at[path]
        except KeyError:
            raise DocumentError(f"no node at path {path!r} in {self.doc_id or 'document'}")

    def has_path(self, path: TreePath) -> bool:
        return path in self._node_at

    def preorder_index(self, path: TreePath) -> int:
        return self._paths.index(path)

    def __len__(self) -> int:
        return len(self._paths)


# ---------------------------------------------------------------------------
# Box documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TextBox:
    text: str
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.w <= 0 or self.h <= 0:
            raise DocumentError(f"box dimensions must be positive: {self}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2


def order_boxes(boxes: Sequence[TextBox], row_tolerance: float | None = None,
                tolerance_factor: float = 0.5) -> list[TextBox]:
    """Sort boxes into document order: rows top-to-bottom, left-to-right.

    Boxes whose top edges differ by at most ``row_tolerance`` (default: the
    factor times the median box height) are bucketed into one row.
    """
    if not boxes:
        return []
    if row_tolerance is None:
        row_tolerance = tolerance_factor * statistics.median(b.h for b in boxes)
    ordered = sorted(boxes, key=lambda b: (b.y, b.x))
    rows: list[list[TextBox]] = []
    row_anchor = None
    for box in ordered:
        if row_anchor is None or box.y - row_anchor > row_tolerance:
            rows.append([box])
            row_anchor = box.y
        else:
            rows[-1].append(box)
    result = []
    for row in rows:
        result.extend(sorted(row, key=lambda b: (b.x, b.y)))
    return result


class BoxDocument:
    kind = "box"

    def __init__(self, boxes: Sequence[TextBox], doc_id: str = "",
                 row_tolerance: float | None = None, presorted: bool = False):
        if presorted:
            self.boxes = list(boxes)
        else:
            self.boxes = order_boxes(boxes, row_tolerance=row_tolerance)
        self.doc_id = doc_id

    def box(self, index: BoxIndex) -> TextBox:
        if not isinstance(index, int) or not (0 <= index < len(self.boxes)):
            raise DocumentError(f"no box at index {index!r} in {self.doc_id or 'document'}")
        return self.boxes[index]

    def __len__(self) -> int:
        return len(self.boxes)


Document = Union[TreeDocument, BoxDocument]


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeRegion:
    """All descendants (subtrees) of the anchor's children start..end.

    ``anchor is None`` is the whole-document region: the root's own subtree
    under a virtual super-root. The anchor node itself is never a member.
    """

    anchor: TreePath | None
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.anchor is not None and self.start > self.end:
            raise DocumentError(f"empty sibling span: {self}")

    def contains(self, path: TreePath) -> bool:
        if self.anchor is None:
            return True
        depth = len(self.anchor)
        return (len(path) > depth and path[:depth] == self.anchor
                and self.start <= path[depth] <= self.end)


@dataclass(frozen=True)
class BoxRegion:
    """An ordered, duplicate-free list of box indices."""

    indices: tuple

    def __post_init__(self) -> None:
        if not self.indices:
            raise DocumentError("box region must be non-empty")
        if len(set(self.indices)) != len(self.indices):
            raise DocumentError(f"duplicate indices in box region: {self.indices}")

    def contains(self, index: BoxIndex) -> bool:
        return index in self.indices


Region = Union[TreeRegion, BoxRegion]


def region_locations(region: Region, doc: Document) -> list:
    """Member locations of a region, in document order."""
    if isinstance(region, TreeRegion):
        return [p for p in doc.paths() if region.contains(p)]
    return sorted(region.indices)


def subtree_region(path: TreePath) -> TreeRegion:
    """The region consisting of exactly the subtree rooted at ``path``."""
    if path == ():
        return TreeRegion(None, 0, 0)
    return TreeRegion(path[:-1], path[-1], path[-1])


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------

SINGLE = "single"
ORDERED_LIST = "list"
CONCAT = "concat"


@dataclass(frozen=True)
class AggKind:
    kind: str                 # single | list | concat
    separator: str = " "

    def __post_init__(self) -> None:
        if self.kind not in (SINGLE, ORDERED_LIST, CONCAT):
            raise DocumentError(f"unknown aggregation kind: {self.kind}")

    def combine(self, values: list):
        """Fold extracted strings into the field value; None on mismatch."""
        if not values:
            return None
        if self.kind == SINGLE:
            return values[0] if len(values) == 1 else None
        if self.kind == ORDERED_LIST:
            return list(values)
        return self.separator.join(values)


@dataclass(frozen=True)
class Annotation:
    """Field locations plus the aggregation that yields the field value."""

    locations: tuple
    agg: AggKind
    values: tuple   # expected value strings

    def __post_init__(self) -> None:
        if self.agg.kind == SINGLE and len(self.locations) != 1:
            raise DocumentError("single-valued annotation needs exactly one location")
        if self.agg.kind == ORDERED_LIST and len(self.values) != len(self.locations):
            raise DocumentError("list annotation values must align 1:1 with locations")

    def expected(self):
        """The gold field value this annotation denotes."""
        if self.agg.kind == SINGLE:
            return self.values[0]
        if self.agg.kind == ORDERED_LIST:
            return list(self.values)
        return self.values[0]


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def data_at(doc: Document, loc: Location) -> str:
    """Visible text at a location.

    Trees: the node's own text plus all descendant texts in pre-order,
    single-space-joined and trimmed. Boxes: the box text.
    """
    if isinstance(doc, TreeDocument):
        if not isinstance(loc, tuple):
            raise DocumentError(f"tree document indexed with {loc!r}")
        doc.node(loc)  # raises on invalid path
        return doc._data[loc]
    return doc.box(loc).text


def locate(doc: Document, landmark: str) -> list:
    """All deepest locations whose data contains the landmark, in doc order.

    For trees, an ancestor whose data contains the landmark only by
    concatenation over a containing child is suppressed; only the deepest
    containing nodes are reported.
    """
    if not landmark:
        raise DocumentError("landmark must be non-empty")
    if isinstance(doc, TreeDocument):
        hits = []
        for path in doc.paths():
            if landmark not in doc._data[path]:
                continue
            node = doc.node(path)
            deepest = not any(
                landmark in doc._data[path + (i,)] for i in range(len(node.children))
            )
            if deepest:
                hits.append(path)
        return hits
    return [i for i, box in enumerate(doc.boxes) if landmark in box.text]


def _boxes_bounding_rect(doc: BoxDocument, indices: Iterable[BoxIndex]):
    xs0, ys0, xs1, ys1 = [], [], [], []
    for i in indices:
        b = doc.box(i)
        xs0.append(b.x)
        ys0.append(b.y)
        xs1.append(b.x + b.w)
        ys1.append(b.y + b.h)
    return min(xs0), min(ys0), max(xs1), max(ys1)


def enclosing_region(locs: Iterable[Location], doc: Document) -> Region:
    """Smallest region containing all the given locations.

    Trees: the minimal sibling span under the lowest common ancestor (or
    the subtree of the LCA itself when the LCA is one of the locations).
    Boxes: every box that overlaps the bounding rectangle of the located
    boxes, in document order.
    """
    locs = list(locs)
    if not locs:
        raise DocumentError("cannot enclose an empty location set")
    if isinstance(doc, TreeDocument):
        paths = sorted(set(locs))
        for p in paths:
            doc.node(p)
        lca = paths[0]
        for p in paths[1:]:
            n = 0
            while n < len(lca) and n < len(p) and lca[n] == p[n]:
                n += 1
            lca = lca[:n]
        if any(p == lca for p in paths):
            return subtree_region(lca)
        depth = len(lca)
        idxs = [p[depth] for p in paths]
        return TreeRegion(lca, min(idxs), max(idxs))
    x0, y0, x1, y1 = _boxes_bounding_rect(doc, locs)
    members = []
    for i, b in enumerate(doc.boxes):
        if b.x < x1 and b.x + b.w > x0 and b.y < y1 and b.y + b.h > y0:
            members.append(i)
    return BoxRegion(tuple(members))


# ---------------------------------------------------------------------------
# Normalized tree file format (canonical interchange)
# ---------------------------------------------------------------------------

def _node_to_obj(node: TreeNode) -> dict:
    obj: dict = {"tag": node.tag}
    if node.attrs:
        obj["attrs"] = dict(sorted(node.attrs.items()))
    if node.text:
        obj["text"] = node.text
    if node.children:
        obj["children"] = [_node_to_obj(c) for c in node.children]
    return obj


def _node_from_obj(obj: dict) -> TreeNode:
    if not isinstance(obj, dict) or "tag" not in obj:
        raise DocumentError(f"malformed tree node record: {obj!r}")
    return TreeNode(
        tag=obj["tag"],
        attrs=dict(obj.get("attrs", {})),
        text=obj.get("text", ""),
        children=[_node_from_obj(c) for c in obj.get("children", [])],
    )


def serialize_tree(doc: TreeDocument) -> bytes:
    return json.dumps(_node_to_obj(doc.root), indent=1, sort_keys=True,
                      ensure_ascii=False).encode("utf-8")


HTML_VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})
_KEPT_ATTRS = ("class", "id", "style")


class _StrictTreeBuilder(html.parser.HTMLParser):
    """HTML front-end for the practical well-nested subset.

    Lowercases tags, keeps class/id/style attributes, drops comments and
    script/style payloads, and treats text as the owning element's text.
    Mismatched nesting is an error (with a byte offset), by design — this
    is a strict reader, not a repairing browser parser.
    """

    def __init__(self, raw: str):
        super().__init__(convert_charrefs=True)
        self._raw = raw
        self._line_starts = [0]
        for m in re.finditer("\n", raw):
            self._line_starts.append(m.end())
        self.top: list[TreeNode] = []
        self._stack: list[TreeNode] = []
        self._skip_depth = 0  # inside <script>/<style>

    def _offset(self) -> int:
        line, col = self.getpos()
        return self._line_starts[line - 1] + col

    def _fail(self, message: str):
        raise DocumentError(f"{message} at byte offset {self._offset()}")

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        if self._skip_depth:
            self._skip_depth += 1
            return
        if tag in ("script", "style"):
            self._skip_depth = 1
            return
        node = TreeNode(tag=tag, attrs={k: v or "" for k, v in attrs if k in _KEPT_ATTRS})
        if self._stack:
            self._stack[-1].children.append(node)
        else:
            self.top.append(node)
        if tag not in HTML_VOID_TAGS:
            self._stack.append(node)

    def handle_startendtag(self, tag, attrs):
        tag = tag.lower()
        if self._skip_depth:
            return
        node = TreeNode(tag=tag, attrs={k: v or "" for k, v in attrs if k in _KEPT_ATTRS})
        if self._stack:
            self._stack[-1].children.append(node)
        else:
            self.top.append(node)

    def handle_endtag(self, tag):
        tag = tag.lower()
        if self._skip_depth:
            self._skip_depth -= 1
            return
        if tag in HTML_VOID_TAGS:
            return
        if not self._stack:
            self._fail(f"unexpected closing tag </{tag}>")
        if self._stack[-1].tag != tag:
            self._fail(f"mismatched closing tag </{tag}> (open: <{self._stack[-1].tag}>)")
        self._stack.pop()

    def handle_data(self, data):
        if self._skip_depth or not self._stack:
            return
        chunk = data.strip()
        if not chunk:
            return
        node = self._stack[-1]
        node.text = f"{node.text} {chunk}".strip() if node.text else chunk


def ingest_tree(raw: bytes, doc_id: str = "") -> TreeDocument:
    """Parse either the normalized JSON tree format or restricted HTML."""
    if not raw or not raw.strip():
        raise DocumentError("empty document input")
    text = raw.decode("utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"malformed tree file: {exc}") from exc
        return TreeDocument(_node_from_obj(obj), doc_id=doc_id)
    builder = _StrictTreeBuilder(text)
    builder.feed(text)
    builder.close()
    if builder._stack:
        open_tag = builder._stack[-1].tag
        raise DocumentError(f"unclosed tag <{open_tag}> at end of input")
    roots = builder.top
    if not roots:
        raise DocumentError("no elements found in HTML input")
    if len(roots) == 1:
        return TreeDocument(roots[0], doc_id=doc_id)
    return TreeDocument(TreeNode(tag="html", children=roots), doc_id=doc_id)


# ---------------------------------------------------------------------------
# Box file format
# ---------------------------------------------------------------------------

def serialize_boxes(doc: BoxDocument) -> bytes:
    records = [
        {"text": b.text, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
        for b in doc.boxes
    ]
    return json.dumps(records, indent=1, sort_keys=True, ensure_ascii=False).encode("utf-8")


def ingest_boxes(raw: bytes, doc_id: str = "",
                 row_tolerance: float | None = None) -> BoxDocument:
    if not raw or not raw.strip():
        raise DocumentError("empty document input")
    try:
        records = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"malformed box file: {exc}") from exc
    if not isinstance(records, list):
        raise DocumentError("box file must be a JSON list of records")
    boxes = []
    for rec in records:
        try:
            boxes.append(TextBox(text=str(rec["text"]), x=float(rec["x"]),
                                 y=float(rec["y"]), w=float(rec["w"]), h=float(rec["h"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad box record {rec!r}: {exc}") from exc
    return BoxDocument(boxes, doc_id=doc_id, row_tolerance=row_tolerance)


def load_document(path: str | Path) -> Document:
    """Load a document file; kind is inferred from the extension.

    ``*.boxes.json`` is a box document, anything else is a tree document
    (normalized JSON or HTML).
    """
    path = Path(path)
    raw = path.read_bytes()
    doc_id = path.name.split(".")[0]
    if path.name.endswith(".boxes.json"):
        return ingest_boxes(raw, doc_id=doc_id)
    return ingest_tree(raw, doc_id=doc_id)


# ---------------------------------------------------------------------------
# Annotation files
# ---------------------------------------------------------------------------

def _agg_to_obj(agg: AggKind):
    if agg.kind == CONCAT:
        return {"kind": CONCAT, "separator": agg.separator}
    return {"kind": agg.kind}


def _agg_from_obj(obj) -> AggKind:
    if isinstance(obj, str):
        return AggKind(obj)
    return AggKind(obj["kind"], obj.get("separator", " "))


def _loc_to_obj(loc: Location):
    return list(loc) if isinstance(loc, tuple) else loc


def _loc_from_obj(obj) -> Location:
    return tuple(obj) if isinstance(obj, list) else int(obj)


def annotations_to_obj(annotations: dict) -> dict:
    """``annotations``: doc id -> field name -> Annotation."""
    out: dict = {}
    for doc_id in sorted(annotations):
        fields = {}
        for field_name in sorted(annotations[doc_id]):
            ann = annotations[doc_id][field_name]
            fields[field_name] = {
                "locations": [_loc_to_obj(l) for l in ann.locations],
                "agg": _agg_to_obj(ann.agg),
                "values": list(ann.values),
            }
        out[doc_id] = fields
    return out


def annotations_from_obj(obj: dict) -> dict:
    out: dict = {}
    for doc_id, fields in obj.items():
        out[doc_id] = {}
        for field_name, rec in fields.items():
            out[doc_id][field_name] = Annotation(
                locations=tuple(_loc_from_obj(l) for l in rec["locations"]),
                agg=_agg_from_obj(rec["agg"]),
                values=tuple(rec["values"]),
            )
    return out


def load_annotations(path: str | Path) -> dict:
    return annotations_from_obj(json.loads(Path(path).read_text("utf-8")))


def save_annotations(annotations: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(annotations_to_obj(annotations), indent=1, sort_keys=True,
                   ensure_ascii=False) + "\n",
        "utf-8",
    )
