"""Legal-prose document trees: markup taxonomy, structural nodes, and edits.

A document is a sequence of nodes.  Inline runs of text live in ``Text``
nodes; markup is carried by ``MarkedSpan`` wrappers so that spans nest and
can never partially overlap.  Layout devices that need their own syntactic
rules (lists, tables, optional-clause choices) are distinct node shapes, so
a list item outside a list is simply unrepresentable.

Positions inside a document are addressed by *paths*: tuples of child
indices walked from the root.  Every container type exposes exactly one
ordered child sequence (a list block's children are its items, a table's
are its rows, and so on), so a path is just integers all the way down.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

from .diagnostics import Diagnostic, SlaError, ValidationReport, error, warning

PRESENTATIONAL_KINDS = frozenset({"bold", "italic", "underline"})
DESCRIPTIVE_KINDS = frozenset(
    {
        "heading",
        "section",
        "clause",
        "parameter",
        "other-data",
        "to-be-redacted",
        "has-been-redacted",
        "xref-source",
        "xref-target",
    }
)
# Kinds that point at something and therefore need an identifier.
IDENT_KINDS = frozenset({"parameter", "other-data", "xref-source", "xref-target"})

LIST_STYLES = frozenset({"numbered", "bulleted", "dashed"})
PART_KINDS = frozenset({"recitals", "definitions", "schedule", "annex", "body"})

REDACTION_PLACEHOLDER = "█" * 8

_HEX64 = re.compile(r"^[0-9a-f]{64}$")
_UUID = re.compile(r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$")


@dataclass(frozen=True)
class DocumentId:
    """Identifier for a prose document; global ids are hex digests or UUIDs."""

    scope: str
    value: str

    def __post_init__(self) -> None:
        if self.scope not in ("local", "global"):
            raise ValueError(f"bad id scope: {self.scope!r}")
        if not self.value:
            raise ValueError("document id value must be nonempty")
        if self.scope == "global" and not (_HEX64.match(self.value) or _UUID.match(self.value)):
            raise ValueError(f"global id must be a hex digest or UUID: {self.value!r}")

    def sort_key(self) -> tuple[str, str]:
        return (self.scope, self.value)

    def __str__(self) -> str:
        return self.value


def local_id(value: str) -> DocumentId:
    return DocumentId("local", value)


def fresh_global_id() -> DocumentId:
    return DocumentId("global", str(uuid.uuid4()))


# ---------------------------------------------------------------------------
# Markup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Presentational:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in PRESENTATIONAL_KINDS:
            raise ValueError(f"unknown presentational kind: {self.kind!r}")


@dataclass(frozen=True)
class Descriptive:
    kind: str
    ident: str | None = None
    attrs: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in DESCRIPTIVE_KINDS:
            raise ValueError(f"unknown descriptive kind: {self.kind!r}")
        if self.kind in IDENT_KINDS:
            if not self.ident:
                raise ValueError(f"{self.kind} markup needs an identifier")
        elif self.ident is not None:
            raise ValueError(f"{self.kind} markup takes no identifier")


Markup = Union[Presentational, Descriptive]


def markup_discriminator(m: Markup) -> tuple:
    """What makes two markups 'the same kind' for duplicate detection."""
    if isinstance(m, Presentational):
        return ("p", m.kind)
    return ("d", m.kind, m.ident)


def markup_sort_key(m: Markup) -> tuple:
    """Total order: presentational kinds first, then descriptive by kind
    then identifier; attributes break remaining ties."""
    if isinstance(m, Presentational):
        return (0, m.kind)
    return (1, m.kind, m.ident or "", tuple(sorted(m.attrs.items())))


def bold() -> Presentational:
    return Presentational("bold")


def italic() -> Presentational:
    return Presentational("italic")


def underline() -> Presentational:
    return Presentational("underline")


def heading() -> Descriptive:
    return Descriptive("heading")


def section() -> Descriptive:
    return Descriptive("section")


def clause() -> Descriptive:
    return Descriptive("clause")


def parameter_markup(name: str, attrs: Mapping[str, str] | None = None) -> Descriptive:
    return Descriptive("parameter", name, dict(attrs or {}))


def other_data_markup(name: str, attrs: Mapping[str, str] | None = None) -> Descriptive:
    return Descriptive("other-data", name, dict(attrs or {}))


def xref_source(xref_id: str) -> Descriptive:
    return Descriptive("xref-source", xref_id)


def xref_target(xref_id: str) -> Descriptive:
    return Descriptive("xref-target", xref_id)


def to_be_redacted() -> Descriptive:
    return Descriptive("to-be-redacted")


def has_been_redacted() -> Descriptive:
    return Descriptive("has-been-redacted")


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Text:
    content: str


@dataclass(frozen=True)
class MarkedSpan:
    marks: tuple[Markup, ...]
    children: tuple["ProseNode", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "marks", tuple(self.marks))
        object.__setattr__(self, "children", tuple(self.children))
        if not self.marks:
            raise ValueError("a marked span must carry at least one markup")


@dataclass(frozen=True)
class Anchor:
    anchor_id: str

    def __post_init__(self) -> None:
        if not self.anchor_id:
            raise ValueError("anchor id must be nonempty")


@dataclass(frozen=True)
class ListItem:
    nodes: tuple["ProseNode", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class ListBlock:
    style: str
    items: tuple[ListItem, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if self.style not in LIST_STYLES:
            raise ValueError(f"unknown list style: {self.style!r}")


@dataclass(frozen=True)
class TableCell:
    nodes: tuple["ProseNode", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class TableRow:
    cells: tuple[TableCell, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))


@dataclass(frozen=True)
class TableBlock:
    number: int
    caption: str | None = None
    rows: tuple[TableRow, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.number < 1:
            raise ValueError("table number must be positive")


@dataclass(frozen=True)
class ChoiceOption:
    nodes: tuple["ProseNode", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class ChoiceBlock:
    choice_id: str
    options: tuple[ChoiceOption, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(self.options))
        if not self.choice_id:
            raise ValueError("choice id must be nonempty")


@dataclass(frozen=True)
class PartBoundary:
    part_kind: str
    title: str = ""

    def __post_init__(self) -> None:
        if self.part_kind not in PART_KINDS:
            raise ValueError(f"unknown part kind: {self.part_kind!r}")


ProseNode = Union[Text, MarkedSpan, Anchor, ListBlock, TableBlock, ChoiceBlock, PartBoundary]


@dataclass(frozen=True)
class ProseDocument:
    id: DocumentId
    root: tuple[ProseNode, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", tuple(self.root))


@dataclass(frozen=True)
class RedactionReport:
    spans_redacted: int = 0
    bytes_removed: int = 0
    locators: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Paths and traversal
# ---------------------------------------------------------------------------

Path = tuple[int, ...]

# Containers whose child sequence is inline prose (spans may wrap it).
_INLINE_CONTAINERS = (ProseDocument, MarkedSpan, ListItem, TableCell, ChoiceOption)


def path_str(path: Path) -> str:
    return ".".join(str(i) for i in path) if path else "-"


def child_sequence(obj: object) -> tuple | None:
    """The single ordered child sequence of a container, or None for leaves."""
    if isinstance(obj, ProseDocument):
        return obj.root
    if isinstance(obj, MarkedSpan):
        return obj.children
    if isinstance(obj, ListBlock):
        return obj.items
    if isinstance(obj, ListItem):
        return obj.nodes
    if isinstance(obj, TableBlock):
        return obj.rows
    if isinstance(obj, TableRow):
        return obj.cells
    if isinstance(obj, TableCell):
        return obj.nodes
    if isinstance(obj, ChoiceBlock):
        return obj.options
    if isinstance(obj, ChoiceOption):
        return obj.nodes
    return None


def _with_children(obj, seq: tuple):
    if isinstance(obj, ProseDocument):
        return replace(obj, root=tuple(seq))
    if isinstance(obj, MarkedSpan):
        return replace(obj, children=tuple(seq))
    if isinstance(obj, ListBlock):
        return replace(obj, items=tuple(seq))
    if isinstance(obj, ListItem):
        return replace(obj, nodes=tuple(seq))
    if isinstance(obj, TableBlock):
        return replace(obj, rows=tuple(seq))
    if isinstance(obj, TableRow):
        return replace(obj, cells=tuple(seq))
    if isinstance(obj, TableCell):
        return replace(obj, nodes=tuple(seq))
    if isinstance(obj, ChoiceBlock):
        return replace(obj, options=tuple(seq))
    if isinstance(obj, ChoiceOption):
        return replace(obj, nodes=tuple(seq))
    raise SlaError("LOCATOR_INVALID", f"{type(obj).__name__} has no children")


def resolve_path(doc: ProseDocument, path: Path):
    """The object (node, item, row, cell, or option) at ``path``."""
    obj: object = doc
    for depth, index in enumerate(path):
        seq = child_sequence(obj)
        if seq is None or not 0 <= index < len(seq):
            raise SlaError(
                "LOCATOR_INVALID",
                f"path {path_str(path)} does not resolve (step {depth})",
            )
        obj = seq[index]
    return obj


def update_at(doc: ProseDocument, path: Path, fn) -> ProseDocument:
    """Rebuild ``doc`` with the object at ``path`` replaced by ``fn(obj)``."""

    def go(obj, rest: Path):
        if not rest:
            return fn(obj)
        seq = child_sequence(obj)
        if seq is None or not 0 <= rest[0] < len(seq):
            raise SlaError("LOCATOR_INVALID", f"path {path_str(path)} does not resolve")
        new_child = go(seq[rest[0]], rest[1:])
        return _with_children(obj, seq[: rest[0]] + (new_child,) + seq[rest[0] + 1 :])

    return go(doc, path)


def walk(doc: ProseDocument) -> Iterator[tuple[Path, object]]:
    """Pre-order traversal of every node, item, row, cell, and option."""

    def go(obj, path: Path):
        seq = child_sequence(obj)
        if seq is not None:
            for i, child in enumerate(seq):
                yield (path + (i,), child)
                yield from go(child, path + (i,))

    yield from go(doc, ())


def plain_text(obj: object) -> str:
    """Concatenated Text content of a subtree (captions/titles excluded)."""
    if isinstance(obj, Text):
        return obj.content
    seq = child_sequence(obj)
    if seq is None:
        return ""
    return "".join(plain_text(c) for c in seq)


def iter_spans(doc: ProseDocument) -> Iterator[tuple[Path, MarkedSpan]]:
    for path, node in walk(doc):
        if isinstance(node, MarkedSpan):
            yield path, node


def span_markup(span: MarkedSpan, kind: str) -> Descriptive | None:
    """First descriptive markup of ``kind`` carried by the span, if any."""
    for m in span.marks:
        if isinstance(m, Descriptive) and m.kind == kind:
            return m
    return None


def find_span(doc: ProseDocument, kind: str, ident: str) -> Path | None:
    """Path of the first span carrying descriptive markup (kind, ident)."""
    for path, span in iter_spans(doc):
        for m in span.marks:
            if isinstance(m, Descriptive) and m.kind == kind and m.ident == ident:
                return path
    return None


def find_anchor(doc: ProseDocument, anchor_id: str) -> Path | None:
    for path, node in walk(doc):
        if isinstance(node, Anchor) and node.anchor_id == anchor_id:
            return path
    return None


def find_table(doc: ProseDocument, number: int) -> Path | None:
    for path, node in walk(doc):
        if isinstance(node, TableBlock) and node.number == number:
            return path
    return None


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


def validate_structure(doc: ProseDocument) -> ValidationReport:
    """Check the document-level rules that the node shapes cannot enforce."""
    diags: list[Diagnostic] = []
    anchors: dict[str, Path] = {}
    tables: dict[int, Path] = {}
    choices: dict[str, Path] = {}

    def loc(path: Path) -> str:
        return f"{doc.id.value}:{path_str(path)}"

    for path, node in walk(doc):
        if isinstance(node, MarkedSpan):
            seen: set[tuple] = set()
            for m in node.marks:
                d = markup_discriminator(m)
                if d in seen:
                    diags.append(
                        error("DUPLICATE_MARKUP", loc(path), f"duplicate markup {d[1]!r} on one span")
                    )
                seen.add(d)
        elif isinstance(node, Anchor):
            if node.anchor_id in anchors:
                diags.append(
                    error("DUPLICATE_ANCHOR", loc(path), f"anchor id {node.anchor_id!r} reused")
                )
            else:
                anchors[node.anchor_id] = path
        elif isinstance(node, TableBlock):
            if node.number in tables:
                diags.append(
                    error("DUPLICATE_TABLE_NUMBER", loc(path), f"table number {node.number} reused")
                )
            else:
                tables[node.number] = path
            widths = {len(row.cells) for row in node.rows}
            if len(widths) > 1:
                diags.append(
                    error("RAGGED_TABLE", loc(path), f"rows have unequal cell counts {sorted(widths)}")
                )
        elif isinstance(node, ChoiceBlock):
            if node.choice_id in choices:
                diags.append(
                    error("DUPLICATE_CHOICE_ID", loc(path), f"choice id {node.choice_id!r} reused")
                )
            else:
                choices[node.choice_id] = path
            if len(node.options) < 2:
                diags.append(
                    warning(
                        "DEGENERATE_CHOICE",
                        loc(path),
                        f"choice {node.choice_id!r} offers {len(node.options)} option(s)",
                    )
                )

    return ValidationReport(tuple(diags))


# ---------------------------------------------------------------------------
# Markup application
# ---------------------------------------------------------------------------


def apply_markup(
    doc: ProseDocument, path: Path, start: int, end: int, markup: Markup
) -> ProseDocument:
    """Wrap the text range [start, end) under the container at ``path`` in a
    new marked span, splitting Text nodes at the boundaries.

    Offsets count Unicode code points of the container's plain text.  A
    range that partially covers an existing span or a structural block is
    rejected: spans nest, they never overlap.
    """
    container = resolve_path(doc, path)
    if not isinstance(container, _INLINE_CONTAINERS):
        raise SlaError(
            "LOCATOR_INVALID", f"{type(container).__name__} at {path_str(path)} holds no inline text"
        )
    children = child_sequence(container)
    assert children is not None
    total = sum(len(plain_text(c)) for c in children)
    if not (0 <= start <= end <= total):
        raise SlaError("LOCATOR_INVALID", f"range [{start},{end}) outside text of length {total}")

    before: list[ProseNode] = []
    covered: list[ProseNode] = []
    after: list[ProseNode] = []
    pos = 0
    for child in children:
        clen = len(plain_text(child))
        if clen == 0:
            (covered if start <= pos < end else (before if pos < start else after)).append(child)
            continue
        cstart, cend = pos, pos + clen
        pos = cend
        if cend <= start:
            before.append(child)
        elif cstart >= end:
            after.append(child)
        elif start <= cstart and cend <= end:
            covered.append(child)
        elif isinstance(child, Text):
            cut_from = max(start - cstart, 0)
            cut_to = min(end - cstart, clen)
            if child.content[:cut_from]:
                before.append(Text(child.content[:cut_from]))
            if child.content[cut_from:cut_to]:
                covered.append(Text(child.content[cut_from:cut_to]))
            if child.content[cut_to:]:
                after.append(Text(child.content[cut_to:]))
        else:
            raise SlaError(
                "OVERLAP_FORBIDDEN",
                f"range [{start},{end}) partially covers a {type(child).__name__}",
            )

    new_seq = tuple(before) + (MarkedSpan((markup,), tuple(covered)),) + tuple(after)
    return update_at(doc, path, lambda obj: _with_children(obj, new_seq))


# ---------------------------------------------------------------------------
# Redaction
# ---------------------------------------------------------------------------


def redact(doc: ProseDocument) -> tuple[ProseDocument, RedactionReport]:
    """Blank every to-be-redacted span down to a fixed-width placeholder.

    The placeholder neither preserves content nor length.  The outermost
    marked span wins when redaction markup nests; inner text still counts
    toward ``bytes_removed``.
    """
    spans = 0
    removed = 0
    locators: list[str] = []

    def go_seq(seq: tuple, path: Path) -> tuple:
        out = []
        for i, node in enumerate(seq):
            out.append(go_node(node, path + (i,)))
        return tuple(out)

    def go_node(node, path: Path):
        nonlocal spans, removed
        if isinstance(node, MarkedSpan):
            if span_markup(node, "to-be-redacted") is not None:
                spans += 1
                removed += len(plain_text(node).encode("utf-8"))
                locators.append(f"{doc.id.value}:{path_str(path)}")
                marks = []
                for m in node.marks:
                    if isinstance(m, Descriptive) and m.kind == "to-be-redacted":
                        m = has_been_redacted()
                    if m not in marks:
                        marks.append(m)
                return MarkedSpan(tuple(marks), (Text(REDACTION_PLACEHOLDER),))
            return replace(node, children=go_seq(node.children, path))
        seq = child_sequence(node)
        if seq is None:
            return node
        return _with_children(node, go_seq(seq, path))

    new_doc = replace(doc, root=go_seq(doc.root, ()))
    report = RedactionReport(spans, removed, tuple(locators))
    return new_doc, report


# ---------------------------------------------------------------------------
# Optional clauses
# ---------------------------------------------------------------------------


def resolve_choice(doc: ProseDocument, choice_id: str, option_index: int) -> ProseDocument:
    """Replace the choice block ``choice_id`` by its ``option_index``-th
    option's content, spliced in place."""
    found = False

    def go_seq(seq: tuple) -> tuple:
        nonlocal found
        out: list = []
        for node in seq:
            if isinstance(node, ChoiceBlock) and node.choice_id == choice_id and not found:
                found = True
                if not 0 <= option_index < len(node.options):
                    raise SlaError(
                        "OPTION_OUT_OF_RANGE",
                        f"choice {choice_id!r} has {len(node.options)} options, "
                        f"index {option_index} requested",
                    )
                out.extend(go_seq(node.options[option_index].nodes))
            else:
                out.append(go_node(node))
        return tuple(out)

    def go_node(node):
        seq = child_sequence(node)
        if seq is None:
            return node
        if isinstance(node, (MarkedSpan, ListItem, TableCell, ChoiceOption)):
            return _with_children(node, go_seq(seq))
        return _with_children(node, tuple(go_node(c) for c in seq))

    new_root = go_seq(doc.root)
    if not found:
        raise SlaError("CHOICE_NOT_FOUND", f"no choice block with id {choice_id!r}")
    return replace(doc, root=new_root)


def list_choices(doc: ProseDocument) -> list[tuple[str, int]]:
    """(choice_id, option count) for every choice block, in document order."""
    return [
        (node.choice_id, len(node.options))
        for _, node in walk(doc)
        if isinstance(node, ChoiceBlock)
    ]


# ---------------------------------------------------------------------------
# Part separation
# ---------------------------------------------------------------------------


def split_parts(doc: ProseDocument) -> list[tuple[str, str, tuple[ProseNode, ...]]]:
    """Partition the root sequence at part boundaries.

    Content before the first boundary becomes an untitled body part, which
    is omitted when empty.  Concatenating the returned node sequences
    reproduces the root minus the boundary nodes.
    """
    parts: list[tuple[str, str, tuple[ProseNode, ...]]] = []
    kind, title = "body", ""
    pending: list[ProseNode] = []
    leading = True
    for node in doc.root:
        if isinstance(node, PartBoundary):
            if pending or not leading:
                parts.append((kind, title, tuple(pending)))
            kind, title = node.part_kind, node.title
            pending = []
            leading = False
        else:
            pending.append(node)
    if pending or not leading:
        parts.append((kind, title, tuple(pending)))
    return parts
