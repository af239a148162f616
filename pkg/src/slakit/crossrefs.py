"""Bidirectional cross-references.

Each reference is one record in the agreement-level header's table: a
unique id, a source locator, and a target locator.  The prose carries only
small xref-source / xref-target markup, so reference data never bloats the
text.  Inter-document references route through per-document indirection
tables: the source side stores a stable slot id, the target side maps that
slot to the current position.  Editing a target document therefore never
touches the bytes of any document holding a source.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Union

from .diagnostics import Diagnostic, SlaError, ValidationReport, error, warning
from .prose import (
    Anchor,
    Descriptive,
    DocumentId,
    ListItem,
    MarkedSpan,
    Path,
    ProseDocument,
    TableBlock,
    Text,
    apply_markup,
    child_sequence,
    iter_spans,
    path_str,
    plain_text,
    resolve_path,
    span_markup,
    update_at,
    walk,
    xref_source,
    xref_target,
)

if TYPE_CHECKING:
    from .model import AgreementHeader, SmartLegalAgreement

# Reserved incoming slot addressing the target document as a whole.
DOC_SLOT = "@doc"


@dataclass(frozen=True)
class Locator:
    """A position in prose: document, node path, optional text range."""

    doc: DocumentId
    path: Path = ()
    offset: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", tuple(self.path))
        if self.offset is not None:
            s, e = self.offset
            if not (0 <= s <= e):
                raise ValueError(f"bad offset range: {self.offset}")
            object.__setattr__(self, "offset", (s, e))

    def render(self) -> str:
        base = f"{self.doc.value}:{path_str(self.path)}"
        if self.offset is not None:
            base += f"[{self.offset[0]},{self.offset[1]})"
        return base


@dataclass(frozen=True)
class SegmentTarget:
    """A marked span (or the span wrapping a list item's content)."""

    doc: DocumentId
    path: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", tuple(self.path))


@dataclass(frozen=True)
class TableTarget:
    doc: DocumentId
    number: int


@dataclass(frozen=True)
class AnchorTarget:
    doc: DocumentId
    anchor_id: str


@dataclass(frozen=True)
class IndirectTarget:
    """A slot in the target document's incoming indirection table."""

    doc: DocumentId
    slot: str


TargetLocator = Union[SegmentTarget, TableTarget, AnchorTarget, IndirectTarget]


def target_doc(target: TargetLocator) -> DocumentId:
    return target.doc


@dataclass(frozen=True)
class CrossReference:
    xref_id: str
    source: Locator
    target: TargetLocator
    kind: str = "intra"  # intra | inter

    def __post_init__(self) -> None:
        if not self.xref_id:
            raise ValueError("xref_id must be nonempty")
        if self.kind not in ("intra", "inter"):
            raise ValueError(f"bad xref kind: {self.kind!r}")
        same = self.source.doc == target_doc(self.target)
        if same != (self.kind == "intra"):
            raise ValueError("xref kind does not match source/target documents")


@dataclass(frozen=True)
class IncomingSlot:
    """One entry of a document's incoming table.  Stale slots are kept as
    tombstones after their target was deleted, so references into hashed
    documents never dangle silently."""

    slot_id: str
    locator: Locator
    stale: bool = False


@dataclass(frozen=True)
class OutgoingRef:
    xref_id: str
    doc: DocumentId
    slot: str


@dataclass(frozen=True, eq=False)
class IndirectionTables:
    incoming: tuple[IncomingSlot, ...] = ()
    outgoing: tuple[OutgoingRef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "incoming", tuple(self.incoming))
        object.__setattr__(self, "outgoing", tuple(self.outgoing))
        slots = [s.slot_id for s in self.incoming]
        if len(slots) != len(set(slots)):
            raise ValueError("duplicate slot ids in incoming table")
        refs = [o.xref_id for o in self.outgoing]
        if len(refs) != len(set(refs)):
            raise ValueError("duplicate xref ids in outgoing table")

    def slot(self, slot_id: str) -> IncomingSlot | None:
        for s in self.incoming:
            if s.slot_id == slot_id:
                return s
        return None

    def is_empty(self) -> bool:
        return not self.incoming and not self.outgoing

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndirectionTables):
            return NotImplemented
        return sorted(self.incoming, key=lambda s: s.slot_id) == sorted(
            other.incoming, key=lambda s: s.slot_id
        ) and sorted(self.outgoing, key=lambda o: o.xref_id) == sorted(
            other.outgoing, key=lambda o: o.xref_id
        )

    __hash__ = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# Feature search: relocate a reference endpoint after edits
# ---------------------------------------------------------------------------

FeatureKey = tuple  # ("xref-source"|"xref-target", id) | ("anchor", id) | ("table", n)


def find_feature(doc: ProseDocument, key: FeatureKey) -> Path | None:
    kind = key[0]
    if kind in ("xref-source", "xref-target"):
        # a span may carry several xref marks; check every one
        for path, span in iter_spans(doc):
            for m in span.marks:
                if isinstance(m, Descriptive) and m.kind == kind and m.ident == key[1]:
                    return path
    elif kind == "anchor":
        for path, node in walk(doc):
            if isinstance(node, Anchor) and node.anchor_id == key[1]:
                return path
    elif kind == "table":
        for path, node in walk(doc):
            if isinstance(node, TableBlock) and node.number == key[1]:
                return path
    return None


def _feature_of_locator(doc: ProseDocument, loc: Locator) -> FeatureKey | None:
    """Derive the stable feature a locator points at, for later re-search."""
    try:
        node = resolve_path(doc, loc.path)
    except SlaError:
        return None
    if isinstance(node, MarkedSpan):
        m = span_markup(node, "xref-target")
        if m is not None:
            return ("xref-target", m.ident)
    if isinstance(node, Anchor):
        return ("anchor", node.anchor_id)
    if isinstance(node, TableBlock):
        return ("table", node.number)
    if isinstance(node, ListItem):
        for child in node.nodes:
            if isinstance(child, MarkedSpan):
                m = span_markup(child, "xref-target")
                if m is not None:
                    return ("xref-target", m.ident)
    return None


# ---------------------------------------------------------------------------
# Creation
# ---------------------------------------------------------------------------


def _fresh_id(taken: set[str], prefix: str) -> str:
    n = 1
    while f"{prefix}{n}" in taken:
        n += 1
    return f"{prefix}{n}"


def _mark_target(doc: ProseDocument, path: Path, xref_id: str) -> ProseDocument:
    """Ensure the node at ``path`` carries xref-target markup for this id."""
    node = resolve_path(doc, path)
    mark = xref_target(xref_id)
    if isinstance(node, MarkedSpan):
        return update_at(doc, path, lambda s: replace(s, marks=s.marks + (mark,)))
    if isinstance(node, Text):
        return update_at(doc, path, lambda t: MarkedSpan((mark,), (t,)))
    if isinstance(node, ListItem):
        return update_at(
            doc, path, lambda it: replace(it, nodes=(MarkedSpan((mark,), it.nodes),))
        )
    raise SlaError(
        "LOCATOR_INVALID",
        f"{path_str(path)} is not a markable segment ({type(node).__name__})",
    )


def add_crossref(
    agreement: "SmartLegalAgreement",
    source: Locator,
    target: TargetLocator,
    *,
    xref_id: str | None = None,
) -> tuple["SmartLegalAgreement", str]:
    """Create a bidirectional reference.  The source range is wrapped in
    xref-source markup; segment targets gain xref-target markup; targets in
    another document are routed through a freshly allocated incoming slot
    there plus an outgoing entry in the source document's table."""
    from .model import AgreementHeader  # runtime only for header creation

    src_doc = agreement.document(source.doc)
    if src_doc is None:
        raise SlaError("LOCATOR_INVALID", f"no document {source.doc.value!r}")
    tgt_doc = agreement.document(target_doc(target))
    if tgt_doc is None:
        raise SlaError("LOCATOR_INVALID", f"no document {target_doc(target).value!r}")

    header = agreement.agreement_header()
    if header is None:
        raise SlaError("HEADER_MISSING", "agreement has no agreement-level header")
    taken = {x.xref_id for x in header.xref_table}
    xid = xref_id or _fresh_id(taken, "xref-")
    if xid in taken:
        raise SlaError("DUPLICATE_XREF_ID", f"xref id {xid!r} already in table")

    inter = source.doc != target_doc(target)
    kind = "inter" if inter else "intra"

    # Verify / mark the target first; marking keeps every path stable.
    feature: FeatureKey | None = None
    if isinstance(target, SegmentTarget):
        tgt_doc = _mark_target(tgt_doc, target.path, xid)
        feature = ("xref-target", xid)
    elif isinstance(target, AnchorTarget):
        if find_feature(tgt_doc, ("anchor", target.anchor_id)) is None:
            raise SlaError("LOCATOR_INVALID", f"no anchor {target.anchor_id!r}")
        feature = ("anchor", target.anchor_id)
    elif isinstance(target, TableTarget):
        if find_feature(tgt_doc, ("table", target.number)) is None:
            raise SlaError("LOCATOR_INVALID", f"no table number {target.number}")
        feature = ("table", target.number)
    else:  # IndirectTarget: route through an existing slot
        if target.slot != DOC_SLOT:
            hdr = agreement.header_for(target.doc)
            if hdr is None or hdr.indirection.slot(target.slot) is None:
                raise SlaError("LOCATOR_INVALID", f"no incoming slot {target.slot!r}")

    # Self-reference guard: a source may not wrap its own target.
    if not inter and feature is not None:
        tpath = find_feature(tgt_doc, feature)
        if tpath is not None and _range_contains(src_doc, source, tpath):
            raise SlaError("SELF_REFERENCE", "source range contains its own target")

    # Wrap the source range (OVERLAP_FORBIDDEN / LOCATOR_INVALID bubble up).
    work = tgt_doc if not inter else src_doc
    if source.offset is not None:
        s, e = source.offset
        work = apply_markup(work, source.path, s, e, xref_source(xid))
        spath = find_feature(work, ("xref-source", xid))
        assert spath is not None
    else:
        node = resolve_path(work, source.path)
        if isinstance(node, MarkedSpan):
            work = update_at(
                work, source.path, lambda sp: replace(sp, marks=sp.marks + (xref_source(xid),))
            )
        elif isinstance(node, Text):
            work = update_at(work, source.path, lambda t: MarkedSpan((xref_source(xid),), (t,)))
        else:
            raise SlaError("LOCATOR_INVALID", f"{path_str(source.path)} cannot carry markup")
        spath = find_feature(work, ("xref-source", xid))
        assert spath is not None

    if inter:
        new_src_doc, new_tgt_doc = work, tgt_doc
    else:
        new_src_doc = new_tgt_doc = work

    # Resolve the stored target against the fully edited tree.
    stored_target: TargetLocator = target
    slot_locator: Locator | None = None
    if isinstance(target, SegmentTarget):
        tpath = find_feature(new_tgt_doc, ("xref-target", xid))
        assert tpath is not None
        stored_target = SegmentTarget(target.doc, tpath)
        slot_locator = Locator(target.doc, tpath)
    elif isinstance(target, AnchorTarget):
        slot_locator = Locator(target.doc, find_feature(new_tgt_doc, feature) or ())
    elif isinstance(target, TableTarget):
        slot_locator = Locator(target.doc, find_feature(new_tgt_doc, feature) or ())

    docs = []
    for d in agreement.documents:
        if d.id == source.doc:
            docs.append(new_src_doc)
        elif d.id == target_doc(target):
            docs.append(new_tgt_doc)
        else:
            docs.append(d)
    out = replace(agreement, documents=tuple(docs))

    if inter:
        if isinstance(target, IndirectTarget):
            slot_id = target.slot
        else:
            tgt_header = out.header_for(target.doc)
            if tgt_header is None:
                tgt_header = AgreementHeader(level="document", identifiers=(target.doc,))
                out = replace(out, headers=out.headers + (tgt_header,))
            assert slot_locator is not None
            slot_id = _fresh_id({s.slot_id for s in tgt_header.indirection.incoming}, "s")
            new_tables = replace(
                tgt_header.indirection,
                incoming=tgt_header.indirection.incoming + (IncomingSlot(slot_id, slot_locator),),
            )
            out = out.with_header_replaced(tgt_header, replace(tgt_header, indirection=new_tables))
        src_header = out.header_for(source.doc)
        if src_header is None:
            src_header = AgreementHeader(level="document", identifiers=(source.doc,))
            out = replace(out, headers=out.headers + (src_header,))
        new_out_tables = replace(
            src_header.indirection,
            outgoing=src_header.indirection.outgoing
            + (OutgoingRef(xid, target_doc(target), slot_id),),
        )
        out = out.with_header_replaced(src_header, replace(src_header, indirection=new_out_tables))
        stored_target = IndirectTarget(target_doc(target), slot_id)

    record = CrossReference(xid, Locator(source.doc, spath), stored_target, kind)
    header = out.agreement_header()
    assert header is not None
    out = out.with_header_replaced(header, replace(header, xref_table=header.xref_table + (record,)))
    return out, xid


def _range_contains(doc: ProseDocument, source: Locator, target_path: Path) -> bool:
    """Would wrapping the source range enclose the node at target_path?"""
    if source.offset is None:
        return target_path[: len(source.path)] == tuple(source.path)
    if target_path[: len(source.path)] != tuple(source.path):
        return False
    rest = target_path[len(source.path):]
    if not rest:
        return False
    container = resolve_path(doc, source.path)
    children = child_sequence(container) or ()
    pos = 0
    s, e = source.offset
    for i, child in enumerate(children):
        width = len(plain_text(child))
        if i == rest[0]:
            if width == 0:
                return s <= pos < e
            return s <= pos and pos + width <= e
        pos += width
    return False


# ---------------------------------------------------------------------------
# Navigation
# ---------------------------------------------------------------------------


def navigate(agreement: "SmartLegalAgreement", xref_id: str, direction: str) -> Locator:
    """Follow one end of a reference to its current concrete position."""
    if direction not in ("to-target", "to-source"):
        raise SlaError("XREF_NOT_FOUND", f"bad direction {direction!r}")
    header = agreement.agreement_header()
    ref = None
    if header is not None:
        for x in header.xref_table:
            if x.xref_id == xref_id:
                ref = x
                break
    if ref is None:
        raise SlaError("XREF_NOT_FOUND", f"no cross-reference {xref_id!r}")

    if direction == "to-source":
        doc = agreement.document(ref.source.doc)
        if doc is not None:
            path = find_feature(doc, ("xref-source", xref_id))
            if path is not None:
                return Locator(ref.source.doc, path)
        return ref.source

    t = ref.target
    doc = agreement.document(target_doc(t))
    if doc is None:
        raise SlaError("LOCATOR_INVALID", f"no document {target_doc(t).value!r}")
    if isinstance(t, SegmentTarget):
        path = find_feature(doc, ("xref-target", xref_id))
        if path is None:
            raise SlaError("LOCATOR_INVALID", f"target markup for {xref_id!r} missing")
        return Locator(t.doc, path)
    if isinstance(t, AnchorTarget):
        path = find_feature(doc, ("anchor", t.anchor_id))
        if path is None:
            raise SlaError("LOCATOR_INVALID", f"anchor {t.anchor_id!r} missing")
        return Locator(t.doc, path)
    if isinstance(t, TableTarget):
        path = find_feature(doc, ("table", t.number))
        if path is None:
            raise SlaError("LOCATOR_INVALID", f"table {t.number} missing")
        return Locator(t.doc, path)
    if t.slot == DOC_SLOT:
        return Locator(t.doc, ())
    hdr = agreement.header_for(t.doc)
    slot = hdr.indirection.slot(t.slot) if hdr is not None else None
    if slot is None:
        raise SlaError("DANGLING_SLOT", f"slot {t.slot!r} missing in {t.doc.value!r}")
    if slot.stale:
        raise SlaError("STALE_SLOT", f"slot {t.slot!r} target was deleted")
    return slot.locator


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_crossrefs(agreement: "SmartLegalAgreement") -> ValidationReport:
    """Three-way consistency of the reference table, the prose markup, and
    the per-document indirection tables."""
    diags: list[Diagnostic] = []
    header = agreement.agreement_header()
    table = header.xref_table if header is not None else ()

    seen: set[str] = set()
    for x in table:
        if x.xref_id in seen:
            diags.append(error("DUPLICATE_XREF_ID", x.xref_id, "id appears twice in table"))
        seen.add(x.xref_id)

    # Markup occurrences per id and side.
    occurrences: dict[tuple[str, str], list[str]] = {}
    for doc in agreement.documents:
        for _, span in iter_spans(doc):
            for m in span.marks:
                if isinstance(m, Descriptive) and m.kind in ("xref-source", "xref-target"):
                    occurrences.setdefault((m.kind, m.ident or ""), []).append(doc.id.value)

    for (kind, ident), docs in sorted(occurrences.items()):
        if len(docs) > 1:
            code = "MULTIPLE_SOURCES" if kind == "xref-source" else "MULTIPLE_TARGETS"
            diags.append(error(code, ident, f"{kind} markup appears {len(docs)} times"))
        if ident not in seen:
            diags.append(warning("ORPHAN_MARKUP", ident, f"{kind} markup has no table entry"))

    for x in table:
        src_doc = agreement.document(x.source.doc)
        if src_doc is None or find_feature(src_doc, ("xref-source", x.xref_id)) is None:
            diags.append(error("DANGLING_SOURCE", x.xref_id, "source markup not found"))

        t = x.target
        tdoc = agreement.document(target_doc(t))
        if tdoc is None:
            diags.append(error("DANGLING_TARGET", x.xref_id, "target document missing"))
            continue
        if isinstance(t, SegmentTarget):
            if find_feature(tdoc, ("xref-target", x.xref_id)) is None:
                diags.append(error("DANGLING_TARGET", x.xref_id, "target markup not found"))
        elif isinstance(t, AnchorTarget):
            if find_feature(tdoc, ("anchor", t.anchor_id)) is None:
                diags.append(error("DANGLING_TARGET", x.xref_id, f"anchor {t.anchor_id!r} missing"))
        elif isinstance(t, TableTarget):
            if find_feature(tdoc, ("table", t.number)) is None:
                diags.append(error("DANGLING_TARGET", x.xref_id, f"table {t.number} missing"))
        else:
            if t.slot == DOC_SLOT:
                continue
            hdr = agreement.header_for(t.doc)
            slot = hdr.indirection.slot(t.slot) if hdr is not None else None
            if slot is None:
                diags.append(error("DANGLING_SLOT", x.xref_id, f"slot {t.slot!r} missing"))
            elif slot.stale:
                diags.append(error("STALE_SLOT", x.xref_id, f"slot {t.slot!r} is stale"))
            else:
                if slot.locator.doc != t.doc:
                    diags.append(
                        error("INVALID_SLOT_LOCATOR", t.slot, "slot locator leaves its document")
                    )
                else:
                    try:
                        resolve_path(tdoc, slot.locator.path)
                    except SlaError:
                        diags.append(
                            error("INVALID_SLOT_LOCATOR", t.slot, "slot locator does not resolve")
                        )

    # Outgoing tables: every entry joins a table record routed to it.
    by_id = {x.xref_id: x for x in table}
    for h in agreement.headers:
        for o in h.indirection.outgoing:
            x = by_id.get(o.xref_id)
            if (
                x is None
                or not isinstance(x.target, IndirectTarget)
                or x.target.doc != o.doc
                or x.target.slot != o.slot
            ):
                diags.append(error("ORPHAN_OUTGOING", o.xref_id, "outgoing entry has no table record"))

    # Incoming slots: some table record must route to each live slot.
    routed = {
        (x.target.doc, x.target.slot) for x in table if isinstance(x.target, IndirectTarget)
    }
    for h in agreement.headers:
        if h.level != "document" or not h.identifiers:
            continue
        for did in h.identifiers:
            for s in h.indirection.incoming:
                if (did, s.slot_id) not in routed:
                    diags.append(warning("ORPHAN_SLOT", s.slot_id, "no table record routes here"))

    return ValidationReport(tuple(diags))


# ---------------------------------------------------------------------------
# Edits that preserve sources
# ---------------------------------------------------------------------------


def edit_preserving_sources(
    agreement: "SmartLegalAgreement",
    target_doc_id: DocumentId,
    edit: Callable[[ProseDocument], ProseDocument],
) -> tuple["SmartLegalAgreement", ValidationReport]:
    """Apply an edit closure to one document, then remap every reference
    endpoint inside it (incoming slots, stored paths) by re-finding the
    marked features.  Documents holding sources are never touched; a
    deleted target is reported and its slot tombstoned."""
    old_doc = agreement.document(target_doc_id)
    if old_doc is None:
        raise SlaError("LOCATOR_INVALID", f"no document {target_doc_id.value!r}")
    new_doc = edit(old_doc)
    if not isinstance(new_doc, ProseDocument) or new_doc.id != target_doc_id:
        raise SlaError("EDIT_CHANGED_ID", "edit closure must preserve the document id")

    diags: list[Diagnostic] = []
    out = replace(
        agreement,
        documents=tuple(new_doc if d.id == target_doc_id else d for d in agreement.documents),
    )

    hdr = out.header_for(target_doc_id)
    if hdr is not None and hdr.indirection.incoming:
        slots = []
        for s in hdr.indirection.incoming:
            if s.stale:
                slots.append(s)
                continue
            key = _feature_of_locator(old_doc, s.locator)
            path = find_feature(new_doc, key) if key is not None else None
            if path is None:
                diags.append(error("TARGET_LOST", s.slot_id, "edit removed the slotted target"))
                slots.append(replace(s, stale=True))
            else:
                slots.append(replace(s, locator=Locator(target_doc_id, path)))
        out = out.with_header_replaced(
            hdr, replace(hdr, indirection=replace(hdr.indirection, incoming=tuple(slots)))
        )

    header = out.agreement_header()
    if header is not None:
        new_table = []
        for x in header.xref_table:
            y = x
            if x.source.doc == target_doc_id:
                path = find_feature(new_doc, ("xref-source", x.xref_id))
                if path is not None:
                    y = replace(y, source=Locator(target_doc_id, path))
            t = y.target
            if isinstance(t, SegmentTarget) and t.doc == target_doc_id:
                path = find_feature(new_doc, ("xref-target", y.xref_id))
                if path is None:
                    diags.append(error("TARGET_LOST", y.xref_id, "edit removed the target span"))
                else:
                    y = replace(y, target=SegmentTarget(t.doc, path))
            elif isinstance(t, AnchorTarget) and t.doc == target_doc_id:
                if find_feature(new_doc, ("anchor", t.anchor_id)) is None:
                    diags.append(error("TARGET_LOST", y.xref_id, "edit removed the target anchor"))
            elif isinstance(t, TableTarget) and t.doc == target_doc_id:
                if find_feature(new_doc, ("table", t.number)) is None:
                    diags.append(error("TARGET_LOST", y.xref_id, "edit removed the target table"))
            new_table.append(y)
        if tuple(new_table) != header.xref_table:
            out = out.with_header_replaced(header, replace(header, xref_table=tuple(new_table)))

    return out, ValidationReport(tuple(diags))
