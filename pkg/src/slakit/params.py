"""Typed parameters: identification in prose, prose/element synchronization,
incremental binding across documents, and execution-parameter collection.

A parameter is a name/type/value triple.  Its value may be bound locally,
left unbound (declared, value to come), or deferred to a *binding location*
in another document.  Resolution follows those locations transitively and
also matches plain unbound names against same-named declarations elsewhere,
since parameter scope is agreement-wide.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import date
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence, Union

from .diagnostics import Diagnostic, SlaError, ValidationReport, error
from .prose import (
    Descriptive,
    DocumentId,
    MarkedSpan,
    Path,
    ProseDocument,
    iter_spans,
    path_str,
    plain_text,
    resolve_path,
)

if TYPE_CHECKING:
    from .model import SmartLegalAgreement

BUILTIN_TYPES = frozenset({"text", "integer", "decimal", "date", "boolean"})

# Well-known parameter attribute keys.
ATTR_EXECUTION = "execution"
ATTR_PROSE = "prose"


class PlacementPolicy(Enum):
    """Where parameter data is allowed to live within an agreement."""

    PROSE_ONLY = "prose-only"
    ELEMENT_ONLY = "element-only"
    DUAL = "dual"


# ---------------------------------------------------------------------------
# Types and values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeRef:
    """A builtin type, a reference to a named type definition, or a
    homogeneous list.  Text form: ``integer``, ``Percentage``,
    ``list<decimal>``."""

    kind: str  # builtin | named | list
    name: str | None = None
    element: "TypeRef | None" = None

    def __post_init__(self) -> None:
        if self.kind == "builtin":
            if self.name not in BUILTIN_TYPES:
                raise ValueError(f"unknown builtin type: {self.name!r}")
        elif self.kind == "named":
            if not self.name or self.name in BUILTIN_TYPES or "<" in self.name:
                raise ValueError(f"bad named type id: {self.name!r}")
        elif self.kind == "list":
            if self.element is None:
                raise ValueError("list type needs an element type")
        else:
            raise ValueError(f"bad type kind: {self.kind!r}")

    @classmethod
    def builtin(cls, name: str) -> "TypeRef":
        return cls("builtin", name)

    @classmethod
    def named(cls, type_id: str) -> "TypeRef":
        return cls("named", type_id)

    @classmethod
    def list_of(cls, element: "TypeRef") -> "TypeRef":
        return cls("list", None, element)

    @classmethod
    def parse(cls, text: str) -> "TypeRef":
        text = text.strip()
        if text.startswith("list<") and text.endswith(">"):
            return cls.list_of(cls.parse(text[5:-1]))
        if text in BUILTIN_TYPES:
            return cls.builtin(text)
        return cls.named(text)

    def format(self) -> str:
        if self.kind == "list":
            assert self.element is not None
            return f"list<{self.element.format()}>"
        assert self.name is not None
        return self.name


TEXT = TypeRef.builtin("text")
INTEGER = TypeRef.builtin("integer")
DECIMAL = TypeRef.builtin("decimal")
DATE = TypeRef.builtin("date")
BOOLEAN = TypeRef.builtin("boolean")

# A parameter value: scalar or homogeneous tuple of values.
ParamValue = Union[str, int, Decimal, date, bool, tuple]


@dataclass(frozen=True)
class TypeDef:
    """A named type: a base type plus an optional constraint (full-match
    pattern for text, inclusive numeric range for integer/decimal)."""

    id: str
    base: TypeRef
    pattern: str | None = None
    minimum: Decimal | None = None
    maximum: Decimal | None = None

    def __post_init__(self) -> None:
        if not self.id or self.id in BUILTIN_TYPES:
            raise ValueError(f"bad type definition id: {self.id!r}")


@dataclass(frozen=True)
class BindingTarget:
    doc: DocumentId
    name: str


@dataclass(frozen=True)
class Parameter:
    name: str
    type_tag: TypeRef = TEXT
    status: str = "unbound"  # bound | unbound | binding-location
    value: ParamValue | None = None
    target: BindingTarget | None = None
    attrs: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be nonempty")
        if self.status not in ("bound", "unbound", "binding-location"):
            raise ValueError(f"bad parameter status: {self.status!r}")

    def is_execution(self) -> bool:
        return self.attrs.get(ATTR_EXECUTION) == "true"


def bound(name: str, type_tag: TypeRef, value: ParamValue, **attrs: str) -> Parameter:
    return Parameter(name, type_tag, "bound", value, None, dict(attrs))


def unbound(name: str, type_tag: TypeRef = TEXT, **attrs: str) -> Parameter:
    return Parameter(name, type_tag, "unbound", None, None, dict(attrs))


def located(name: str, target_doc: DocumentId, target_name: str | None = None,
            type_tag: TypeRef = TEXT, **attrs: str) -> Parameter:
    return Parameter(
        name, type_tag, "binding-location", None,
        BindingTarget(target_doc, target_name or name), dict(attrs),
    )


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Parameters owned by one document, or by the agreement itself when
    ``owner`` is None.  Entry order carries no meaning."""

    owner: DocumentId | None
    entries: tuple[Parameter, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [p.name for p in self.entries]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate parameter names in set: {dupes}")

    def get(self, name: str) -> Parameter | None:
        for p in self.entries:
            if p.name == name:
                return p
        return None

    def owner_key(self) -> tuple:
        return (0,) if self.owner is None else (1,) + self.owner.sort_key()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParameterSet):
            return NotImplemented
        key = lambda p: p.name
        return self.owner == other.owner and sorted(self.entries, key=key) == sorted(
            other.entries, key=key
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Binding:
    value: ParamValue
    provenance: DocumentId | None


@dataclass(frozen=True)
class ResolvedEnvironment:
    """Qualified name -> resolved value with the document it was bound in."""

    bindings: Mapping[tuple[DocumentId | None, str], Binding] = field(default_factory=dict)

    def lookup(self, owner: DocumentId | None, name: str) -> Binding | None:
        return self.bindings.get((owner, name))


# ---------------------------------------------------------------------------
# Literals (the text form used in markup attributes and CLI output)
# ---------------------------------------------------------------------------


def format_value(value: ParamValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, Decimal)):
        return str(value)
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, tuple):
        return "[" + ",".join(format_value(v) for v in value) + "]"
    return value


def parse_value(literal: str, type_tag: TypeRef, defs: Sequence[TypeDef] = ()) -> ParamValue:
    """Parse the text form of a value according to its type.  Raises
    SlaError VALUE_TYPE_MISMATCH when the literal does not fit."""
    base = _ultimate_base(type_tag, defs)
    try:
        if base.kind == "list":
            assert base.element is not None
            inner = literal.strip()
            if not (inner.startswith("[") and inner.endswith("]")):
                raise ValueError("list literal must be bracketed")
            body = inner[1:-1].strip()
            items = _split_list_literal(body)
            return tuple(parse_value(item, base.element, defs) for item in items)
        name = base.name
        if name == "text":
            return literal
        if name == "integer":
            return int(literal, 10)
        if name == "decimal":
            return Decimal(literal)
        if name == "date":
            return date.fromisoformat(literal)
        if name == "boolean":
            if literal in ("true", "false"):
                return literal == "true"
            raise ValueError("boolean literal must be true or false")
    except (ValueError, InvalidOperation) as exc:
        raise SlaError(
            "VALUE_TYPE_MISMATCH", f"{literal!r} is not a {type_tag.format()}: {exc}"
        ) from exc
    raise SlaError("VALUE_TYPE_MISMATCH", f"cannot parse {literal!r} as {type_tag.format()}")


def _split_list_literal(body: str) -> list[str]:
    if not body:
        return []
    items, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            items.append(body[start:i].strip())
            start = i + 1
    items.append(body[start:].strip())
    return items


def values_equal(a: ParamValue, b: ParamValue) -> bool:
    """Numeric values compare by magnitude (4.50 equals 4.5); everything
    else compares exactly."""
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b if isinstance(a, bool) and isinstance(b, bool) else False
    if isinstance(a, (int, Decimal)) and isinstance(b, (int, Decimal)):
        return Decimal(a) == Decimal(b)
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------


def _find_def(type_id: str, defs: Sequence[TypeDef]) -> TypeDef | None:
    for d in defs:
        if d.id == type_id:
            return d
    return None


def _ultimate_base(tref: TypeRef, defs: Sequence[TypeDef], _seen: frozenset = frozenset()) -> TypeRef:
    """Builtin or list type at the bottom of a named-type chain."""
    if tref.kind != "named":
        return tref
    if tref.name in _seen:
        raise SlaError("TYPE_CYCLE", f"type definitions cycle at {tref.name!r}")
    d = _find_def(tref.name or "", defs)
    if d is None:
        raise SlaError("UNKNOWN_TYPE", f"no definition for type {tref.name!r}")
    return _ultimate_base(d.base, defs, _seen | {tref.name})


def _check_value(
    value: ParamValue, tref: TypeRef, defs: Sequence[TypeDef], where: str, diags: list[Diagnostic]
) -> None:
    if tref.kind == "named":
        d = _find_def(tref.name or "", defs)
        if d is None:
            diags.append(error("UNKNOWN_TYPE", where, f"no definition for type {tref.name!r}"))
            return
        _check_value(value, d.base, defs, where, diags)
        if d.pattern is not None and isinstance(value, str):
            if re.fullmatch(d.pattern, value) is None:
                diags.append(
                    error("CONSTRAINT_VIOLATION", where,
                          f"{value!r} does not match pattern for {d.id}")
                )
        if (d.minimum is not None or d.maximum is not None) and isinstance(
            value, (int, Decimal)
        ) and not isinstance(value, bool):
            num = Decimal(value)
            if d.minimum is not None and num < d.minimum:
                diags.append(
                    error("CONSTRAINT_VIOLATION", where, f"{num} below minimum {d.minimum} for {d.id}")
                )
            if d.maximum is not None and num > d.maximum:
                diags.append(
                    error("CONSTRAINT_VIOLATION", where, f"{num} above maximum {d.maximum} for {d.id}")
                )
        return
    if tref.kind == "list":
        if not isinstance(value, tuple):
            diags.append(error("VALUE_TYPE_MISMATCH", where, "expected a list value"))
            return
        assert tref.element is not None
        for i, item in enumerate(value):
            _check_value(item, tref.element, defs, f"{where}[{i}]", diags)
        return
    name = tref.name
    ok = (
        (name == "text" and isinstance(value, str))
        or (name == "integer" and isinstance(value, int) and not isinstance(value, bool))
        or (name == "decimal" and isinstance(value, (int, Decimal)) and not isinstance(value, bool))
        or (name == "date" and isinstance(value, date))
        or (name == "boolean" and isinstance(value, bool))
    )
    if not ok:
        diags.append(
            error("VALUE_TYPE_MISMATCH", where, f"value {value!r} is not a {name}")
        )


def typecheck_parameter(p: Parameter, defs: Sequence[TypeDef] = ()) -> ValidationReport:
    """Check status/value coherence and that a bound value fits its type,
    applying the constraints of every named type along the chain."""
    diags: list[Diagnostic] = []
    where = p.name
    try:
        _ultimate_base(p.type_tag, defs)
    except SlaError as exc:
        diags.append(error(exc.code, where, exc.message))
        return ValidationReport(tuple(diags))
    if p.status == "bound":
        if p.value is None:
            diags.append(error("MISSING_VALUE", where, "bound parameter has no value"))
        else:
            _check_value(p.value, p.type_tag, defs, where, diags)
    elif p.status == "unbound":
        if p.value is not None:
            diags.append(error("UNEXPECTED_VALUE", where, "unbound parameter carries a value"))
    else:  # binding-location
        if p.value is not None:
            diags.append(error("UNEXPECTED_VALUE", where, "located parameter carries a value"))
        if p.target is None:
            diags.append(error("MISSING_TARGET", where, "binding location names no target"))
    return ValidationReport(tuple(diags))


# ---------------------------------------------------------------------------
# Identification in prose
# ---------------------------------------------------------------------------


def identify_parameters(doc: ProseDocument) -> list[tuple[str, Path]]:
    """Every parameter markup in the document, in document order."""
    out: list[tuple[str, Path]] = []
    for path, span in iter_spans(doc):
        for m in span.marks:
            if isinstance(m, Descriptive) and m.kind == "parameter":
                assert m.ident is not None
                out.append((m.ident, path))
    return out


def _prose_param_spans(doc: ProseDocument) -> list[tuple[Path, MarkedSpan, Descriptive]]:
    out = []
    for path, span in iter_spans(doc):
        for m in span.marks:
            if isinstance(m, Descriptive) and m.kind == "parameter":
                out.append((path, span, m))
    return out


# ---------------------------------------------------------------------------
# Binding resolution
# ---------------------------------------------------------------------------

_AGREEMENT_LOC = "@agreement"


def _owner_label(owner: DocumentId | None) -> str:
    return owner.value if owner is not None else _AGREEMENT_LOC


def resolve_bindings(
    sets: Sequence[ParameterSet],
) -> tuple[ResolvedEnvironment, ValidationReport]:
    """Resolve every declared name to a bound value where possible.

    Explicit binding locations are followed transitively.  A plain unbound
    declaration matches same-named declarations in other documents.  The
    environment maps every declaration that reaches exactly one distinct
    value; everything else is reported (no value, ambiguous values,
    location cycles, or locations naming undeclared targets).
    """
    owners = [s.owner for s in sets]
    if len(set(owners)) != len(owners):
        raise SlaError("DUPLICATE_DOC_ID", "parameter sets share an owner")

    Node = tuple  # (owner: DocumentId | None, name: str)
    decl: dict[Node, Parameter] = {}
    by_name: dict[str, list[Node]] = {}
    for s in sets:
        for p in s.entries:
            node = (s.owner, p.name)
            decl[node] = p
            by_name.setdefault(p.name, []).append(node)

    diags: list[Diagnostic] = []

    def edges(node: Node) -> list[Node]:
        p = decl[node]
        if p.status == "bound":
            return []
        if p.status == "binding-location":
            assert p.target is not None
            tnode = (p.target.doc, p.target.name)
            if tnode not in decl:
                return []
            return [tnode]
        return [n for n in by_name.get(node[1], []) if n != node]

    def dangling(node: Node) -> bool:
        p = decl[node]
        return (
            p.status == "binding-location"
            and p.target is not None
            and (p.target.doc, p.target.name) not in decl
        )

    bindings: dict[tuple[DocumentId | None, str], Binding] = {}
    for node in decl:
        owner, name = node
        where = f"{_owner_label(owner)}/{name}"
        if dangling(node):
            p = decl[node]
            assert p.target is not None
            diags.append(
                error("DANGLING_LOCATION", where,
                      f"location names undeclared {p.target.doc.value}/{p.target.name}")
            )
            continue
        reachable: set[Node] = set()
        stack = [node]
        while stack:
            n = stack.pop()
            if n in reachable:
                continue
            reachable.add(n)
            if dangling(n):
                continue
            stack.extend(edges(n))
        hits = [n for n in reachable if decl[n].status == "bound"]
        distinct: list[ParamValue] = []
        for n in hits:
            v = decl[n].value
            assert v is not None
            if not any(values_equal(v, seen) for seen in distinct):
                distinct.append(v)
        if len(distinct) == 1:
            provenance = min(
                hits, key=lambda n: (0,) if n[0] is None else (1,) + n[0].sort_key()
            )
            value = decl[provenance].value
            assert value is not None
            bindings[node] = Binding(value, provenance[0])
        elif len(distinct) > 1:
            diags.append(
                error("AMBIGUOUS_BINDING", where,
                      f"{len(distinct)} distinct bound values reachable")
            )
        else:
            if _has_cycle(reachable, edges):
                diags.append(error("BINDING_CYCLE", where, "binding locations form a cycle"))
            else:
                diags.append(error("UNBOUND_AT_RESOLUTION", where, "no bound value reachable"))

    return ResolvedEnvironment(bindings), ValidationReport(tuple(diags))


def _has_cycle(nodes: set, edges) -> bool:
    """Directed cycle within the induced subgraph on ``nodes``."""
    color: dict = {}

    def visit(n) -> bool:
        color[n] = 1
        for m in edges(n):
            if m not in nodes:
                continue
            c = color.get(m, 0)
            if c == 1:
                return True
            if c == 0 and visit(m):
                return True
        color[n] = 2
        return False

    return any(color.get(n, 0) == 0 and visit(n) for n in nodes)


# ---------------------------------------------------------------------------
# Prose/element synchronization
# ---------------------------------------------------------------------------


def sync_parameters(agreement: "SmartLegalAgreement", policy: PlacementPolicy) -> "SmartLegalAgreement":
    """Normalize where parameter data lives so the agreement conforms to
    the placement policy.  Idempotent for every policy."""
    if policy is PlacementPolicy.PROSE_ONLY:
        return _sync_prose_only(agreement)
    if policy is PlacementPolicy.ELEMENT_ONLY:
        return _sync_element_only(agreement)
    return _sync_dual(agreement)


def _all_entries(agreement: "SmartLegalAgreement") -> dict[str, tuple[DocumentId | None, Parameter]]:
    """name -> (owner, entry), document-owned entries shadowing none; the
    first set in canonical owner order wins on (unusual) name collisions."""
    out: dict[str, tuple[DocumentId | None, Parameter]] = {}
    for s in sorted(agreement.parameter_sets, key=lambda s: s.owner_key()):
        for p in s.entries:
            out.setdefault(p.name, (s.owner, p))
    return out


def _entry_for(
    agreement: "SmartLegalAgreement", doc_id: DocumentId, name: str
) -> Parameter | None:
    for s in agreement.parameter_sets:
        if s.owner == doc_id:
            p = s.get(name)
            if p is not None:
                return p
    return _all_entries(agreement).get(name, (None, None))[1]


def _rewrite_param_marks(doc: ProseDocument, rewrite) -> ProseDocument:
    """Rebuild the document rewriting each parameter markup via
    ``rewrite(markup) -> Markup | None`` (None removes it, and spans whose
    markup list empties are unwrapped in place)."""
    from .prose import ChoiceBlock, ListBlock, TableBlock, TableCell, TableRow

    def go_nodes(seq: tuple) -> tuple:
        out: list = []
        for node in seq:
            if isinstance(node, MarkedSpan):
                marks = []
                for m in node.marks:
                    if isinstance(m, Descriptive) and m.kind == "parameter":
                        m2 = rewrite(m)
                        if m2 is not None:
                            marks.append(m2)
                    else:
                        marks.append(m)
                children = go_nodes(node.children)
                if marks:
                    out.append(MarkedSpan(tuple(marks), children))
                else:
                    out.extend(children)
            elif isinstance(node, ListBlock):
                out.append(
                    replace(node, items=tuple(replace(i, nodes=go_nodes(i.nodes)) for i in node.items))
                )
            elif isinstance(node, TableBlock):
                rows = tuple(
                    TableRow(tuple(TableCell(go_nodes(c.nodes)) for c in r.cells)) for r in node.rows
                )
                out.append(replace(node, rows=rows))
            elif isinstance(node, ChoiceBlock):
                out.append(
                    replace(node, options=tuple(replace(o, nodes=go_nodes(o.nodes)) for o in node.options))
                )
            else:
                out.append(node)
        return tuple(out)

    return replace(doc, root=go_nodes(doc.root))


def _sync_prose_only(agreement: "SmartLegalAgreement") -> "SmartLegalAgreement":
    entries = _all_entries(agreement)

    def fold(m: Descriptive) -> Descriptive:
        attrs = dict(m.attrs)
        entry = entries.get(m.ident or "", (None, None))[1]
        if entry is not None:
            attrs.setdefault("type", entry.type_tag.format())
            if entry.status == "bound" and entry.value is not None:
                attrs.setdefault("value", format_value(entry.value))
            else:
                attrs.setdefault("status", entry.status)
            for k, v in entry.attrs.items():
                if k != ATTR_PROSE:
                    attrs.setdefault(k, v)
        else:
            attrs.setdefault("type", TEXT.format())
            if "value" not in attrs:
                attrs.setdefault("status", "unbound")
        return Descriptive("parameter", m.ident, attrs)

    docs = tuple(_rewrite_param_marks(d, fold) for d in agreement.documents)
    return replace(agreement, documents=docs, parameter_sets=())


def _sync_element_only(agreement: "SmartLegalAgreement") -> "SmartLegalAgreement":
    sets = {s.owner: dict((p.name, p) for p in s.entries) for s in agreement.parameter_sets}
    for doc in agreement.documents:
        for _, _, m in _prose_param_spans(doc):
            assert m.ident is not None
            if _entry_for(agreement, doc.id, m.ident) is not None:
                continue
            owned = sets.setdefault(doc.id, {})
            if m.ident not in owned:
                owned[m.ident] = _entry_from_markup(m)
    docs = tuple(_rewrite_param_marks(d, lambda m: None) for d in agreement.documents)
    new_sets = tuple(
        ParameterSet(owner, tuple(_drop_attr(p, ATTR_PROSE) for p in by_name.values()))
        for owner, by_name in sets.items()
        if by_name
    )
    return replace(agreement, documents=docs, parameter_sets=new_sets)


def _sync_dual(agreement: "SmartLegalAgreement") -> "SmartLegalAgreement":
    sets = {s.owner: dict((p.name, p) for p in s.entries) for s in agreement.parameter_sets}
    anchored: set[str] = set()
    for doc in agreement.documents:
        for _, _, m in _prose_param_spans(doc):
            assert m.ident is not None
            anchored.add(m.ident)
            entry, owner = None, None
            for o, by_name in sets.items():
                if m.ident in by_name:
                    entry, owner = by_name[m.ident], o
                    break
            if entry is None:
                owner = doc.id
                entry = _entry_from_markup(m)
            else:
                entry = _merge_markup_into_entry(m, entry)
            entry = _set_attr(entry, ATTR_PROSE, "true")
            sets.setdefault(owner, {})[m.ident] = entry

    # Entries never anchored in prose lose any stale prose flag.
    for by_name in sets.values():
        for name, p in list(by_name.items()):
            if name not in anchored and p.attrs.get(ATTR_PROSE) == "true":
                by_name[name] = _drop_attr(p, ATTR_PROSE)

    def strip(m: Descriptive) -> Descriptive:
        return Descriptive("parameter", m.ident) if m.attrs else m

    docs = tuple(_rewrite_param_marks(d, strip) for d in agreement.documents)
    new_sets = tuple(
        ParameterSet(owner, tuple(by_name.values())) for owner, by_name in sets.items() if by_name
    )
    return replace(agreement, documents=docs, parameter_sets=new_sets)


def _entry_from_markup(m: Descriptive) -> Parameter:
    assert m.ident is not None
    type_tag = TypeRef.parse(m.attrs["type"]) if "type" in m.attrs else TEXT
    attrs = {k: v for k, v in m.attrs.items() if k not in ("type", "value", "status")}
    if "value" in m.attrs:
        return Parameter(m.ident, type_tag, "bound", parse_value(m.attrs["value"], type_tag), None, attrs)
    return Parameter(m.ident, type_tag, "unbound", None, None, attrs)


def _merge_markup_into_entry(m: Descriptive, entry: Parameter) -> Parameter:
    if "value" in m.attrs:
        prose_value = parse_value(m.attrs["value"], entry.type_tag)
        if entry.status == "bound":
            assert entry.value is not None
            if not values_equal(prose_value, entry.value):
                raise SlaError(
                    "CONFLICTING_VALUES",
                    f"parameter {entry.name!r}: prose says {m.attrs['value']!r}, "
                    f"element says {format_value(entry.value)!r}",
                )
        else:
            entry = replace(entry, status="bound", value=prose_value, target=None)
    extra = {k: v for k, v in m.attrs.items() if k not in ("type", "value", "status")}
    if extra:
        attrs = dict(entry.attrs)
        attrs.update({k: v for k, v in extra.items() if k not in attrs})
        entry = replace(entry, attrs=attrs)
    return entry


def _set_attr(p: Parameter, key: str, value: str) -> Parameter:
    if p.attrs.get(key) == value:
        return p
    attrs = dict(p.attrs)
    attrs[key] = value
    return replace(p, attrs=attrs)


def _drop_attr(p: Parameter, key: str) -> Parameter:
    if key not in p.attrs:
        return p
    attrs = {k: v for k, v in p.attrs.items() if k != key}
    return replace(p, attrs=attrs)


# ---------------------------------------------------------------------------
# Execution parameters
# ---------------------------------------------------------------------------


def collect_execution_parameters(
    agreement: "SmartLegalAgreement", env: ResolvedEnvironment | None = None
) -> list[tuple[str, TypeRef, ParamValue]]:
    """The name-sorted execution parameter list handed to contract code,
    with the agreement digest appended last as the operational identifier."""
    header = agreement.agreement_header()
    if header is None or header.agreement_hash is None:
        raise SlaError("HASH_MISSING", "agreement-level header carries no stored digest")

    collected: dict[str, tuple[TypeRef, ParamValue | None]] = {}
    unresolved: list[str] = []

    def put(name: str, type_tag: TypeRef, value: ParamValue | None) -> None:
        if name in collected:
            prev_type, prev_value = collected[name]
            if value is not None and prev_value is not None and not values_equal(value, prev_value):
                unresolved.append(name)
            elif prev_value is None:
                collected[name] = (type_tag, value)
            return
        collected[name] = (type_tag, value)

    for s in agreement.parameter_sets:
        for p in s.entries:
            if not p.is_execution():
                continue
            value = p.value
            if value is None and env is not None:
                hit = env.lookup(s.owner, p.name)
                value = hit.value if hit else None
            put(p.name, p.type_tag, value)

    for doc in agreement.documents:
        for _, _, m in _prose_param_spans(doc):
            if m.attrs.get(ATTR_EXECUTION) != "true":
                continue
            assert m.ident is not None
            type_tag = TypeRef.parse(m.attrs["type"]) if "type" in m.attrs else TEXT
            value: ParamValue | None = None
            if "value" in m.attrs:
                value = parse_value(m.attrs["value"], type_tag)
            elif env is not None:
                hit = env.lookup(doc.id, m.ident)
                value = hit.value if hit else None
            put(m.ident, type_tag, value)

    for name, (_, value) in collected.items():
        if value is None:
            unresolved.append(name)
    if unresolved:
        raise SlaError(
            "UNRESOLVED_PARAMS",
            "execution parameters lack values: " + ", ".join(sorted(set(unresolved))),
            details=tuple(sorted(set(unresolved))),
        )

    out = [(name, tt, v) for name, (tt, v) in sorted(collected.items())]
    out.append(("agreement_hash", TEXT, header.agreement_hash.hex))
    return out


# ---------------------------------------------------------------------------
# Other recorded data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OtherDataRecord:
    """Prose data recorded in a header for reference and reporting rather
    than execution, e.g. a governing-law declaration."""

    name: str
    value: str
    doc: DocumentId
    path: Path
    sensitive: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", tuple(self.path))


def register_other_data(
    agreement: "SmartLegalAgreement", doc_id: DocumentId, path: Path, name: str
) -> "SmartLegalAgreement":
    """Record the text of an other-data span in the owning header.
    Registering the same span twice is a no-op."""
    doc = agreement.document(doc_id)
    if doc is None:
        raise SlaError("LOCATOR_INVALID", f"no document {doc_id.value!r}")
    node = resolve_path(doc, path)
    if not isinstance(node, MarkedSpan):
        raise SlaError("NOT_OTHER_DATA_SPAN", f"{path_str(path)} is not a marked span")
    mark = None
    for m in node.marks:
        if isinstance(m, Descriptive) and m.kind == "other-data" and m.ident == name:
            mark = m
            break
    if mark is None:
        raise SlaError("NOT_OTHER_DATA_SPAN", f"span carries no other-data markup named {name!r}")

    record = OtherDataRecord(
        name, plain_text(node), doc_id, path, sensitive=mark.attrs.get("sensitive") == "true"
    )
    header = agreement.header_for(doc_id) or agreement.agreement_header()
    if header is None:
        raise SlaError("HEADER_MISSING", "agreement has no header to record into")
    kept = []
    for r in header.other_data:
        if (r.name, r.doc, r.path) == (record.name, record.doc, record.path):
            if r == record:
                return agreement
            continue  # refresh the stored value for this span
        kept.append(r)
    new_header = replace(header, other_data=tuple(kept) + (record,))
    return agreement.with_header_replaced(header, new_header)
