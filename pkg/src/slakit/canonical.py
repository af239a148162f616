"""Concrete byte format, canonical form, and hashing.

The on-disk encoding is UTF-8 JSON under the format tag "sla/1".  Canonical
emission is bit-exact: object keys sorted bytewise, no insignificant
whitespace, numbers as decimal literals preserving scale, and all unordered
collections in a fixed sort order.  ``serialize`` always canonicalizes
first, so equal models produce identical bytes and the output is a fixpoint
of parse-then-serialize.

The agreement digest is sha-256 over the canonical bytes with the stored
digest itself, edit histories, the version branch flag, and sensitive
recorded data excluded: a hash cannot contain itself, and the rest is
exactly what a transmitted copy legitimately drops, so exporting never
changes an agreement's digest.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import replace
from datetime import date, datetime, timezone
from decimal import Decimal
from typing import Any

from .crossrefs import (
    AnchorTarget,
    CrossReference,
    IncomingSlot,
    IndirectTarget,
    IndirectionTables,
    Locator,
    OutgoingRef,
    SegmentTarget,
    TableTarget,
)
from .diagnostics import ParseError, SlaError, ValidationReport
from .lifecycle import (
    CodeRef,
    EditEntry,
    VersionInfo,
    format_timestamp,
    parse_timestamp,
)
from .model import (
    AgreementHeader,
    DigestValue,
    SignatureRecord,
    SmartContract,
    SmartLegalAgreement,
)
from .params import (
    BindingTarget,
    OtherDataRecord,
    Parameter,
    ParameterSet,
    TypeDef,
    TypeRef,
)
from .prose import (
    Anchor,
    ChoiceBlock,
    ChoiceOption,
    DESCRIPTIVE_KINDS,
    Descriptive,
    DocumentId,
    IDENT_KINDS,
    LIST_STYLES,
    ListBlock,
    ListItem,
    MarkedSpan,
    PART_KINDS,
    PartBoundary,
    PRESENTATIONAL_KINDS,
    Presentational,
    ProseDocument,
    TableBlock,
    TableCell,
    TableRow,
    Text,
    markup_discriminator,
    markup_sort_key,
    resolve_path,
    span_markup,
    validate_structure,
)

FORMAT_TAG = "sla/1"

_IDENT_KEY = {"parameter": "param", "other-data": "name", "xref-source": "xref", "xref-target": "xref"}
_AGREEMENT_OWNER = "@agreement"
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


# ---------------------------------------------------------------------------
# Canonical JSON emitter
# ---------------------------------------------------------------------------


def emit(value: Any) -> bytes:
    out: list[str] = []
    _write(value, out)
    return "".join(out).encode("utf-8")


def _write(v: Any, out: list[str]) -> None:
    if isinstance(v, bool):
        out.append("true" if v else "false")
    elif isinstance(v, str):
        out.append(json.dumps(v, ensure_ascii=False))
    elif isinstance(v, int):
        out.append(str(v))
    elif isinstance(v, Decimal):
        out.append(str(v))
    elif isinstance(v, dict):
        out.append("{")
        first = True
        for k in sorted(v.keys(), key=lambda k: k.encode("utf-8")):
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(":")
            _write(v[k], out)
        out.append("}")
    elif isinstance(v, (list, tuple)):
        out.append("[")
        for i, item in enumerate(v):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    else:
        raise SlaError("INVALID_MODEL", f"cannot emit {type(v).__name__}")


# ---------------------------------------------------------------------------
# Encoding to plain JSON values (with fixed collection order)
# ---------------------------------------------------------------------------


def _doc_id(d: DocumentId) -> dict:
    return {"scope": d.scope, "value": d.value}


def _header_key(h: AgreementHeader) -> tuple:
    if h.level == "agreement":
        return (0,)
    return (1,) + h.identifiers[0].sort_key()


def encode_value(v: Any) -> Any:
    """The JSON value for any model object, unordered collections sorted.
    Two model values are structurally equal iff their encodings are."""
    if isinstance(v, SmartContract):
        agreements = sorted((encode_value(a) for a in v.agreements), key=emit)
        return {
            "format": FORMAT_TAG,
            "agreements": agreements,
            "code_refs": [encode_value(c) for c in sorted(v.code_refs, key=CodeRef.key)],
        }
    if isinstance(v, SmartLegalAgreement):
        return {
            "documents": [
                encode_value(d) for d in sorted(v.documents, key=lambda d: d.id.sort_key())
            ],
            "headers": [encode_value(h) for h in sorted(v.headers, key=_header_key)],
            "parameter_sets": [
                encode_value(s) for s in sorted(v.parameter_sets, key=ParameterSet.owner_key)
            ],
        }
    if isinstance(v, ProseDocument):
        return {"id": _doc_id(v.id), "root": [encode_value(n) for n in v.root]}
    if isinstance(v, Text):
        return {"text": v.content}
    if isinstance(v, MarkedSpan):
        return {
            "span": {
                "children": [encode_value(c) for c in v.children],
                "marks": [encode_value(m) for m in sorted(v.marks, key=markup_sort_key)],
            }
        }
    if isinstance(v, Anchor):
        return {"anchor": v.anchor_id}
    if isinstance(v, ListBlock):
        return {
            "list": {
                "items": [[encode_value(n) for n in item.nodes] for item in v.items],
                "style": v.style,
            }
        }
    if isinstance(v, TableBlock):
        body: dict = {
            "number": v.number,
            "rows": [
                [[encode_value(n) for n in cell.nodes] for cell in row.cells] for row in v.rows
            ],
        }
        if v.caption is not None:
            body["caption"] = v.caption
        return {"table": body}
    if isinstance(v, ChoiceBlock):
        return {
            "choice": {
                "id": v.choice_id,
                "options": [[encode_value(n) for n in o.nodes] for o in v.options],
            }
        }
    if isinstance(v, PartBoundary):
        body = {"kind": v.part_kind}
        if v.title:
            body["title"] = v.title
        return {"part": body}
    if isinstance(v, Presentational):
        return {"style": v.kind}
    if isinstance(v, Descriptive):
        body = {"kind": v.kind}
        key = _IDENT_KEY.get(v.kind)
        if key is not None:
            body[key] = v.ident
        if v.attrs:
            body["attrs"] = dict(v.attrs)
        return body
    if isinstance(v, ParameterSet):
        return {
            "owner": _AGREEMENT_OWNER if v.owner is None else _doc_id(v.owner),
            "entries": [
                encode_value(p) for p in sorted(v.entries, key=lambda p: p.name)
            ],
        }
    if isinstance(v, Parameter):
        body = {"name": v.name, "status": v.status, "type": v.type_tag.format()}
        if v.value is not None:
            body["value"] = encode_param_value(v.value)
        if v.target is not None:
            body["target"] = {"doc": _doc_id(v.target.doc), "name": v.target.name}
        if v.attrs:
            body["attrs"] = dict(v.attrs)
        return body
    if isinstance(v, TypeDef):
        body = {"id": v.id, "base": v.base.format()}
        if v.pattern is not None:
            body["pattern"] = v.pattern
        if v.minimum is not None:
            body["minimum"] = v.minimum
        if v.maximum is not None:
            body["maximum"] = v.maximum
        return body
    if isinstance(v, AgreementHeader):
        return _encode_header(v)
    if isinstance(v, CrossReference):
        return {
            "id": v.xref_id,
            "kind": v.kind,
            "source": encode_value(v.source),
            "target": encode_value(v.target),
        }
    if isinstance(v, Locator):
        body = {"doc": _doc_id(v.doc), "path": list(v.path)}
        if v.offset is not None:
            body["offset"] = list(v.offset)
        return body
    if isinstance(v, SegmentTarget):
        return {"segment": {"doc": _doc_id(v.doc), "path": list(v.path)}}
    if isinstance(v, TableTarget):
        return {"table": {"doc": _doc_id(v.doc), "number": v.number}}
    if isinstance(v, AnchorTarget):
        return {"anchor": {"doc": _doc_id(v.doc), "id": v.anchor_id}}
    if isinstance(v, IndirectTarget):
        return {"indirect": {"doc": _doc_id(v.doc), "slot": v.slot}}
    if isinstance(v, IndirectionTables):
        body = {}
        if v.incoming:
            body["incoming"] = {
                s.slot_id: _encode_slot(s) for s in v.incoming
            }
        if v.outgoing:
            body["outgoing"] = {
                o.xref_id: {"doc": _doc_id(o.doc), "slot": o.slot} for o in v.outgoing
            }
        return body
    if isinstance(v, CodeRef):
        body = {"platform": v.platform, "code_version": v.code_version}
        if v.instance_id is not None:
            body["instance_id"] = v.instance_id
        return body
    if isinstance(v, DigestValue):
        return {"algorithm": v.algorithm, "hex": v.hex}
    if isinstance(v, SignatureRecord):
        return {"signer": v.signer, "timestamp": format_timestamp(v.timestamp), "sig": v.sig}
    if isinstance(v, VersionInfo):
        return {"number": v.number, "timestamp": format_timestamp(v.timestamp), "branch": v.branch}
    if isinstance(v, EditEntry):
        return {
            "timestamp": format_timestamp(v.timestamp),
            "actor": v.actor,
            "kind": v.change_kind,
            "detail": v.detail,
            "version": v.resulting_version,
        }
    if isinstance(v, OtherDataRecord):
        body = {"name": v.name, "value": v.value, "doc": _doc_id(v.doc), "path": list(v.path)}
        if v.sensitive:
            body["sensitive"] = True
        return body
    raise SlaError("INVALID_MODEL", f"cannot encode {type(v).__name__}")


def _encode_slot(s: IncomingSlot) -> dict:
    body: dict = {"locator": encode_value(s.locator)}
    if s.stale:
        body["stale"] = True
    return body


def encode_param_value(v: Any) -> Any:
    if isinstance(v, bool) or isinstance(v, (int, Decimal, str)):
        return v
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, tuple):
        return [encode_param_value(x) for x in v]
    raise SlaError("INVALID_MODEL", f"cannot encode parameter value {type(v).__name__}")


def _encode_header(h: AgreementHeader) -> dict:
    body: dict = {
        "level": h.level,
        "doc_status": h.doc_status,
        "version": encode_value(h.version),
    }
    if h.identifiers:
        body["identifiers"] = [
            _doc_id(d) for d in sorted(h.identifiers, key=DocumentId.sort_key)
        ]
    if h.doc_type:
        body["doc_type"] = h.doc_type
    if h.dates:
        body["dates"] = {k: d.isoformat() for k, d in h.dates.items()}
    if h.signatures:
        body["signatures"] = [
            encode_value(s)
            for s in sorted(h.signatures, key=lambda s: (s.signer, format_timestamp(s.timestamp), s.sig))
        ]
    if h.agreement_hash is not None:
        body["agreement_hash"] = encode_value(h.agreement_hash)
    if h.xref_table:
        body["xref_table"] = [
            encode_value(x) for x in sorted(h.xref_table, key=lambda x: x.xref_id)
        ]
    if h.type_definitions:
        body["type_definitions"] = [
            encode_value(t) for t in sorted(h.type_definitions, key=lambda t: t.id)
        ]
    if h.style_sheet:
        body["style_sheet"] = dict(h.style_sheet)
    if h.parent_ids:
        body["parent_ids"] = [_doc_id(d) for d in sorted(h.parent_ids, key=DocumentId.sort_key)]
    if h.child_ids:
        body["child_ids"] = [_doc_id(d) for d in sorted(h.child_ids, key=DocumentId.sort_key)]
    if h.edit_history:
        body["edit_history"] = [encode_value(e) for e in h.edit_history]
    if h.other_data:
        body["other_data"] = [
            encode_value(r)
            for r in sorted(h.other_data, key=lambda r: (r.name, r.doc.sort_key(), r.path))
        ]
    if not h.indirection.is_empty():
        body["indirection"] = encode_value(h.indirection)
    if h.code_refs:
        body["code_refs"] = [encode_value(c) for c in sorted(h.code_refs, key=CodeRef.key)]
    return body


# ---------------------------------------------------------------------------
# Canonicalization (model-level normal form)
# ---------------------------------------------------------------------------


def canonicalize(v: Any) -> Any:
    """Idempotent normal form: adjacent text merged, span chains flattened
    with markup in fixed order, text in NFC, collections sorted."""
    _check_structure(v)
    return _canon(v)


def _check_structure(v: Any) -> None:
    docs: tuple[ProseDocument, ...]
    if isinstance(v, SmartContract):
        docs = tuple(d for a in v.agreements for d in a.documents)
    elif isinstance(v, SmartLegalAgreement):
        docs = v.documents
    elif isinstance(v, ProseDocument):
        docs = (v,)
    else:
        raise SlaError("INVALID_MODEL", f"cannot canonicalize {type(v).__name__}")
    bad = [d for doc in docs for d in validate_structure(doc).errors()]
    if bad:
        raise SlaError(
            "INVALID_MODEL",
            f"structural validation failed with {len(bad)} error(s)",
            details=tuple(d.line() for d in bad),
        )


def _canon(v: Any) -> Any:
    if isinstance(v, SmartContract):
        agreements = tuple(_canon(a) for a in v.agreements)
        agreements = tuple(sorted(agreements, key=lambda a: emit(encode_value(a))))
        return SmartContract(agreements, tuple(sorted(v.code_refs, key=CodeRef.key)))
    if isinstance(v, SmartLegalAgreement):
        return SmartLegalAgreement(
            documents=tuple(
                sorted((_canon(d) for d in v.documents), key=lambda d: d.id.sort_key())
            ),
            parameter_sets=tuple(
                sorted((_canon_set(s) for s in v.parameter_sets), key=ParameterSet.owner_key)
            ),
            headers=tuple(sorted((_canon_header(h) for h in v.headers), key=_header_key)),
        )
    if isinstance(v, ProseDocument):
        return replace(v, root=_canon_nodes(v.root))
    raise SlaError("INVALID_MODEL", f"cannot canonicalize {type(v).__name__}")


def _canon_nodes(nodes: tuple) -> tuple:
    flat: list = []
    for node in nodes:
        node = _canon_node(node)
        if isinstance(node, Text):
            if not node.content:
                continue
            if flat and isinstance(flat[-1], Text):
                flat[-1] = Text(flat[-1].content + node.content)
                continue
        flat.append(node)
    return tuple(
        Text(unicodedata.normalize("NFC", n.content)) if isinstance(n, Text) else n for n in flat
    )


def _canon_node(node: Any) -> Any:
    if isinstance(node, Text):
        return node
    if isinstance(node, MarkedSpan):
        children = _canon_nodes(node.children)
        marks = node.marks
        while len(children) == 1 and isinstance(children[0], MarkedSpan):
            inner = children[0]
            marks = marks + inner.marks
            children = inner.children
        # Flattening can collide marks of the same kind; keep one, outer
        # attributes taking precedence.
        merged: dict[tuple, Any] = {}
        for m in marks:
            d = markup_discriminator(m)
            prev = merged.get(d)
            if prev is None:
                merged[d] = m
            elif isinstance(prev, Descriptive) and isinstance(m, Descriptive) and m.attrs:
                attrs = dict(m.attrs)
                attrs.update(prev.attrs)
                merged[d] = Descriptive(prev.kind, prev.ident, attrs)
        return MarkedSpan(tuple(sorted(merged.values(), key=markup_sort_key)), children)
    if isinstance(node, ListBlock):
        return replace(
            node, items=tuple(ListItem(_canon_nodes(i.nodes)) for i in node.items)
        )
    if isinstance(node, TableBlock):
        caption = (
            unicodedata.normalize("NFC", node.caption) if node.caption is not None else None
        )
        rows = tuple(
            TableRow(tuple(TableCell(_canon_nodes(c.nodes)) for c in r.cells)) for r in node.rows
        )
        return replace(node, caption=caption, rows=rows)
    if isinstance(node, ChoiceBlock):
        return replace(
            node, options=tuple(ChoiceOption(_canon_nodes(o.nodes)) for o in node.options)
        )
    if isinstance(node, PartBoundary):
        return replace(node, title=unicodedata.normalize("NFC", node.title))
    return node


def _canon_set(s: ParameterSet) -> ParameterSet:
    return ParameterSet(s.owner, tuple(sorted(s.entries, key=lambda p: p.name)))


def _canon_header(h: AgreementHeader) -> AgreementHeader:
    return replace(
        h,
        identifiers=tuple(sorted(h.identifiers, key=DocumentId.sort_key)),
        signatures=tuple(
            sorted(h.signatures, key=lambda s: (s.signer, format_timestamp(s.timestamp), s.sig))
        ),
        xref_table=tuple(sorted(h.xref_table, key=lambda x: x.xref_id)),
        type_definitions=tuple(sorted(h.type_definitions, key=lambda t: t.id)),
        parent_ids=tuple(sorted(h.parent_ids, key=DocumentId.sort_key)),
        child_ids=tuple(sorted(h.child_ids, key=DocumentId.sort_key)),
        other_data=tuple(sorted(h.other_data, key=lambda r: (r.name, r.doc.sort_key(), r.path))),
        indirection=IndirectionTables(
            tuple(sorted(h.indirection.incoming, key=lambda s: s.slot_id)),
            tuple(sorted(h.indirection.outgoing, key=lambda o: o.xref_id)),
        ),
        code_refs=tuple(sorted(h.code_refs, key=CodeRef.key)),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize(value: Any) -> bytes:
    """Canonical bytes: serialize(v) == serialize(canonicalize(v))."""
    return emit(encode_value(canonicalize(value)))


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------


def _strip_header_json(h: dict) -> dict:
    out = {k: v for k, v in h.items() if k not in ("agreement_hash", "edit_history")}
    # branch is transmission bookkeeping; number and timestamp stay covered
    out["version"] = {k: v for k, v in out["version"].items() if k != "branch"}
    if "other_data" in out:
        kept = [r for r in out["other_data"] if not r.get("sensitive")]
        if kept:
            out["other_data"] = kept
        else:
            del out["other_data"]
    return out


def _hash_view(jsonable: dict) -> dict:
    out = dict(jsonable)
    if "headers" in out:
        out["headers"] = [_strip_header_json(h) for h in out["headers"]]
    if "agreements" in out:
        out["agreements"] = [_hash_view(a) for a in out["agreements"]]
    return out


def hash_agreement(agreement: SmartLegalAgreement) -> DigestValue:
    """sha-256 over the canonical bytes, excluding the stored digest, edit
    histories, version branch flags, and sensitive recorded data."""
    jsonable = _hash_view(encode_value(canonicalize(agreement)))
    return DigestValue("sha-256", hashlib.sha256(emit(jsonable)).hexdigest())


def hash_contract(contract: SmartContract) -> DigestValue:
    jsonable = _hash_view(encode_value(canonicalize(contract)))
    return DigestValue("sha-256", hashlib.sha256(emit(jsonable)).hexdigest())


def hash_document(doc: ProseDocument) -> DigestValue:
    return DigestValue("sha-256", hashlib.sha256(serialize(doc)).hexdigest())


def hash_clause(doc: ProseDocument, path: tuple) -> DigestValue:
    """Content digest of one clause span, independent of its position."""
    node = resolve_path(doc, path)
    if not isinstance(node, MarkedSpan) or span_markup(node, "clause") is None:
        raise SlaError("NOT_A_CLAUSE", "locator does not name a clause span")
    canon = _canon_node(node)
    return DigestValue("sha-256", hashlib.sha256(emit(encode_value(canon))).hexdigest())


def with_agreement_hash(agreement: SmartLegalAgreement) -> SmartLegalAgreement:
    """Store the current digest in the agreement-level header."""
    header = agreement.agreement_header()
    if header is None:
        raise SlaError("HEADER_MISSING", "agreement has no agreement-level header")
    digest = hash_agreement(agreement)
    return agreement.with_header_replaced(header, replace(header, agreement_hash=digest))


def verify(data: bytes, expected: "DigestValue | str") -> tuple[bool, str]:
    """True iff the bytes parse and the parsed agreement's digest matches.
    The report line names the failure: bad digest text, parse failure, or
    digest mismatch."""
    if isinstance(expected, str):
        text = expected.strip()
        if text.startswith("sha-256:"):
            text = text[len("sha-256"):].lstrip(":")
        try:
            expected = DigestValue("sha-256", text)
        except ValueError as exc:
            return False, f"BAD_DIGEST_FORMAT {exc}"
    try:
        value = parse(data)
    except SlaError as exc:
        return False, f"{exc.code} {exc.message}"
    if isinstance(value, SmartContract):
        if len(value.agreements) == 1:
            actual = hash_agreement(value.agreements[0])
        else:
            actual = hash_contract(value)
    elif isinstance(value, SmartLegalAgreement):
        actual = hash_agreement(value)
    else:
        actual = hash_document(value)
    if actual != expected:
        return False, f"DIGEST_MISMATCH expected {expected.hex} got {actual.hex}"
    return True, "OK"


# ---------------------------------------------------------------------------
# Parsing (strict)
# ---------------------------------------------------------------------------


def parse(data: "bytes | str") -> Any:
    """Decode a contract, agreement, or document.  Element order is free;
    unknown keys and unknown markup kinds are hard errors."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("MALFORMED_SYNTAX", f"invalid UTF-8: {exc.reason}", offset=exc.start)
    else:
        text = data
    try:
        j = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError("MALFORMED_SYNTAX", exc.msg, offset=exc.pos)
    root = _expect_obj(j, "top level")
    try:
        if "format" in root:
            return _decode_contract(root)
        if "documents" in root or "headers" in root or "parameter_sets" in root:
            return _decode_agreement(root, "agreement")
        if "id" in root and "root" in root:
            return _decode_document(root, "document")
    except ValueError as exc:
        raise SlaError("SCHEMA_VIOLATION", str(exc)) from exc
    raise SlaError("SCHEMA_VIOLATION", "top-level object is not a contract, agreement, or document")


def _expect_obj(j: Any, where: str) -> dict:
    if not isinstance(j, dict):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: expected an object")
    return j


def _expect_arr(j: Any, where: str) -> list:
    if not isinstance(j, list):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: expected an array")
    return j


def _expect_str(j: Any, where: str) -> str:
    if not isinstance(j, str):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: expected a string")
    return j


def _expect_int(j: Any, where: str) -> int:
    if isinstance(j, bool) or not isinstance(j, int):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: expected an integer")
    return j


def _check_keys(obj: dict, where: str, allowed: set[str], required: set[str] = frozenset()) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown key {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: missing key {sorted(missing)[0]!r}")


def _decode_contract(root: dict) -> SmartContract:
    _check_keys(root, "contract", {"format", "agreements", "code_refs"}, {"format"})
    if root["format"] != FORMAT_TAG:
        raise SlaError("SCHEMA_VIOLATION", f"unsupported format {root['format']!r}")
    agreements = tuple(
        _decode_agreement(_expect_obj(a, f"agreements[{i}]"), f"agreements[{i}]")
        for i, a in enumerate(_expect_arr(root.get("agreements", []), "agreements"))
    )
    refs = tuple(
        _decode_code_ref(_expect_obj(c, f"code_refs[{i}]"), f"code_refs[{i}]")
        for i, c in enumerate(_expect_arr(root.get("code_refs", []), "code_refs"))
    )
    return SmartContract(agreements, refs)


def _decode_agreement(obj: dict, where: str) -> SmartLegalAgreement:
    _check_keys(obj, where, {"documents", "headers", "parameter_sets"})
    docs = tuple(
        _decode_document(_expect_obj(d, f"{where}.documents[{i}]"), f"{where}.documents[{i}]")
        for i, d in enumerate(_expect_arr(obj.get("documents", []), f"{where}.documents"))
    )
    sets = tuple(
        _decode_param_set(_expect_obj(s, f"{where}.parameter_sets[{i}]"), f"{where}.parameter_sets[{i}]")
        for i, s in enumerate(_expect_arr(obj.get("parameter_sets", []), f"{where}.parameter_sets"))
    )
    headers = tuple(
        _decode_header(_expect_obj(h, f"{where}.headers[{i}]"), f"{where}.headers[{i}]")
        for i, h in enumerate(_expect_arr(obj.get("headers", []), f"{where}.headers"))
    )
    return SmartLegalAgreement(docs, sets, headers)


def _decode_doc_id(j: Any, where: str) -> DocumentId:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"scope", "value"}, {"scope", "value"})
    return DocumentId(_expect_str(obj["scope"], where), _expect_str(obj["value"], where))


def _decode_document(obj: dict, where: str) -> ProseDocument:
    _check_keys(obj, where, {"id", "root"}, {"id", "root"})
    doc_id = _decode_doc_id(obj["id"], f"{where}.id")
    root = tuple(
        _decode_node(n, f"{where}.root[{i}]")
        for i, n in enumerate(_expect_arr(obj["root"], f"{where}.root"))
    )
    return ProseDocument(doc_id, root)


_NODE_TAGS = {"text", "span", "anchor", "list", "table", "choice", "part"}


def _decode_node(j: Any, where: str) -> Any:
    obj = _expect_obj(j, where)
    if len(obj) != 1:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: a node is a single-key object")
    tag, body = next(iter(obj.items()))
    if tag not in _NODE_TAGS:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown node tag {tag!r}")
    if tag == "text":
        return Text(_expect_str(body, where))
    if tag == "anchor":
        return Anchor(_expect_str(body, where))
    body = _expect_obj(body, where)
    if tag == "span":
        _check_keys(body, where, {"children", "marks"}, {"children", "marks"})
        marks = tuple(
            _decode_markup(m, f"{where}.marks[{i}]")
            for i, m in enumerate(_expect_arr(body["marks"], f"{where}.marks"))
        )
        if not marks:
            raise SlaError("SCHEMA_VIOLATION", f"{where}: span markup list is empty")
        children = tuple(
            _decode_node(c, f"{where}.children[{i}]")
            for i, c in enumerate(_expect_arr(body["children"], f"{where}.children"))
        )
        return MarkedSpan(marks, children)
    if tag == "list":
        _check_keys(body, where, {"items", "style"}, {"items", "style"})
        style = _expect_str(body["style"], where)
        if style not in LIST_STYLES:
            raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown list style {style!r}")
        items = tuple(
            ListItem(
                tuple(
                    _decode_node(n, f"{where}.items[{i}][{k}]")
                    for k, n in enumerate(_expect_arr(item, f"{where}.items[{i}]"))
                )
            )
            for i, item in enumerate(_expect_arr(body["items"], f"{where}.items"))
        )
        return ListBlock(style, items)
    if tag == "table":
        _check_keys(body, where, {"number", "rows", "caption"}, {"number", "rows"})
        rows = tuple(
            TableRow(
                tuple(
                    TableCell(
                        tuple(
                            _decode_node(n, f"{where}.rows[{r}][{c}][{k}]")
                            for k, n in enumerate(_expect_arr(cell, f"{where}.rows[{r}][{c}]"))
                        )
                    )
                    for c, cell in enumerate(_expect_arr(row, f"{where}.rows[{r}]"))
                )
            )
            for r, row in enumerate(_expect_arr(body["rows"], f"{where}.rows"))
        )
        caption = None
        if "caption" in body:
            caption = _expect_str(body["caption"], f"{where}.caption")
        return TableBlock(_expect_int(body["number"], f"{where}.number"), caption, rows)
    if tag == "choice":
        _check_keys(body, where, {"id", "options"}, {"id", "options"})
        options = tuple(
            ChoiceOption(
                tuple(
                    _decode_node(n, f"{where}.options[{i}][{k}]")
                    for k, n in enumerate(_expect_arr(o, f"{where}.options[{i}]"))
                )
            )
            for i, o in enumerate(_expect_arr(body["options"], f"{where}.options"))
        )
        return ChoiceBlock(_expect_str(body["id"], where), options)
    # part
    _check_keys(body, where, {"kind", "title"}, {"kind"})
    kind = _expect_str(body["kind"], where)
    if kind not in PART_KINDS:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown part kind {kind!r}")
    return PartBoundary(kind, _expect_str(body.get("title", ""), f"{where}.title"))


def _decode_markup(j: Any, where: str) -> Any:
    obj = _expect_obj(j, where)
    if "style" in obj:
        _check_keys(obj, where, {"style"})
        kind = _expect_str(obj["style"], where)
        if kind not in PRESENTATIONAL_KINDS:
            raise SlaError("UNKNOWN_MARKUP_KIND", f"{where}: {kind!r}")
        return Presentational(kind)
    if "kind" not in obj:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: markup needs a style or kind key")
    kind = _expect_str(obj["kind"], where)
    if kind not in DESCRIPTIVE_KINDS:
        raise SlaError("UNKNOWN_MARKUP_KIND", f"{where}: {kind!r}")
    ident_key = _IDENT_KEY.get(kind)
    allowed = {"kind", "attrs"} | ({ident_key} if ident_key else set())
    required = {"kind"} | ({ident_key} if kind in IDENT_KINDS else set())
    _check_keys(obj, where, allowed, required)
    ident = _expect_str(obj[ident_key], where) if ident_key and ident_key in obj else None
    attrs = {}
    if "attrs" in obj:
        raw = _expect_obj(obj["attrs"], f"{where}.attrs")
        attrs = {k: _expect_str(v, f"{where}.attrs[{k}]") for k, v in raw.items()}
    return Descriptive(kind, ident, attrs)


def _decode_param_set(obj: dict, where: str) -> ParameterSet:
    _check_keys(obj, where, {"owner", "entries"}, {"owner"})
    owner = None
    if obj["owner"] != _AGREEMENT_OWNER:
        owner = _decode_doc_id(obj["owner"], f"{where}.owner")
    entries = tuple(
        _decode_parameter(_expect_obj(p, f"{where}.entries[{i}]"), f"{where}.entries[{i}]")
        for i, p in enumerate(_expect_arr(obj.get("entries", []), f"{where}.entries"))
    )
    return ParameterSet(owner, entries)


def _decode_parameter(obj: dict, where: str) -> Parameter:
    _check_keys(obj, where, {"name", "status", "type", "value", "target", "attrs"}, {"name", "status"})
    name = _expect_str(obj["name"], where)
    status = _expect_str(obj["status"], where)
    if status not in ("bound", "unbound", "binding-location"):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown status {status!r}")
    type_tag = TypeRef.parse(_expect_str(obj.get("type", "text"), f"{where}.type"))
    value = None
    if "value" in obj:
        value = _decode_param_value(obj["value"], type_tag, f"{where}.value")
    target = None
    if "target" in obj:
        t = _expect_obj(obj["target"], f"{where}.target")
        _check_keys(t, f"{where}.target", {"doc", "name"}, {"doc", "name"})
        target = BindingTarget(
            _decode_doc_id(t["doc"], f"{where}.target.doc"),
            _expect_str(t["name"], f"{where}.target.name"),
        )
    attrs = {}
    if "attrs" in obj:
        raw = _expect_obj(obj["attrs"], f"{where}.attrs")
        attrs = {k: _expect_str(v, f"{where}.attrs[{k}]") for k, v in raw.items()}
    return Parameter(name, type_tag, status, value, target, attrs)


def _decode_param_value(j: Any, type_tag: TypeRef, where: str) -> Any:
    if isinstance(j, list):
        element = type_tag.element if type_tag.kind == "list" else None
        return tuple(
            _decode_param_value(x, element or TypeRef.builtin("text"), f"{where}[{i}]")
            for i, x in enumerate(j)
        )
    if isinstance(j, dict):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: objects are not parameter values")
    if (
        isinstance(j, str)
        and type_tag.kind == "builtin"
        and type_tag.name == "date"
    ):
        try:
            return date.fromisoformat(j)
        except ValueError:
            return j  # typecheck reports the mismatch
    return j


def _decode_typedef(obj: dict, where: str) -> TypeDef:
    _check_keys(obj, where, {"id", "base", "pattern", "minimum", "maximum"}, {"id", "base"})
    minimum = obj.get("minimum")
    maximum = obj.get("maximum")
    for label, bound_val in (("minimum", minimum), ("maximum", maximum)):
        if bound_val is not None and (isinstance(bound_val, bool) or not isinstance(bound_val, (int, Decimal))):
            raise SlaError("SCHEMA_VIOLATION", f"{where}.{label}: expected a number")
    return TypeDef(
        _expect_str(obj["id"], where),
        TypeRef.parse(_expect_str(obj["base"], f"{where}.base")),
        pattern=_expect_str(obj["pattern"], f"{where}.pattern") if "pattern" in obj else None,
        minimum=Decimal(minimum) if minimum is not None else None,
        maximum=Decimal(maximum) if maximum is not None else None,
    )


def _decode_date(j: Any, where: str) -> date:
    text = _expect_str(j, where)
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: bad calendar date {text!r}") from exc


def _decode_timestamp(j: Any, where: str) -> datetime:
    text = _expect_str(j, where)
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: bad timestamp {text!r}") from exc


def _decode_locator(j: Any, where: str) -> Locator:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"doc", "path", "offset"}, {"doc", "path"})
    path = tuple(
        _expect_int(i, f"{where}.path") for i in _expect_arr(obj["path"], f"{where}.path")
    )
    offset = None
    if "offset" in obj:
        arr = _expect_arr(obj["offset"], f"{where}.offset")
        if len(arr) != 2:
            raise SlaError("SCHEMA_VIOLATION", f"{where}.offset: expected [start, end]")
        offset = (_expect_int(arr[0], where), _expect_int(arr[1], where))
    return Locator(_decode_doc_id(obj["doc"], f"{where}.doc"), path, offset)


_TARGET_TAGS = {"segment", "table", "anchor", "indirect"}


def _decode_target(j: Any, where: str) -> Any:
    obj = _expect_obj(j, where)
    if len(obj) != 1:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: a target is a single-key object")
    tag, body = next(iter(obj.items()))
    if tag not in _TARGET_TAGS:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown target tag {tag!r}")
    body = _expect_obj(body, where)
    if tag == "segment":
        _check_keys(body, where, {"doc", "path"}, {"doc", "path"})
        path = tuple(
            _expect_int(i, f"{where}.path") for i in _expect_arr(body["path"], f"{where}.path")
        )
        return SegmentTarget(_decode_doc_id(body["doc"], f"{where}.doc"), path)
    if tag == "table":
        _check_keys(body, where, {"doc", "number"}, {"doc", "number"})
        return TableTarget(
            _decode_doc_id(body["doc"], f"{where}.doc"), _expect_int(body["number"], where)
        )
    if tag == "anchor":
        _check_keys(body, where, {"doc", "id"}, {"doc", "id"})
        return AnchorTarget(
            _decode_doc_id(body["doc"], f"{where}.doc"), _expect_str(body["id"], where)
        )
    _check_keys(body, where, {"doc", "slot"}, {"doc", "slot"})
    return IndirectTarget(
        _decode_doc_id(body["doc"], f"{where}.doc"), _expect_str(body["slot"], where)
    )


def _decode_xref(obj: dict, where: str) -> CrossReference:
    _check_keys(obj, where, {"id", "kind", "source", "target"}, {"id", "kind", "source", "target"})
    return CrossReference(
        _expect_str(obj["id"], where),
        _decode_locator(obj["source"], f"{where}.source"),
        _decode_target(obj["target"], f"{where}.target"),
        _expect_str(obj["kind"], where),
    )


def _decode_code_ref(obj: dict, where: str) -> CodeRef:
    _check_keys(obj, where, {"platform", "code_version", "instance_id"}, {"platform", "code_version"})
    return CodeRef(
        _expect_str(obj["platform"], where),
        _expect_str(obj["code_version"], where),
        _expect_str(obj["instance_id"], where) if "instance_id" in obj else None,
    )


def _decode_version(j: Any, where: str) -> VersionInfo:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"number", "timestamp", "branch"}, {"number", "timestamp", "branch"})
    branch = _expect_str(obj["branch"], where)
    if branch not in ("local", "transmitted"):
        raise SlaError("SCHEMA_VIOLATION", f"{where}: unknown branch {branch!r}")
    return VersionInfo(
        _expect_int(obj["number"], where), _decode_timestamp(obj["timestamp"], where), branch
    )


def _decode_history_entry(j: Any, where: str) -> EditEntry:
    obj = _expect_obj(j, where)
    _check_keys(
        obj, where, {"timestamp", "actor", "kind", "detail", "version"},
        {"timestamp", "actor", "kind", "detail", "version"},
    )
    return EditEntry(
        _decode_timestamp(obj["timestamp"], where),
        _expect_str(obj["actor"], where),
        _expect_str(obj["kind"], where),
        _expect_str(obj["detail"], where),
        _expect_int(obj["version"], where),
    )


def _decode_other_data(j: Any, where: str) -> OtherDataRecord:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"name", "value", "doc", "path", "sensitive"}, {"name", "value", "doc", "path"})
    sensitive = obj.get("sensitive", False)
    if not isinstance(sensitive, bool):
        raise SlaError("SCHEMA_VIOLATION", f"{where}.sensitive: expected a boolean")
    return OtherDataRecord(
        _expect_str(obj["name"], where),
        _expect_str(obj["value"], where),
        _decode_doc_id(obj["doc"], f"{where}.doc"),
        tuple(_expect_int(i, f"{where}.path") for i in _expect_arr(obj["path"], f"{where}.path")),
        sensitive,
    )


def _decode_signature(j: Any, where: str) -> SignatureRecord:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"signer", "timestamp", "sig"}, {"signer", "timestamp", "sig"})
    return SignatureRecord(
        _expect_str(obj["signer"], where),
        _decode_timestamp(obj["timestamp"], where),
        _expect_str(obj["sig"], where),
    )


def _decode_digest(j: Any, where: str) -> DigestValue:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"algorithm", "hex"}, {"algorithm", "hex"})
    try:
        return DigestValue(_expect_str(obj["algorithm"], where), _expect_str(obj["hex"], where))
    except ValueError as exc:
        raise SlaError("SCHEMA_VIOLATION", f"{where}: {exc}") from exc


def _decode_indirection(j: Any, where: str) -> IndirectionTables:
    obj = _expect_obj(j, where)
    _check_keys(obj, where, {"incoming", "outgoing"})
    incoming = []
    for slot_id, body in _expect_obj(obj.get("incoming", {}), f"{where}.incoming").items():
        b = _expect_obj(body, f"{where}.incoming[{slot_id}]")
        _check_keys(b, f"{where}.incoming[{slot_id}]", {"locator", "stale"}, {"locator"})
        stale = b.get("stale", False)
        if not isinstance(stale, bool):
            raise SlaError("SCHEMA_VIOLATION", f"{where}.incoming[{slot_id}].stale: expected a boolean")
        incoming.append(
            IncomingSlot(slot_id, _decode_locator(b["locator"], f"{where}.incoming[{slot_id}]"), stale)
        )
    outgoing = []
    for xref_id, body in _expect_obj(obj.get("outgoing", {}), f"{where}.outgoing").items():
        b = _expect_obj(body, f"{where}.outgoing[{xref_id}]")
        _check_keys(b, f"{where}.outgoing[{xref_id}]", {"doc", "slot"}, {"doc", "slot"})
        outgoing.append(
            OutgoingRef(
                xref_id,
                _decode_doc_id(b["doc"], f"{where}.outgoing[{xref_id}].doc"),
                _expect_str(b["slot"], f"{where}.outgoing[{xref_id}].slot"),
            )
        )
    return IndirectionTables(tuple(incoming), tuple(outgoing))


_HEADER_KEYS = {
    "level", "identifiers", "dates", "signatures", "agreement_hash", "xref_table",
    "type_definitions", "style_sheet", "doc_type", "doc_status", "parent_ids",
    "child_ids", "version", "edit_history", "other_data", "indirection", "code_refs",
}


def _decode_header(obj: dict, where: str) -> AgreementHeader:
    _check_keys(obj, where, _HEADER_KEYS)
    level = _expect_str(obj.get("level", "agreement"), f"{where}.level")
    version = (
        _decode_version(obj["version"], f"{where}.version")
        if "version" in obj
        else VersionInfo(1, _EPOCH, "local")
    )
    dates = {}
    for k, v in _expect_obj(obj.get("dates", {}), f"{where}.dates").items():
        dates[k] = _decode_date(v, f"{where}.dates[{k}]")
    style = {}
    for k, v in _expect_obj(obj.get("style_sheet", {}), f"{where}.style_sheet").items():
        style[k] = _expect_str(v, f"{where}.style_sheet[{k}]")
    return AgreementHeader(
        level=level,
        identifiers=tuple(
            _decode_doc_id(d, f"{where}.identifiers[{i}]")
            for i, d in enumerate(_expect_arr(obj.get("identifiers", []), f"{where}.identifiers"))
        ),
        dates=dates,
        signatures=tuple(
            _decode_signature(s, f"{where}.signatures[{i}]")
            for i, s in enumerate(_expect_arr(obj.get("signatures", []), f"{where}.signatures"))
        ),
        agreement_hash=(
            _decode_digest(obj["agreement_hash"], f"{where}.agreement_hash")
            if "agreement_hash" in obj
            else None
        ),
        xref_table=tuple(
            _decode_xref(_expect_obj(x, f"{where}.xref_table[{i}]"), f"{where}.xref_table[{i}]")
            for i, x in enumerate(_expect_arr(obj.get("xref_table", []), f"{where}.xref_table"))
        ),
        type_definitions=tuple(
            _decode_typedef(_expect_obj(t, f"{where}.type_definitions[{i}]"), f"{where}.type_definitions[{i}]")
            for i, t in enumerate(
                _expect_arr(obj.get("type_definitions", []), f"{where}.type_definitions")
            )
        ),
        style_sheet=style,
        doc_type=_expect_str(obj.get("doc_type", ""), f"{where}.doc_type"),
        doc_status=_expect_str(obj.get("doc_status", "draft"), f"{where}.doc_status"),
        parent_ids=tuple(
            _decode_doc_id(d, f"{where}.parent_ids[{i}]")
            for i, d in enumerate(_expect_arr(obj.get("parent_ids", []), f"{where}.parent_ids"))
        ),
        child_ids=tuple(
            _decode_doc_id(d, f"{where}.child_ids[{i}]")
            for i, d in enumerate(_expect_arr(obj.get("child_ids", []), f"{where}.child_ids"))
        ),
        version=version,
        edit_history=tuple(
            _decode_history_entry(e, f"{where}.edit_history[{i}]")
            for i, e in enumerate(_expect_arr(obj.get("edit_history", []), f"{where}.edit_history"))
        ),
        other_data=tuple(
            _decode_other_data(r, f"{where}.other_data[{i}]")
            for i, r in enumerate(_expect_arr(obj.get("other_data", []), f"{where}.other_data"))
        ),
        indirection=(
            _decode_indirection(obj["indirection"], f"{where}.indirection")
            if "indirection" in obj
            else IndirectionTables()
        ),
        code_refs=tuple(
            _decode_code_ref(_expect_obj(c, f"{where}.code_refs[{i}]"), f"{where}.code_refs[{i}]")
            for i, c in enumerate(_expect_arr(obj.get("code_refs", []), f"{where}.code_refs"))
        ),
    )
