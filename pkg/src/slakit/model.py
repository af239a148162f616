"""The two container levels: a smart contract holds agreements and code
references; an agreement holds prose documents, parameter sets, and headers.
Collections are unordered: equality ignores element order, and the
canonical byte form fixes a sort.

Exactly one header (when any exist) is marked agreement-level: it owns the
cross-reference table, type definitions, stored digest, and code refs.
Document-level headers each attach to one document and own its lifecycle
fields and indirection tables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from typing import Mapping

from .crossrefs import CrossReference, IndirectionTables, validate_crossrefs
from .diagnostics import Diagnostic, ValidationReport, error
from .lifecycle import CodeRef, EditEntry, VersionInfo, initial_version
from .params import (
    OtherDataRecord,
    Parameter,
    ParameterSet,
    PlacementPolicy,
    TypeDef,
    TypeRef,
    parse_value,
    typecheck_parameter,
)
from .prose import (
    DESCRIPTIVE_KINDS,
    PRESENTATIONAL_KINDS,
    Descriptive,
    DocumentId,
    ProseDocument,
    iter_spans,
    path_str,
    validate_structure,
)

SUPPORTED_DIGESTS = frozenset({"sha-256"})
_HEX64 = re.compile(r"[0-9a-f]{64}")


@dataclass(frozen=True)
class DigestValue:
    algorithm: str
    hex: str

    def __post_init__(self) -> None:
        if self.algorithm not in SUPPORTED_DIGESTS:
            raise ValueError(f"unsupported digest algorithm: {self.algorithm!r}")
        if _HEX64.fullmatch(self.hex) is None:
            raise ValueError("digest hex must be 64 lowercase hex characters")

    def render(self) -> str:
        return f"{self.algorithm}:{self.hex}"


@dataclass(frozen=True)
class SignatureRecord:
    """An opaque signature; this library records, it does not verify."""

    signer: str
    timestamp: datetime
    sig: str

    def __post_init__(self) -> None:
        if not self.signer or not self.sig:
            raise ValueError("signature needs a signer and signature text")


@dataclass(frozen=True, eq=False)
class AgreementHeader:
    level: str = "agreement"  # agreement | document
    identifiers: tuple[DocumentId, ...] = ()
    dates: Mapping[str, date] = field(default_factory=dict)
    signatures: tuple[SignatureRecord, ...] = ()
    agreement_hash: DigestValue | None = None
    xref_table: tuple[CrossReference, ...] = ()
    type_definitions: tuple[TypeDef, ...] = ()
    style_sheet: Mapping[str, str] = field(default_factory=dict)
    doc_type: str = ""
    doc_status: str = "draft"
    parent_ids: tuple[DocumentId, ...] = ()
    child_ids: tuple[DocumentId, ...] = ()
    version: VersionInfo = field(default_factory=initial_version)
    edit_history: tuple[EditEntry, ...] = ()
    other_data: tuple[OtherDataRecord, ...] = ()
    indirection: IndirectionTables = field(default_factory=IndirectionTables)
    code_refs: tuple[CodeRef, ...] = ()

    def __post_init__(self) -> None:
        if self.level not in ("agreement", "document"):
            raise ValueError(f"bad header level: {self.level!r}")
        for name in ("identifiers", "signatures", "xref_table", "type_definitions",
                     "parent_ids", "child_ids", "edit_history", "other_data", "code_refs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "dates", dict(self.dates))
        object.__setattr__(self, "style_sheet", dict(self.style_sheet))
        if self.level == "document" and len(self.identifiers) != 1:
            raise ValueError("a document-level header attaches to exactly one document")
        if set(self.parent_ids) & set(self.child_ids):
            raise ValueError("parent_ids and child_ids must be disjoint")
        ids = [x.xref_id for x in self.xref_table]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate cross-reference ids in table")
        keys = [c.key() for c in self.code_refs]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate code refs in header")
        for k, p in self.style_sheet.items():
            if k not in DESCRIPTIVE_KINDS or p not in PRESENTATIONAL_KINDS:
                raise ValueError(f"bad style sheet entry: {k!r} -> {p!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AgreementHeader):
            return NotImplemented
        from .canonical import encode_value

        return encode_value(self) == encode_value(other)

    __hash__ = None  # type: ignore[assignment]

    def document_id(self) -> DocumentId | None:
        return self.identifiers[0] if self.level == "document" else None


@dataclass(frozen=True, eq=False)
class SmartLegalAgreement:
    documents: tuple[ProseDocument, ...] = ()
    parameter_sets: tuple[ParameterSet, ...] = ()
    headers: tuple[AgreementHeader, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "parameter_sets", tuple(self.parameter_sets))
        object.__setattr__(self, "headers", tuple(self.headers))
        ids = [d.id for d in self.documents]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate document ids in agreement")
        if self.headers:
            marks = [h for h in self.headers if h.level == "agreement"]
            if len(marks) != 1:
                raise ValueError("exactly one agreement-level header is required")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SmartLegalAgreement):
            return NotImplemented
        from .canonical import encode_value

        return encode_value(self) == encode_value(other)

    __hash__ = None  # type: ignore[assignment]

    def document(self, doc_id: DocumentId) -> ProseDocument | None:
        for d in self.documents:
            if d.id == doc_id:
                return d
        return None

    def agreement_header(self) -> AgreementHeader | None:
        for h in self.headers:
            if h.level == "agreement":
                return h
        return None

    def header_for(self, doc_id: DocumentId) -> AgreementHeader | None:
        for h in self.headers:
            if h.level == "document" and doc_id in h.identifiers:
                return h
        return None

    def with_header_replaced(
        self, old: AgreementHeader, new: AgreementHeader
    ) -> "SmartLegalAgreement":
        if not any(h is old for h in self.headers):
            raise ValueError("header to replace is not part of this agreement")
        return replace(self, headers=tuple(new if h is old else h for h in self.headers))

    def parameter_set(self, owner: DocumentId | None) -> ParameterSet | None:
        for s in self.parameter_sets:
            if s.owner == owner:
                return s
        return None


@dataclass(frozen=True, eq=False)
class SmartContract:
    agreements: tuple[SmartLegalAgreement, ...] = ()
    code_refs: tuple[CodeRef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "agreements", tuple(self.agreements))
        object.__setattr__(self, "code_refs", tuple(self.code_refs))
        seen: set[DocumentId] = set()
        for a in self.agreements:
            for d in a.documents:
                if d.id in seen:
                    raise ValueError(f"document id {d.id.value!r} appears in two agreements")
                seen.add(d.id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SmartContract):
            return NotImplemented
        from .canonical import encode_value

        return encode_value(self) == encode_value(other)

    __hash__ = None  # type: ignore[assignment]


def new_smart_contract() -> SmartContract:
    return SmartContract((), ())


# ---------------------------------------------------------------------------
# Whole-agreement validation
# ---------------------------------------------------------------------------


def _prose_param_markups(doc: ProseDocument):
    for path, span in iter_spans(doc):
        for m in span.marks:
            if isinstance(m, Descriptive) and m.kind == "parameter":
                yield path, m


def validate_agreement(
    agreement: SmartLegalAgreement, policy: PlacementPolicy = PlacementPolicy.DUAL
) -> ValidationReport:
    """Structural checks of every document, header attachment, parameter
    typing, placement-policy conformance, and cross-reference consistency."""
    diags: list[Diagnostic] = []

    for doc in agreement.documents:
        diags.extend(validate_structure(doc).diagnostics)

    doc_ids = {d.id for d in agreement.documents}
    attached: set[DocumentId] = set()
    for h in agreement.headers:
        if h.level != "document":
            continue
        did = h.identifiers[0]
        if did not in doc_ids:
            diags.append(error("HEADER_DOC_UNKNOWN", did.value, "header names no known document"))
        if did in attached:
            diags.append(error("DUPLICATE_HEADER", did.value, "two headers attach to one document"))
        attached.add(did)

    owners = [s.owner for s in agreement.parameter_sets]
    for owner in owners:
        if owner is not None and owner not in doc_ids:
            diags.append(error("UNKNOWN_OWNER", owner.value, "parameter set names no known document"))
    seen_owners: set = set()
    for owner in owners:
        if owner in seen_owners:
            label = owner.value if owner else "@agreement"
            diags.append(error("DUPLICATE_OWNER", label, "two parameter sets share an owner"))
        seen_owners.add(owner)

    ah = agreement.agreement_header()
    defs = ah.type_definitions if ah is not None else ()
    for s in agreement.parameter_sets:
        label = s.owner.value if s.owner else "@agreement"
        for p in s.entries:
            for d in typecheck_parameter(p, defs).diagnostics:
                diags.append(replace(d, locator=f"{label}/{d.locator}"))

    diags.extend(_placement_diagnostics(agreement, policy))
    diags.extend(validate_crossrefs(agreement).diagnostics)
    return ValidationReport(tuple(diags))


def _placement_diagnostics(
    agreement: SmartLegalAgreement, policy: PlacementPolicy
) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    if policy is PlacementPolicy.PROSE_ONLY:
        for s in agreement.parameter_sets:
            if s.entries:
                label = s.owner.value if s.owner else "@agreement"
                diags.append(
                    error("PARAM_SET_FORBIDDEN", label, "prose-only placement forbids set entries")
                )
        for doc in agreement.documents:
            for path, m in _prose_param_markups(doc):
                where = f"{doc.id.value}:{path_str(path)}"
                if "type" not in m.attrs or ("value" not in m.attrs and "status" not in m.attrs):
                    diags.append(
                        error("PARAM_NOT_SELF_CONTAINED", where,
                              f"markup for {m.ident!r} lacks type/value attributes")
                    )
                elif "value" in m.attrs:
                    try:
                        parse_value(m.attrs["value"], TypeRef.parse(m.attrs["type"]))
                    except Exception:
                        diags.append(
                            error("VALUE_TYPE_MISMATCH", where,
                                  f"attribute value does not parse as {m.attrs['type']}")
                        )
    elif policy is PlacementPolicy.ELEMENT_ONLY:
        for doc in agreement.documents:
            for path, m in _prose_param_markups(doc):
                diags.append(
                    error("PARAM_IN_PROSE_FORBIDDEN", f"{doc.id.value}:{path_str(path)}",
                          f"parameter markup {m.ident!r} under element-only placement")
                )
    else:  # dual
        entry_names = {p.name for s in agreement.parameter_sets for p in s.entries}
        anchored: set[str] = set()
        for doc in agreement.documents:
            for path, m in _prose_param_markups(doc):
                anchored.add(m.ident or "")
                if m.ident not in entry_names:
                    diags.append(
                        error("DANGLING_PARAM_REF", f"{doc.id.value}:{path_str(path)}",
                              f"no parameter entry named {m.ident!r}")
                    )
        for s in agreement.parameter_sets:
            label = s.owner.value if s.owner else "@agreement"
            for p in s.entries:
                if p.attrs.get("prose") == "true" and p.name not in anchored:
                    diags.append(
                        error("PROSE_ANCHOR_MISSING", f"{label}/{p.name}",
                              "prose-anchored entry has no markup")
                    )
    return diags


def validate_contract(
    contract: SmartContract, policy: PlacementPolicy = PlacementPolicy.DUAL
) -> ValidationReport:
    diags: list[Diagnostic] = []
    for a in contract.agreements:
        diags.extend(validate_agreement(a, policy).diagnostics)
    return ValidationReport(tuple(diags))
