"""Document lifecycle: hierarchy derivation, status, version control with
append-only edit history, transmission branching, and binding to
smart-contract code with dual integration.

Versions live on a branch: ``local`` histories are complete and never
truncated; ``transmitted`` copies carry no history, since the log (and any
sensitive recorded data) is metadata the counterparty should not receive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import TYPE_CHECKING

from .diagnostics import SlaError
from .params import ParamValue, ResolvedEnvironment, TypeRef, collect_execution_parameters
from .prose import DocumentId, ProseDocument, fresh_global_id

if TYPE_CHECKING:
    from .model import AgreementHeader, SmartLegalAgreement

STATUS_ORDER = (
    "draft",
    "parameters-identified",
    "agreed-with-counterparties",
    "signed",
    "code-bound-pending-authorization",
    "executed",
)

CHANGE_KINDS = frozenset(
    {
        "edited",
        "parameter-bound",
        "choice-resolved",
        "redacted",
        "status-changed",
        "code-bound",
        "rejected-amendment",
        "approval",
    }
)

BRANCHES = ("local", "transmitted")


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    raw = text[:-1] + "+00:00" if text.endswith("Z") else text
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class CodeRef:
    """A reference to smart-contract code on some execution platform.
    ``instance_id`` is write-once: set at dual integration, never changed."""

    platform: str
    code_version: str
    instance_id: str | None = None

    def __post_init__(self) -> None:
        if not self.platform or not self.code_version:
            raise ValueError("code ref needs platform and code_version")

    def key(self) -> tuple[str, str]:
        return (self.platform, self.code_version)


@dataclass(frozen=True)
class VersionInfo:
    number: int
    timestamp: datetime
    branch: str = "local"

    def __post_init__(self) -> None:
        if self.number < 1:
            raise ValueError("version number must be positive")
        if self.branch not in BRANCHES:
            raise ValueError(f"bad branch: {self.branch!r}")


@dataclass(frozen=True)
class EditEntry:
    timestamp: datetime
    actor: str
    change_kind: str
    detail: str
    resulting_version: int

    def __post_init__(self) -> None:
        if self.change_kind not in CHANGE_KINDS:
            raise ValueError(f"unknown change kind: {self.change_kind!r}")
        if self.resulting_version < 1:
            raise ValueError("resulting_version must be positive")

    def render(self) -> str:
        return "\t".join(
            (format_timestamp(self.timestamp), self.actor, self.change_kind, self.detail)
        )


EditHistory = tuple  # tuple[EditEntry, ...]


def initial_version(timestamp: datetime | None = None) -> VersionInfo:
    return VersionInfo(1, timestamp or utc_now(), "local")


# ---------------------------------------------------------------------------
# Status machine
# ---------------------------------------------------------------------------


def legal_transition(old: str, new: str) -> bool:
    """One step forward along the status order, or back to draft from
    anywhere (renegotiation)."""
    if old not in STATUS_ORDER or new not in STATUS_ORDER:
        return False
    if new == "draft":
        return old != "draft"
    return STATUS_ORDER.index(new) == STATUS_ORDER.index(old) + 1


def set_status(
    header: "AgreementHeader",
    new: str,
    *,
    actor: str = "",
    timestamp: datetime | None = None,
) -> "AgreementHeader":
    old = header.doc_status
    if not legal_transition(old, new):
        raise SlaError("ILLEGAL_TRANSITION", f"cannot move {old!r} -> {new!r}")
    bumped = record_edit(header, "status-changed", f"{old} -> {new}", actor, timestamp=timestamp)
    return replace(bumped, doc_status=new)


def record_edit(
    header: "AgreementHeader",
    change_kind: str,
    detail: str,
    actor: str,
    *,
    timestamp: datetime | None = None,
) -> "AgreementHeader":
    """Bump the version and append one history entry."""
    ts = timestamp or utc_now()
    number = header.version.number + 1
    entry = EditEntry(ts, actor, change_kind, detail, number)
    return replace(
        header,
        version=VersionInfo(number, ts, header.version.branch),
        edit_history=header.edit_history + (entry,),
    )


# ---------------------------------------------------------------------------
# Hierarchy
# ---------------------------------------------------------------------------


def derive_document(
    parent_doc: ProseDocument,
    parent_header: "AgreementHeader",
    new_type: str,
    *,
    child_id: DocumentId | None = None,
    timestamp: datetime | None = None,
) -> tuple[ProseDocument, "AgreementHeader", "AgreementHeader"]:
    """Copy a document downward in the template hierarchy.  Returns
    (child document, child header, updated parent header)."""
    from .model import AgreementHeader

    cid = child_id or fresh_global_id()
    child_doc = replace(parent_doc, id=cid)
    child_header = AgreementHeader(
        level="document",
        identifiers=(cid,),
        doc_type=new_type,
        doc_status="draft",
        parent_ids=(parent_doc.id,),
        version=initial_version(timestamp),
        type_definitions=parent_header.type_definitions,
        style_sheet=parent_header.style_sheet,
    )
    new_children = tuple(sorted(set(parent_header.child_ids) | {cid}, key=DocumentId.sort_key))
    return child_doc, child_header, replace(parent_header, child_ids=new_children)


# ---------------------------------------------------------------------------
# Transmission
# ---------------------------------------------------------------------------


def prepare_transmission(agreement: "SmartLegalAgreement") -> "SmartLegalAgreement":
    """The transmitted copy: histories emptied, sensitive recorded data
    removed, every version moved to the transmitted branch.  None of the
    stripped fields contribute to the digest, so it equals the local one."""
    headers = tuple(
        replace(
            h,
            edit_history=(),
            version=replace(h.version, branch="transmitted"),
            other_data=tuple(r for r in h.other_data if not r.sensitive),
        )
        for h in agreement.headers
    )
    return replace(agreement, headers=headers)


def export_transmission(agreement: "SmartLegalAgreement") -> bytes:
    from .canonical import serialize

    return serialize(prepare_transmission(agreement))


def receive_transmission(data: bytes) -> "SmartLegalAgreement":
    """Import into an empty repository: local branch resumed at version 1."""
    agreement = _parse_agreement(data)
    headers = tuple(
        replace(h, version=VersionInfo(1, h.version.timestamp, "local"), edit_history=())
        for h in agreement.headers
    )
    return replace(agreement, headers=headers)


def _parse_agreement(data: bytes) -> "SmartLegalAgreement":
    from .canonical import parse
    from .model import SmartContract, SmartLegalAgreement

    try:
        value = parse(data)
    except SlaError as exc:
        raise SlaError("PARSE_FAILURE", exc.message, details=exc.details) from exc
    if isinstance(value, SmartContract):
        if len(value.agreements) == 1:
            return value.agreements[0]
        raise SlaError("PARSE_FAILURE", "expected exactly one agreement")
    if isinstance(value, SmartLegalAgreement):
        return value
    raise SlaError("PARSE_FAILURE", f"expected an agreement, got {type(value).__name__}")


@dataclass(frozen=True)
class ImportResult:
    agreement: "SmartLegalAgreement | None"
    conflicts: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.agreement is not None and not self.conflicts


def import_merge(
    local: "SmartLegalAgreement",
    received: bytes,
    *,
    actor: str = "import",
    timestamp: datetime | None = None,
) -> ImportResult:
    """Merge a counterparty's re-transmission.  Fields the local side left
    open (unbound parameters, missing signatures or dates, absent documents)
    take the received value; divergence on anything both sides hold is a
    conflict, reported by path with no automatic resolution."""
    from .canonical import encode_value, hash_agreement

    other = _parse_agreement(received)
    local_ids = {d.id for d in local.documents}
    other_ids = {d.id for d in other.documents}
    if local_ids and other_ids and not (local_ids & other_ids):
        raise SlaError("UNRELATED_DOCUMENT", "no shared document identifiers")

    if hash_agreement(local) == hash_agreement(other):
        return ImportResult(local, ())

    conflicts: list[str] = []
    merges: list[tuple[str, str]] = []  # (change_kind, detail)

    docs = list(local.documents)
    for rd in other.documents:
        ld = local.document(rd.id)
        if ld is None:
            docs.append(rd)
            merges.append(("edited", f"document {rd.id.value} added"))
        elif encode_value(ld) != encode_value(rd):
            conflicts.append(f"{rd.id.value}:{_first_divergence(ld, rd)}")

    sets = {s.owner: s for s in local.parameter_sets}
    from .params import ParameterSet, format_value, values_equal

    for rs in other.parameter_sets:
        ls = sets.get(rs.owner)
        if ls is None:
            sets[rs.owner] = rs
            for p in rs.entries:
                if p.status == "bound":
                    merges.append(("parameter-bound", f"{p.name} = {format_value(p.value)}"))
            continue
        entries = {p.name: p for p in ls.entries}
        for rp in rs.entries:
            lp = entries.get(rp.name)
            if lp is None:
                entries[rp.name] = rp
                if rp.status == "bound":
                    merges.append(("parameter-bound", f"{rp.name} = {format_value(rp.value)}"))
            elif rp.status == "bound" and lp.status != "bound":
                entries[rp.name] = rp
                merges.append(("parameter-bound", f"{rp.name} = {format_value(rp.value)}"))
            elif rp.status == "bound" and lp.status == "bound":
                assert rp.value is not None and lp.value is not None
                if not values_equal(rp.value, lp.value):
                    owner = rs.owner.value if rs.owner else "@agreement"
                    conflicts.append(f"param:{owner}/{rp.name}")
        sets[rs.owner] = ParameterSet(rs.owner, tuple(entries.values()))

    headers = list(local.headers)
    lh = local.agreement_header()
    rh = other.agreement_header()
    if lh is not None and rh is not None:
        merged, hdr_conflicts, hdr_merges = _merge_headers(lh, rh)
        conflicts.extend(hdr_conflicts)
        merges.extend(hdr_merges)
        headers = [merged if h is lh else h for h in headers]
    for rdh in other.headers:
        if rdh.level != "document":
            continue
        ldh = next(
            (h for h in headers if h.level == "document" and set(h.identifiers) & set(rdh.identifiers)),
            None,
        )
        if ldh is None:
            headers.append(replace(rdh, version=VersionInfo(1, rdh.version.timestamp, "local")))
        else:
            merged, hdr_conflicts, hdr_merges = _merge_headers(ldh, rdh)
            conflicts.extend(hdr_conflicts)
            merges.extend(hdr_merges)
            headers = [merged if h is ldh else h for h in headers]

    if conflicts:
        return ImportResult(None, tuple(sorted(set(conflicts))))

    out = replace(
        local,
        documents=tuple(docs),
        parameter_sets=tuple(sets.values()),
        headers=tuple(headers),
    )
    ah = out.agreement_header()
    if ah is not None and merges:
        new_ah = ah
        for kind, detail in merges:
            new_ah = record_edit(new_ah, kind, detail, actor, timestamp=timestamp)
        out = out.with_header_replaced(ah, new_ah)
    return ImportResult(out, ())


def _first_divergence(a: ProseDocument, b: ProseDocument) -> str:
    from .canonical import encode_value

    for i, (na, nb) in enumerate(zip(a.root, b.root)):
        if encode_value(na) != encode_value(nb):
            return str(i)
    return str(min(len(a.root), len(b.root)))


def _merge_headers(
    local: "AgreementHeader", received: "AgreementHeader"
) -> tuple["AgreementHeader", list[str], list[tuple[str, str]]]:
    conflicts: list[str] = []
    merges: list[tuple[str, str]] = []
    out = local

    dates = dict(local.dates)
    for k, v in received.dates.items():
        if k not in dates:
            dates[k] = v
            merges.append(("edited", f"date {k} = {v.isoformat()}"))
        elif dates[k] != v:
            conflicts.append(f"date:{k}")
    out = replace(out, dates=dates)

    sigs = list(local.signatures)
    known = set(sigs)
    for s in received.signatures:
        if s not in known:
            sigs.append(s)
            merges.append(("approval", f"signature of {s.signer}"))
    out = replace(out, signatures=tuple(sigs))

    defs = {d.id: d for d in local.type_definitions}
    for d in received.type_definitions:
        if d.id not in defs:
            defs[d.id] = d
        elif defs[d.id] != d:
            conflicts.append(f"typedef:{d.id}")
    out = replace(out, type_definitions=tuple(defs.values()))

    if local.doc_type and received.doc_type and local.doc_type != received.doc_type:
        conflicts.append("doc_type")

    odata = {(r.name, r.doc, r.path): r for r in local.other_data}
    for r in received.other_data:
        key = (r.name, r.doc, r.path)
        if key not in odata:
            odata[key] = r
        elif odata[key] != r:
            conflicts.append(f"other_data:{r.name}")
    out = replace(out, other_data=tuple(odata.values()))

    refs = {c.key(): c for c in local.code_refs}
    for c in received.code_refs:
        have = refs.get(c.key())
        if have is None:
            refs[c.key()] = c
        elif c.instance_id and not have.instance_id:
            refs[c.key()] = c
            merges.append(("code-bound", f"instance {c.instance_id} on {c.platform}"))
        elif c.instance_id and have.instance_id and c.instance_id != have.instance_id:
            conflicts.append(f"code_ref:{c.platform}/{c.code_version}")
    out = replace(out, code_refs=tuple(refs.values()))

    parents = tuple(sorted(set(local.parent_ids) | set(received.parent_ids), key=DocumentId.sort_key))
    children = tuple(sorted(set(local.child_ids) | set(received.child_ids), key=DocumentId.sort_key))
    out = replace(out, parent_ids=parents, child_ids=children)

    return out, conflicts, merges


# ---------------------------------------------------------------------------
# Code binding and dual integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstantiationRequest:
    """Everything an execution platform needs: the code reference plus the
    ordered execution parameters, ending with the agreement digest."""

    code: CodeRef
    parameters: tuple[tuple[str, TypeRef, ParamValue], ...]


def bind_code(
    agreement: "SmartLegalAgreement",
    code: CodeRef,
    env: ResolvedEnvironment | None = None,
) -> InstantiationRequest:
    header = agreement.agreement_header()
    status = header.doc_status if header is not None else "draft"
    if status != "signed":
        raise SlaError("NOT_SIGNED", f"agreement status is {status!r}, not signed")
    if header is None or header.agreement_hash is None:
        raise SlaError("HASH_MISSING", "agreement-level header carries no stored digest")
    params = collect_execution_parameters(agreement, env)
    return InstantiationRequest(code, tuple(params))


def dual_integrate(
    agreement: "SmartLegalAgreement",
    code: CodeRef,
    instance_id: str,
    *,
    actor: str = "",
    timestamp: datetime | None = None,
) -> "SmartLegalAgreement":
    """Store the running code instance's identifier back into the agreement
    (the other half of dual integration).  This changes the content and so
    the digest; the prior digest stays recoverable from the history entry."""
    from .canonical import hash_agreement

    if not instance_id:
        raise ValueError("instance_id must be nonempty")
    header = agreement.agreement_header()
    if header is None:
        raise SlaError("UNKNOWN_CODE_REF", "agreement has no agreement-level header")
    match = next((c for c in header.code_refs if c.key() == code.key()), None)
    if match is None:
        raise SlaError(
            "UNKNOWN_CODE_REF", f"no code ref {code.platform}/{code.code_version} declared"
        )
    if match.instance_id is not None:
        raise SlaError(
            "ALREADY_INTEGRATED", f"instance {match.instance_id!r} already stored"
        )

    old = header.agreement_hash or hash_agreement(agreement)
    refs = tuple(
        replace(c, instance_id=instance_id) if c.key() == code.key() else c
        for c in header.code_refs
    )
    detail = (
        f"instance {instance_id} on {code.platform}/{code.code_version}; "
        f"prior digest sha-256:{old.hex}"
    )
    new_header = record_edit(
        replace(header, code_refs=refs), "code-bound", detail, actor, timestamp=timestamp
    )
    new_header = replace(new_header, doc_status="code-bound-pending-authorization")
    out = agreement.with_header_replaced(header, new_header)

    refreshed = hash_agreement(out)
    final_header = replace(new_header, agreement_hash=refreshed)
    return out.with_header_replaced(new_header, final_header)
