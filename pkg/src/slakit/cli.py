"""Command-line toolchain over the on-disk format.

Exit codes: 0 clean, 1 diagnostics found in the content, 2 usage or I/O
error.  Diagnostics go to standard error, one per line as
``SEVERITY CODE doc:path message``; everything machine-readable goes to
standard output.  Commands that append to the edit history accept
``--timestamp`` so output stays reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from datetime import datetime

from . import canonical, crossrefs, lifecycle, model, params, prose
from .diagnostics import Diagnostic, Severity, SlaError, ValidationReport, error

_RED = "\x1b[31m"
_YELLOW = "\x1b[33m"
_RESET = "\x1b[0m"


def _styled() -> bool:
    return sys.stderr.isatty() and not os.environ.get("SLA_NO_COLOR")


def _print_diag(d: Diagnostic) -> None:
    line = d.line()
    if _styled():
        color = _RED if d.severity is Severity.ERROR else _YELLOW
        line = f"{color}{d.severity.value}{_RESET}" + line[len(d.severity.value):]
    print(line, file=sys.stderr)


def _print_report(rep: ValidationReport) -> int:
    for d in rep:
        _print_diag(d)
    return 1 if len(rep) else 0


def _fail(code: str, locator: str, message: str) -> int:
    _print_diag(error(code, locator, message))
    return 1


def _usage_fail(message: str) -> int:
    print(f"sla: {message}", file=sys.stderr)
    return 2


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as f:
        return f.read()


def _write_bytes(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as f:
            f.write(data)


class _ContentError(Exception):
    """Wraps a diagnostic that should terminate the command with exit 1."""

    def __init__(self, code: str, locator: str, message: str):
        super().__init__(message)
        self.diag = error(code, locator, message)


def _parse_file(path: str):
    data = _read_bytes(path)
    try:
        return canonical.parse(data)
    except SlaError as exc:
        raise _ContentError(exc.code, path, exc.message) from exc


def _load_agreement(path: str):
    """(agreement, rewrap) where rewrap re-embeds an updated agreement in
    the same top-level shape the file had."""
    value = _parse_file(path)
    if isinstance(value, model.SmartLegalAgreement):
        return value, lambda a: a
    if isinstance(value, model.SmartContract):
        if len(value.agreements) == 1:
            refs = value.code_refs
            return value.agreements[0], lambda a: model.SmartContract((a,), refs)
        raise _ContentError(
            "EXPECTED_AGREEMENT", path, f"contract holds {len(value.agreements)} agreements"
        )
    raise _ContentError("EXPECTED_AGREEMENT", path, "file holds a bare document")


def _timestamp(args) -> datetime | None:
    if getattr(args, "timestamp", None) is None:
        return None
    return lifecycle.parse_timestamp(args.timestamp)


def _owner_label(owner) -> str:
    return "@agreement" if owner is None else owner.value


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    found = 0
    for path in args.files:
        try:
            value = _parse_file(path)
        except _ContentError as exc:
            _print_diag(exc.diag)
            found += 1
            continue
        if isinstance(value, prose.ProseDocument):
            reports = [prose.validate_structure(value)]
        elif isinstance(value, model.SmartLegalAgreement):
            reports = [model.validate_agreement(value, _policy(args))]
        else:
            reports = [model.validate_contract(value, _policy(args))]
        for rep in reports:
            prefixed = ValidationReport(
                tuple(replace(d, locator=f"{path}:{d.locator}") if args.prefix else d for d in rep)
            )
            found += len(prefixed)
            _print_report(prefixed)
    return 1 if found else 0


def _policy(args) -> params.PlacementPolicy:
    return params.PlacementPolicy(getattr(args, "policy", "dual"))


def _cmd_canonicalize(args) -> int:
    value = _parse_file(args.file)
    _write_bytes(args.out, canonical.serialize(value))
    return 0


def _digest_of(value) -> model.DigestValue:
    if isinstance(value, model.SmartContract):
        if len(value.agreements) == 1:
            return canonical.hash_agreement(value.agreements[0])
        return canonical.hash_contract(value)
    if isinstance(value, model.SmartLegalAgreement):
        return canonical.hash_agreement(value)
    return canonical.hash_document(value)


def _cmd_hash(args) -> int:
    value = _parse_file(args.file)
    digest = _digest_of(value)
    print(digest.render())
    if args.out:
        name = "-" if args.file == "-" else os.path.basename(args.file)
        _write_bytes(args.out, f"{digest.hex}  {name}\n".encode("utf-8"))
    if args.store:
        if isinstance(value, prose.ProseDocument):
            return _usage_fail("--store needs an agreement, not a bare document")
        if isinstance(value, model.SmartContract):
            if len(value.agreements) != 1:
                return _usage_fail("--store needs exactly one agreement")
            stored = model.SmartContract(
                (canonical.with_agreement_hash(value.agreements[0]),), value.code_refs
            )
        else:
            stored = canonical.with_agreement_hash(value)
        _write_bytes(args.store, canonical.serialize(stored))
    return 0


def _cmd_verify(args) -> int:
    data = _read_bytes(args.file)
    ok, message = canonical.verify(data, args.expect)
    if ok:
        print("OK")
        return 0
    code, _, rest = message.partition(" ")
    return _fail(code, args.file, rest or message)


def _cmd_extract_params(args) -> int:
    agreement, _ = _load_agreement(args.file)
    for pset in sorted(agreement.parameter_sets, key=params.ParameterSet.owner_key):
        for p in sorted(pset.entries, key=lambda p: p.name):
            value = "" if p.value is None else params.format_value(p.value)
            print(f"{p.name}\t{p.type_tag.format()}\t{value}\t{p.status}")
    return 0


def _cmd_resolve(args) -> int:
    sets = []
    for path in args.files:
        value = _parse_file(path)
        if isinstance(value, model.SmartContract):
            for a in value.agreements:
                sets.extend(a.parameter_sets)
        elif isinstance(value, model.SmartLegalAgreement):
            sets.extend(value.parameter_sets)
        else:
            raise _ContentError("EXPECTED_AGREEMENT", path, "file holds a bare document")
    try:
        env, rep = params.resolve_bindings(tuple(sets))
    except SlaError as exc:
        raise _ContentError(exc.code, " ".join(args.files), exc.message) from exc
    for (owner, name), binding in sorted(
        env.bindings.items(),
        key=lambda kv: ((0,) if kv[0][0] is None else (1,) + kv[0][0].sort_key(), kv[0][1]),
    ):
        print(
            f"{_owner_label(owner)}\t{name}\t{params.format_value(binding.value)}"
            f"\t{_owner_label(binding.provenance)}"
        )
    return _print_report(rep)


def _cmd_redact(args) -> int:
    agreement, rewrap = _load_agreement(args.file)
    spans = 0
    removed = 0
    docs = []
    for doc in agreement.documents:
        redacted, report = prose.redact(doc)
        docs.append(redacted)
        spans += report.spans_redacted
        removed += report.bytes_removed
    agreement = replace(agreement, documents=tuple(docs))
    header = agreement.agreement_header()
    if header is not None and spans:
        updated = lifecycle.record_edit(
            header, "redacted", f"{spans} span(s), {removed} byte(s)",
            args.actor, timestamp=_timestamp(args),
        )
        agreement = agreement.with_header_replaced(header, updated)
    _write_bytes(args.out, canonical.serialize(rewrap(agreement)))
    print(f"{spans}\t{removed}")
    return 0


def _cmd_choices(args) -> int:
    agreement, rewrap = _load_agreement(args.file)
    if not args.resolve:
        for doc in sorted(agreement.documents, key=lambda d: d.id.sort_key()):
            for choice_id, count in prose.list_choices(doc):
                print(f"{doc.id.value}\t{choice_id}\t{count}")
        return 0
    if not args.out:
        return _usage_fail("--resolve needs --out")
    for spec_text in args.resolve:
        choice_id, sep, index_text = spec_text.partition("=")
        if not sep or not index_text.isdigit():
            return _usage_fail(f"bad --resolve {spec_text!r}, expected <choice_id>=<index>")
        index = int(index_text)
        hit = None
        for doc in agreement.documents:
            if any(cid == choice_id for cid, _ in prose.list_choices(doc)):
                hit = doc
                break
        if hit is None:
            raise _ContentError("CHOICE_NOT_FOUND", args.file, f"no choice block {choice_id!r}")
        try:
            resolved = prose.resolve_choice(hit, choice_id, index)
        except SlaError as exc:
            raise _ContentError(exc.code, f"{hit.id.value}", exc.message) from exc
        agreement = replace(
            agreement,
            documents=tuple(resolved if d.id == hit.id else d for d in agreement.documents),
        )
        header = agreement.agreement_header()
        if header is not None:
            updated = lifecycle.record_edit(
                header, "choice-resolved", f"{choice_id} -> {index}",
                args.actor, timestamp=_timestamp(args),
            )
            agreement = agreement.with_header_replaced(header, updated)
    _write_bytes(args.out, canonical.serialize(rewrap(agreement)))
    return 0


def _render_target(target) -> str:
    doc = crossrefs.target_doc(target).value
    if isinstance(target, crossrefs.SegmentTarget):
        return f"{doc}:{prose.path_str(target.path)}"
    if isinstance(target, crossrefs.TableTarget):
        return f"{doc}:table {target.number}"
    if isinstance(target, crossrefs.AnchorTarget):
        return f"{doc}:anchor {target.anchor_id}"
    return f"{doc}:slot {target.slot}"


def _cmd_xrefs(args) -> int:
    agreement, _ = _load_agreement(args.file)
    if args.check:
        return _print_report(crossrefs.validate_crossrefs(agreement))
    header = agreement.agreement_header()
    for x in sorted(header.xref_table if header else (), key=lambda x: x.xref_id):
        source = f"{x.source.doc.value}:{prose.path_str(x.source.path)}"
        print(f"{x.xref_id}\t{x.kind}\t{source}\t{_render_target(x.target)}")
    return 0


def _cmd_derive(args) -> int:
    agreement, rewrap = _load_agreement(args.file)
    parent = None
    if args.from_doc:
        parent = next((d for d in agreement.documents if d.id.value == args.from_doc), None)
        if parent is None:
            raise _ContentError("DOC_NOT_FOUND", args.file, f"no document {args.from_doc!r}")
    elif len(agreement.documents) == 1:
        parent = agreement.documents[0]
    else:
        return _usage_fail("--from is required when the agreement holds several documents")
    ts = _timestamp(args)
    parent_header = agreement.header_for(parent.id)
    fresh_parent_header = parent_header is None
    if fresh_parent_header:
        parent_header = model.AgreementHeader(
            level="document",
            identifiers=(parent.id,),
            version=lifecycle.initial_version(ts),
        )
    child_id = prose.local_id(args.child_id) if args.child_id else None
    child_doc, child_header, updated_parent = lifecycle.derive_document(
        parent, parent_header, args.type, child_id=child_id, timestamp=ts
    )
    headers = agreement.headers + ((parent_header,) if fresh_parent_header else ())
    agreement = replace(agreement, headers=headers)
    agreement = agreement.with_header_replaced(parent_header, updated_parent)
    agreement = replace(
        agreement,
        documents=agreement.documents + (child_doc,),
        headers=agreement.headers + (child_header,),
    )
    _write_bytes(args.out, canonical.serialize(rewrap(agreement)))
    print(child_doc.id.value)
    return 0


def _code_ref(args) -> lifecycle.CodeRef:
    return lifecycle.CodeRef(args.platform, args.code_version)


def _cmd_bind(args) -> int:
    agreement, _ = _load_agreement(args.file)
    env, rep = params.resolve_bindings(agreement.parameter_sets)
    if not rep.ok:
        return _print_report(rep)
    try:
        request = lifecycle.bind_code(agreement, _code_ref(args), env)
    except SlaError as exc:
        raise _ContentError(exc.code, args.file, exc.message) from exc
    jsonable = {
        "code": canonical.encode_value(request.code),
        "parameters": [
            {"name": name, "type": tag.format(), "value": canonical.encode_param_value(value)}
            for name, tag, value in request.parameters
        ],
    }
    sys.stdout.buffer.write(canonical.emit(jsonable) + b"\n")
    return 0


def _cmd_integrate(args) -> int:
    agreement, rewrap = _load_agreement(args.file)
    try:
        done = lifecycle.dual_integrate(
            agreement, _code_ref(args), args.instance,
            actor=args.actor, timestamp=_timestamp(args),
        )
    except SlaError as exc:
        raise _ContentError(exc.code, args.file, exc.message) from exc
    _write_bytes(args.out, canonical.serialize(rewrap(done)))
    print(canonical.hash_agreement(done).render())
    return 0


def _cmd_history(args) -> int:
    agreement, _ = _load_agreement(args.file)
    if args.doc:
        doc = next((d for d in agreement.documents if d.id.value == args.doc), None)
        if doc is None:
            raise _ContentError("DOC_NOT_FOUND", args.file, f"no document {args.doc!r}")
        header = agreement.header_for(doc.id)
    else:
        header = agreement.agreement_header()
    if header is None:
        raise _ContentError("HEADER_MISSING", args.file, "no header to read history from")
    for entry in header.edit_history:
        print(entry.render())
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sla", description="Smart legal agreement toolchain."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def timestamped(p):
        p.add_argument("--timestamp", help="ISO 8601 instant recorded in the edit history")
        p.add_argument("--actor", default="cli", help="name recorded in the edit history")

    p = sub.add_parser("validate", help="structural, placement, and reference checks")
    p.add_argument("files", nargs="+")
    p.add_argument("--policy", choices=[pl.value for pl in params.PlacementPolicy], default="dual")
    p.add_argument("--prefix", action="store_true", help="prefix diagnostics with the file name")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("canonicalize", help="emit canonical bytes")
    p.add_argument("file")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_canonicalize)

    p = sub.add_parser("hash", help="print the sha-256 digest")
    p.add_argument("file")
    p.add_argument("--out", help="also write '<hex>  <filename>' to this path")
    p.add_argument("--store", help="write a copy with the digest stored in its header")
    p.set_defaults(func=_cmd_hash)

    p = sub.add_parser("verify", help="check a file against an expected digest")
    p.add_argument("file")
    p.add_argument("--expect", required=True, help="hex digest, with or without 'sha-256:'")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("extract-params", help="list parameters, one per line")
    p.add_argument("file")
    p.set_defaults(func=_cmd_extract_params)

    p = sub.add_parser("resolve", help="resolve parameter bindings across files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=_cmd_resolve)

    p = sub.add_parser("redact", help="blank marked spans and write the copy")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    timestamped(p)
    p.set_defaults(func=_cmd_redact)

    p = sub.add_parser("choices", help="list optional clauses, or pick options")
    p.add_argument("file")
    p.add_argument("--resolve", action="append", default=[], metavar="ID=INDEX")
    p.add_argument("--out")
    timestamped(p)
    p.set_defaults(func=_cmd_choices)

    p = sub.add_parser("xrefs", help="list cross-references, or --check them")
    p.add_argument("file")
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=_cmd_xrefs)

    p = sub.add_parser("derive", help="derive a child document")
    p.add_argument("file")
    p.add_argument("--type", required=True, dest="type")
    p.add_argument("--out", required=True)
    p.add_argument("--from", dest="from_doc", help="parent document id value")
    p.add_argument("--child-id", help="local id for the child (default: fresh global id)")
    timestamped(p)
    p.set_defaults(func=_cmd_derive)

    p = sub.add_parser("bind", help="print the instantiation request for code binding")
    p.add_argument("file")
    p.add_argument("--platform", required=True)
    p.add_argument("--code-version", required=True, dest="code_version")
    p.set_defaults(func=_cmd_bind)

    p = sub.add_parser("integrate", help="record the code instance id (dual integration)")
    p.add_argument("file")
    p.add_argument("--platform", required=True)
    p.add_argument("--code-version", required=True, dest="code_version")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    timestamped(p)
    p.set_defaults(func=_cmd_integrate)

    p = sub.add_parser("history", help="print edit history records")
    p.add_argument("file")
    p.add_argument("--doc", help="document id value (default: agreement-level header)")
    p.set_defaults(func=_cmd_history)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ContentError as exc:
        _print_diag(exc.diag)
        return 1
    except SlaError as exc:
        _print_diag(error(exc.code, "-", exc.message))
        return 1
    except ValueError as exc:
        return _usage_fail(str(exc))
    except OSError as exc:
        return _usage_fail(f"{exc.filename or ''}: {exc.strerror or exc}")


if __name__ == "__main__":
    sys.exit(main())
