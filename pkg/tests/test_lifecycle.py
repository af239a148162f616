"""Versioning, transmission, merge, derivation, and dual integration."""

from __future__ import annotations

from dataclasses import replace
from datetime import date, datetime, timezone
from decimal import Decimal

import pytest

from slakit import canonical as cf
from slakit import lifecycle as lc
from slakit import model as md
from slakit import params as pm
from slakit import prose as pr
from slakit.diagnostics import SlaError

from conftest import TS, MASTER_ID, SCHED_ID, build_agreement, mk_doc


# --- timestamps ------------------------------------------------------------------


def test_timestamp_round_trip():
    text = lc.format_timestamp(TS)
    assert text == "2026-03-01T12:00:00.000000Z"
    assert lc.parse_timestamp(text) == TS


def test_parse_timestamp_accepts_naive_and_offset_forms():
    assert lc.parse_timestamp("2026-03-01T12:00:00") == TS
    assert lc.parse_timestamp("2026-03-01T13:00:00+01:00") == TS


def test_format_timestamp_keeps_microseconds():
    ts = datetime(2026, 3, 1, 12, 0, 0, 123456, tzinfo=timezone.utc)
    assert lc.format_timestamp(ts).endswith(".123456Z")


# --- leaf records -------------------------------------------------------------------


def test_code_ref_validates_and_keys():
    ref = lc.CodeRef("evm", "1.2.0")
    assert ref.key() == ("evm", "1.2.0")
    assert ref.instance_id is None
    with pytest.raises(ValueError):
        lc.CodeRef("", "1.0")
    with pytest.raises(ValueError):
        lc.CodeRef("evm", "")


def test_version_info_validates():
    with pytest.raises(ValueError):
        lc.VersionInfo(0, TS, "local")
    with pytest.raises(ValueError):
        lc.VersionInfo(1, TS, "upstream")


def test_edit_entry_validates_kind_and_renders():
    entry = lc.EditEntry(TS, "alice", "edited", "x", 2)
    assert entry.render() == "2026-03-01T12:00:00.000000Z\talice\tedited\tx"
    with pytest.raises(ValueError):
        lc.EditEntry(TS, "alice", "renamed", "x", 2)


# --- status machine -----------------------------------------------------------------


def test_status_order_walk():
    for old, new in zip(lc.STATUS_ORDER, lc.STATUS_ORDER[1:]):
        assert lc.legal_transition(old, new)


def test_no_skipping_and_draft_reset():
    assert not lc.legal_transition("draft", "signed")
    assert lc.legal_transition("signed", "draft")       # renegotiation
    assert not lc.legal_transition("draft", "draft")
    assert not lc.legal_transition("draft", "finished")


def test_set_status_records_history():
    hdr = md.AgreementHeader(version=lc.initial_version(TS))
    out = lc.set_status(hdr, "parameters-identified", actor="ops", timestamp=TS)
    assert out.doc_status == "parameters-identified"
    assert out.version.number == 2
    (entry,) = out.edit_history
    assert entry.change_kind == "status-changed"
    assert entry.detail == "draft -> parameters-identified"
    with pytest.raises(SlaError) as exc:
        lc.set_status(hdr, "signed", actor="ops", timestamp=TS)
    assert exc.value.code == "ILLEGAL_TRANSITION"


def test_record_edit_keeps_number_in_step():
    hdr = md.AgreementHeader(version=lc.initial_version(TS))
    for i in range(4):
        hdr = lc.record_edit(hdr, "edited", f"pass {i}", "alice", timestamp=TS)
        assert len(hdr.edit_history) == hdr.version.number - 1
        assert hdr.edit_history[-1].resulting_version == hdr.version.number


# --- derivation ---------------------------------------------------------------------


def test_derive_document_links_both_directions(agreement):
    parent_hdr = agreement.header_for(MASTER_ID)
    child, child_hdr, new_parent = lc.derive_document(
        agreement.document(MASTER_ID), parent_hdr, "confirmation", timestamp=TS
    )
    assert child.root == agreement.document(MASTER_ID).root
    assert child.id.scope == "global"
    assert child_hdr.parent_ids == (MASTER_ID,)
    assert child.id in new_parent.child_ids
    assert child_hdr.doc_type == "confirmation"
    assert child_hdr.doc_status == "draft" and child_hdr.version.number == 1


def test_derive_document_accepts_explicit_id(agreement):
    cid = pr.local_id("conf-1")
    child, child_hdr, _ = lc.derive_document(
        agreement.document(MASTER_ID), agreement.header_for(MASTER_ID),
        "confirmation", child_id=cid, timestamp=TS,
    )
    assert child.id == cid
    assert child_hdr.identifiers == (cid,)


def test_derive_inherits_typedefs_and_styles(agreement):
    defs = (pm.TypeDef("Percentage", pm.DECIMAL, minimum=Decimal(0)),)
    parent_hdr = replace(
        agreement.header_for(MASTER_ID),
        type_definitions=defs, style_sheet={"heading": "bold"},
    )
    _, child_hdr, _ = lc.derive_document(
        agreement.document(MASTER_ID), parent_hdr, "confirmation", timestamp=TS
    )
    assert child_hdr.type_definitions == defs
    assert child_hdr.style_sheet == {"heading": "bold"}


# --- transmission ---------------------------------------------------------------------


def test_prepare_transmission_strips_only_uncovered_fields(agreement):
    hdr = agreement.agreement_header()
    ag = agreement.with_header_replaced(
        hdr, lc.record_edit(hdr, "edited", "local step", "alice", timestamp=TS)
    )
    out = lc.prepare_transmission(ag)
    for h in out.headers:
        assert h.version.branch == "transmitted"
        assert h.edit_history == ()
        assert all(not r.sensitive for r in h.other_data)
    # version numbers and timestamps travel with the copy
    assert out.agreement_header().version.number == ag.agreement_header().version.number
    assert cf.hash_agreement(out) == cf.hash_agreement(ag)


def test_receive_transmission_starts_fresh_lineage(agreement):
    data = lc.export_transmission(agreement)
    received = lc.receive_transmission(data)
    for h in received.headers:
        assert h.version.branch == "local"
        assert h.version.number == 1
        assert h.edit_history == ()


def test_received_garbage_is_a_parse_failure():
    with pytest.raises(SlaError) as exc:
        lc.receive_transmission(b"{nope")
    assert exc.value.code == "PARSE_FAILURE"


# --- import merge -----------------------------------------------------------------------


def _their_copy(agreement):
    return lc.receive_transmission(lc.export_transmission(agreement))


def test_merge_identical_copies_is_a_no_op(agreement):
    result = lc.import_merge(agreement, lc.export_transmission(agreement), timestamp=TS)
    assert result.ok
    assert result.agreement == agreement


def test_merge_takes_bindings_the_local_side_left_open(agreement):
    theirs = _their_copy(agreement)
    sets = tuple(
        pm.ParameterSet(
            s.owner,
            tuple(
                replace(p, status="bound", value=Decimal("4.5"), target=None)
                if p.name == "rate" else p
                for p in s.entries
            ),
        ) if s.owner == MASTER_ID else s
        for s in theirs.parameter_sets
    )
    theirs = md.SmartLegalAgreement(theirs.documents, sets, theirs.headers)

    result = lc.import_merge(agreement, cf.serialize(theirs), actor="import", timestamp=TS)
    assert result.ok, result.conflicts
    merged = result.agreement.parameter_set(MASTER_ID).get("rate")
    assert merged.status == "bound" and merged.value == Decimal("4.5")
    kinds = [e.change_kind for e in result.agreement.agreement_header().edit_history]
    assert "parameter-bound" in kinds


def test_merge_reports_conflicting_bound_values(agreement):
    theirs = _their_copy(agreement)
    sets = tuple(
        pm.ParameterSet(
            s.owner,
            tuple(replace(p, value=Decimal("9.9")) if p.name == "rate" else p for p in s.entries),
        ) if s.owner == SCHED_ID else s
        for s in theirs.parameter_sets
    )
    theirs = md.SmartLegalAgreement(theirs.documents, sets, theirs.headers)

    result = lc.import_merge(agreement, cf.serialize(theirs), timestamp=TS)
    assert not result.ok
    assert result.agreement is None
    assert f"param:{SCHED_ID.value}/rate" in result.conflicts


def test_merge_reports_divergent_prose_by_position(agreement):
    theirs = _their_copy(agreement)
    docs = tuple(
        pr.ProseDocument(d.id, (pr.Text("changed"),) + d.root[1:]) if d.id == MASTER_ID else d
        for d in theirs.documents
    )
    theirs = md.SmartLegalAgreement(docs, theirs.parameter_sets, theirs.headers)
    result = lc.import_merge(agreement, cf.serialize(theirs), timestamp=TS)
    assert not result.ok
    assert any(c.startswith("master:0") for c in result.conflicts)


def test_merge_rejects_unrelated_agreements(agreement):
    alien = md.SmartLegalAgreement((mk_doc("alien", (pr.Text("hi"),)),), (), ())
    with pytest.raises(SlaError) as exc:
        lc.import_merge(agreement, cf.serialize(alien), timestamp=TS)
    assert exc.value.code == "UNRELATED_DOCUMENT"


def test_merge_adopts_missing_signatures_as_approvals(agreement):
    theirs = _their_copy(agreement)
    hdr = theirs.agreement_header()
    signed = theirs.with_header_replaced(
        hdr, replace(hdr, signatures=(md.SignatureRecord("bob", TS, "sig-b"),))
    )
    result = lc.import_merge(agreement, cf.serialize(signed), timestamp=TS)
    assert result.ok, result.conflicts
    assert [s.signer for s in result.agreement.agreement_header().signatures] == ["bob"]
    kinds = [e.change_kind for e in result.agreement.agreement_header().edit_history]
    assert "approval" in kinds


def test_merge_reports_conflicting_dates(agreement):
    theirs = _their_copy(agreement)
    hdr = theirs.agreement_header()
    moved = theirs.with_header_replaced(
        hdr, replace(hdr, dates={"agreement": date(2030, 1, 1)})
    )
    result = lc.import_merge(agreement, cf.serialize(moved), timestamp=TS)
    assert not result.ok
    assert "date:agreement" in result.conflicts


def test_merge_adopts_unknown_documents(agreement):
    theirs = _their_copy(agreement)
    extra = mk_doc("annex", (pr.Text("annex body"),))
    theirs = md.SmartLegalAgreement(
        theirs.documents + (extra,), theirs.parameter_sets, theirs.headers
    )
    result = lc.import_merge(agreement, cf.serialize(theirs), timestamp=TS)
    assert result.ok, result.conflicts
    assert result.agreement.document(extra.id) is not None


# --- code binding -------------------------------------------------------------------------


def _signed_with_code(agreement):
    code = lc.CodeRef("evm", "1.2.0")
    hdr = agreement.agreement_header()
    for status in lc.STATUS_ORDER[1:4]:
        hdr = lc.set_status(hdr, status, actor="ops", timestamp=TS)
    hdr = replace(hdr, code_refs=(code,))
    ag = agreement.with_header_replaced(agreement.agreement_header(), hdr)
    return cf.with_agreement_hash(ag), code


def test_bind_code_collects_execution_parameters(agreement):
    ag, code = _signed_with_code(agreement)
    env, _ = pm.resolve_bindings(ag.parameter_sets)
    request = lc.bind_code(ag, code, env)
    assert request.code == code
    names = [name for name, _, _ in request.parameters]
    assert names == ["notional", "rate", "agreement_hash"]
    assert request.parameters[-1][2] == ag.agreement_header().agreement_hash.hex


def test_bind_code_requires_signed_status(agreement):
    env, _ = pm.resolve_bindings(agreement.parameter_sets)
    with pytest.raises(SlaError) as exc:
        lc.bind_code(cf.with_agreement_hash(agreement), lc.CodeRef("evm", "1.0"), env)
    assert exc.value.code == "NOT_SIGNED"


def test_dual_integrate_round_trip(agreement):
    ag, code = _signed_with_code(agreement)
    before = cf.hash_agreement(ag)

    done = lc.dual_integrate(ag, code, "0xabc123", actor="ops", timestamp=TS)
    hdr = done.agreement_header()
    assert hdr.doc_status == "code-bound-pending-authorization"
    assert hdr.code_refs[0].instance_id == "0xabc123"
    assert hdr.agreement_hash == cf.hash_agreement(done)
    assert cf.hash_agreement(done) != before

    last = hdr.edit_history[-1]
    assert last.change_kind == "code-bound"
    assert before.hex in last.detail          # prior digest stays recoverable
    assert len(hdr.edit_history) == hdr.version.number - 1


def test_dual_integrate_rejects_repeat_and_unknown_refs(agreement):
    ag, code = _signed_with_code(agreement)
    done = lc.dual_integrate(ag, code, "0xabc", timestamp=TS)
    with pytest.raises(SlaError) as exc:
        lc.dual_integrate(done, code, "0xother", timestamp=TS)
    assert exc.value.code == "ALREADY_INTEGRATED"
    with pytest.raises(SlaError) as exc:
        lc.dual_integrate(ag, lc.CodeRef("solana", "9.9"), "0xabc", timestamp=TS)
    assert exc.value.code == "UNKNOWN_CODE_REF"
