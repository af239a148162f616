"""Canonical bytes: one logical value, one byte string, one digest."""

from __future__ import annotations

import random
from dataclasses import replace
from datetime import date
from decimal import Decimal

import pytest

from slakit import canonical as cf
from slakit import lifecycle as lc
from slakit import model as md
from slakit import params as pm
from slakit import prose as pr
from slakit.diagnostics import ParseError, SlaError

from conftest import TS, MASTER_ID, build_agreement, build_master, mk_doc
from gen import gen_agreement, scramble_agreement


# --- emission ---------------------------------------------------------------------


def test_empty_values_have_fixed_bytes():
    assert cf.serialize(md.SmartLegalAgreement()) == (
        b'{"documents":[],"headers":[],"parameter_sets":[]}'
    )
    assert cf.serialize(md.SmartContract()) == (
        b'{"agreements":[],"code_refs":[],"format":"sla/1"}'
    )


def test_emit_orders_keys_and_escapes_strings():
    assert cf.emit({"b": 1, "a": [True, False]}) == b'{"a":[true,false],"b":1}'
    assert cf.emit({"t": 'say "hi"\n'}) == b'{"t":"say \\"hi\\"\\n"}'
    # non-ASCII stays raw UTF-8, no \u escapes
    assert cf.emit("Café") == '"Café"'.encode("utf-8")


def test_emit_preserves_decimal_scale():
    assert cf.emit(Decimal("4.50")) == b"4.50"
    assert cf.emit(Decimal("100")) == b"100"
    assert cf.emit(7) == b"7"


def test_emit_rejects_foreign_objects():
    with pytest.raises(SlaError) as exc:
        cf.emit(object())
    assert exc.value.code == "INVALID_MODEL"


def test_serialize_ends_without_trailing_newline(agreement):
    data = cf.serialize(agreement)
    assert not data.endswith(b"\n")
    assert data.startswith(b"{")


# --- round trips --------------------------------------------------------------------


def test_agreement_fixpoint(agreement):
    data = cf.serialize(agreement)
    back = cf.parse(data)
    assert cf.serialize(back) == data
    assert back == cf.canonicalize(agreement)


def test_contract_fixpoint(agreement):
    ct = md.SmartContract((agreement,), (lc.CodeRef("evm", "1.0.0"),))
    data = cf.serialize(ct)
    back = cf.parse(data)
    assert isinstance(back, md.SmartContract)
    assert cf.serialize(back) == data


def test_document_fixpoint(master):
    data = cf.serialize(master)
    back = cf.parse(data)
    assert isinstance(back, pr.ProseDocument)
    assert cf.serialize(back) == data


def test_random_agreements_round_trip():
    for seed in range(30):
        ag = gen_agreement(random.Random(seed))
        data = cf.serialize(ag)
        assert cf.serialize(cf.parse(data)) == data, seed


# --- canonical form -------------------------------------------------------------------


def test_text_runs_merge_and_normalize():
    # split text + a decomposed accent; canonical form is one NFC text node
    a = mk_doc("n", (
        pr.MarkedSpan((pr.bold(),), (pr.Text("Cafe"), pr.Text("́"))),
    ))
    b = mk_doc("n", (pr.MarkedSpan((pr.bold(),), (pr.Text("Café"),)),))
    assert cf.canonicalize(a) == cf.canonicalize(b)
    assert cf.serialize(a) == cf.serialize(b)


def test_empty_text_nodes_vanish():
    a = mk_doc("n", (pr.MarkedSpan((pr.bold(),), (pr.Text(""), pr.Text("x"))),))
    b = mk_doc("n", (pr.MarkedSpan((pr.bold(),), (pr.Text("x"),)),))
    assert cf.canonicalize(a) == cf.canonicalize(b)


def test_single_child_chains_flatten():
    nested = mk_doc("n", (
        pr.MarkedSpan((pr.bold(),), (pr.MarkedSpan((pr.italic(),), (pr.Text("x"),)),)),
    ))
    flat = mk_doc("n", (pr.MarkedSpan((pr.italic(), pr.bold()), (pr.Text("x"),)),))
    assert cf.serialize(nested) == cf.serialize(flat)


def test_marks_sort_and_dedupe_on_flatten():
    doc = mk_doc("n", (
        pr.MarkedSpan((pr.bold(),), (pr.MarkedSpan((pr.bold(),), (pr.Text("x"),)),)),
    ))
    enc = cf.encode_value(cf.canonicalize(doc))
    assert enc["root"][0]["span"]["marks"] == [{"style": "bold"}]


def test_collided_marks_merge_attrs_outer_wins():
    doc = mk_doc("n", (
        pr.MarkedSpan(
            (pr.parameter_markup("rate", {"type": "decimal"}),),
            (pr.MarkedSpan(
                (pr.parameter_markup("rate", {"type": "integer", "status": "bound"}),),
                (pr.Text("4"),),
            ),),
        ),
    ))
    enc = cf.encode_value(cf.canonicalize(doc))
    (mark,) = enc["root"][0]["span"]["marks"]
    assert mark == {
        "kind": "parameter", "param": "rate",
        "attrs": {"type": "decimal", "status": "bound"},
    }


def test_canonicalize_idempotent_on_random_inputs():
    for seed in range(20):
        ag = gen_agreement(random.Random(seed))
        c1 = cf.canonicalize(ag)
        assert cf.canonicalize(c1) == c1, seed


def test_collection_order_is_immaterial(agreement):
    docs, sets, headers = agreement.documents, agreement.parameter_sets, agreement.headers
    shuffled = md.SmartLegalAgreement(docs[::-1], sets[::-1], headers[::-1])
    assert cf.serialize(shuffled) == cf.serialize(agreement)
    assert shuffled == agreement


def test_scrambled_equivalents_share_bytes_and_digest():
    for seed in range(20):
        ag = gen_agreement(random.Random(seed))
        other = scramble_agreement(random.Random(seed + 10_000), ag)
        assert cf.serialize(other) == cf.serialize(ag), seed
        assert cf.hash_agreement(other) == cf.hash_agreement(ag), seed


def test_canonicalize_refuses_invalid_structure():
    doc = mk_doc("d", (pr.Anchor("a"), pr.Anchor("a")))
    with pytest.raises(SlaError) as exc:
        cf.canonicalize(doc)
    assert exc.value.code == "INVALID_MODEL"
    assert any("DUPLICATE_ANCHOR" in line for line in exc.value.details)


# --- digests: what they cover and what they ignore -------------------------------------


def test_storing_the_digest_does_not_change_it(agreement):
    h0 = cf.hash_agreement(agreement)
    stored = cf.with_agreement_hash(agreement)
    assert stored.agreement_header().agreement_hash == h0
    assert cf.hash_agreement(stored) == h0


def test_with_agreement_hash_needs_a_header():
    ag = md.SmartLegalAgreement((build_master(),), (), ())
    with pytest.raises(SlaError) as exc:
        cf.with_agreement_hash(ag)
    assert exc.value.code == "HEADER_MISSING"


def test_recording_an_edit_changes_the_digest(agreement):
    h0 = cf.hash_agreement(agreement)
    hdr = agreement.agreement_header()
    edited = lc.record_edit(hdr, "edited", "tweak", actor="alice", timestamp=TS)
    out = agreement.with_header_replaced(hdr, edited)
    assert cf.hash_agreement(out) != h0


def test_history_content_is_not_covered(agreement):
    hdr = agreement.agreement_header()
    a = agreement.with_header_replaced(
        hdr, lc.record_edit(hdr, "edited", "one wording", actor="alice", timestamp=TS)
    )
    b = agreement.with_header_replaced(
        hdr, lc.record_edit(hdr, "edited", "another wording", actor="bob", timestamp=TS)
    )
    assert cf.serialize(a) != cf.serialize(b)
    assert cf.hash_agreement(a) == cf.hash_agreement(b)


def test_branch_flag_is_not_covered(agreement):
    hdr = agreement.agreement_header()
    twin = agreement.with_header_replaced(
        hdr, replace(hdr, version=replace(hdr.version, branch="transmitted"))
    )
    assert cf.hash_agreement(twin) == cf.hash_agreement(agreement)


def test_version_number_and_timestamp_are_covered(agreement):
    hdr = agreement.agreement_header()
    bumped = agreement.with_header_replaced(
        hdr, replace(hdr, version=replace(hdr.version, number=7))
    )
    assert cf.hash_agreement(bumped) != cf.hash_agreement(agreement)
    shifted = agreement.with_header_replaced(
        hdr, replace(hdr, version=replace(hdr.version, timestamp=lc.parse_timestamp("2031-01-01T00:00:00Z")))
    )
    assert cf.hash_agreement(shifted) != cf.hash_agreement(agreement)


def test_status_changes_are_covered(agreement):
    hdr = agreement.agreement_header()
    moved = lc.set_status(hdr, "parameters-identified", actor="ops", timestamp=TS)
    out = agreement.with_header_replaced(hdr, moved)
    assert cf.hash_agreement(out) != cf.hash_agreement(agreement)


def test_signatures_are_covered(agreement):
    hdr = agreement.agreement_header()
    signed = agreement.with_header_replaced(
        hdr, replace(hdr, signatures=(md.SignatureRecord("alice", TS, "sig"),))
    )
    assert cf.hash_agreement(signed) != cf.hash_agreement(agreement)


def test_sensitive_records_fall_out_of_the_digest():
    doc = mk_doc("sd", (
        pr.MarkedSpan((pr.other_data_markup("account"),), (pr.Text("12-34-56"),)),
    ))
    ag = md.SmartLegalAgreement((doc,), (), (md.AgreementHeader(version=lc.initial_version(TS)),))
    ag = pm.register_other_data(ag, doc.id, (0,), "account")
    hdr = ag.agreement_header()
    (record,) = hdr.other_data

    marked = ag.with_header_replaced(hdr, replace(hdr, other_data=(replace(record, sensitive=True),)))
    dropped = ag.with_header_replaced(hdr, replace(hdr, other_data=()))
    assert cf.hash_agreement(marked) == cf.hash_agreement(dropped)
    assert cf.hash_agreement(marked) != cf.hash_agreement(ag)


def test_exported_copy_keeps_the_digest(agreement):
    hdr = agreement.agreement_header()
    ag = agreement.with_header_replaced(
        hdr, lc.record_edit(hdr, "edited", "pre-export", actor="alice", timestamp=TS)
    )
    exported = lc.export_transmission(ag)
    received = cf.parse(exported)
    assert cf.hash_agreement(received) == cf.hash_agreement(ag)


# --- clause and document digests ----------------------------------------------------


def test_hash_clause_ignores_position(master):
    h = cf.hash_clause(master, (1,))
    shifted = pr.ProseDocument(master.id, (pr.Text("preamble "),) + master.root)
    assert cf.hash_clause(shifted, (2,)) == h


def test_hash_clause_requires_clause_markup(master):
    with pytest.raises(SlaError) as exc:
        cf.hash_clause(master, (0,))
    assert exc.value.code == "NOT_A_CLAUSE"


def test_hash_document_tracks_content(master):
    h = cf.hash_document(master)
    other = pr.ProseDocument(master.id, master.root + (pr.Text("more"),))
    assert cf.hash_document(other) != h
    assert h.algorithm == "sha-256" and len(h.hex) == 64


def test_single_agreement_contract_hashes_like_the_agreement(agreement):
    ct = md.SmartContract((agreement,))
    assert cf.hash_contract(ct) != cf.hash_agreement(agreement)   # different wrapper
    ok, msg = cf.verify(cf.serialize(ct), cf.hash_agreement(agreement))
    assert ok, msg


# --- verify -----------------------------------------------------------------------


def test_verify_accepts_digest_objects_and_strings(agreement):
    data = cf.serialize(agreement)
    h = cf.hash_agreement(agreement)
    assert cf.verify(data, h) == (True, "OK")
    assert cf.verify(data, f"sha-256:{h.hex}") == (True, "OK")
    assert cf.verify(data, h.hex) == (True, "OK")


def test_verify_reports_mismatch(agreement):
    ok, msg = cf.verify(cf.serialize(agreement), "sha-256:" + "0" * 64)
    assert not ok and msg.startswith("DIGEST_MISMATCH")


def test_verify_reports_malformed_input(agreement):
    ok, msg = cf.verify(b"{not json", cf.hash_agreement(agreement))
    assert not ok and msg.startswith("MALFORMED_SYNTAX")


def test_verify_rejects_bad_expected_format(agreement):
    ok, msg = cf.verify(cf.serialize(agreement), "zz")
    assert not ok and msg.startswith("BAD_DIGEST_FORMAT")
    ok, msg = cf.verify(cf.serialize(agreement), "md5:" + "0" * 32)
    assert not ok and msg.startswith("BAD_DIGEST_FORMAT")


# --- parsing ------------------------------------------------------------------------


@pytest.mark.parametrize("raw, code", [
    (b"\xff\xfe", "MALFORMED_SYNTAX"),
    (b"{not json", "MALFORMED_SYNTAX"),
    (b"[1,2]", "SCHEMA_VIOLATION"),
    (b"{}", "SCHEMA_VIOLATION"),
    (b'{"format":"sla/2"}', "SCHEMA_VIOLATION"),
    (b'{"documents":[],"bogus":1}', "SCHEMA_VIOLATION"),
    (b'{"id":{"scope":"local","value":"d"},"root":[{"wat":1}]}', "SCHEMA_VIOLATION"),
    (b'{"id":{"scope":"local","value":"d"},"root":[{"span":{"children":[{"text":"x"}],"marks":[{"style":"blink"}]}}]}',
     "UNKNOWN_MARKUP_KIND"),
    (b'{"id":{"scope":"local","value":"d"},"root":[{"span":{"children":[{"text":"x"}],"marks":[]}}]}',
     "SCHEMA_VIOLATION"),
])
def test_parse_error_taxonomy(raw, code):
    with pytest.raises(SlaError) as exc:
        cf.parse(raw)
    assert exc.value.code == code


def test_parse_errors_carry_offsets():
    with pytest.raises(ParseError) as exc:
        cf.parse(b'{"documents": !}')
    assert exc.value.code == "MALFORMED_SYNTAX"
    assert exc.value.offset == 14


def test_parse_accepts_text_input(agreement):
    data = cf.serialize(agreement).decode("utf-8")
    assert cf.parse(data) == cf.canonicalize(agreement)


def test_parse_fills_header_defaults():
    ag = cf.parse(b'{"documents":[],"headers":[{}],"parameter_sets":[]}')
    hdr = ag.agreement_header()
    assert hdr.level == "agreement"
    assert hdr.doc_status == "draft"
    assert hdr.version.number == 1 and hdr.version.branch == "local"


def test_parse_validates_choice_values():
    cases = [
        (b'{"documents":[],"headers":[{"version":{"number":0,"timestamp":"2026-01-01T00:00:00.000000Z","branch":"local"}}],"parameter_sets":[]}'),
        (b'{"documents":[],"headers":[{"version":{"number":1,"timestamp":"2026-01-01T00:00:00.000000Z","branch":"remote"}}],"parameter_sets":[]}'),
        (b'{"parameter_sets":[{"owner":"@agreement","entries":[{"name":"x","status":"pending","type":"text"}]}]}'),
    ]
    for raw in cases:
        with pytest.raises(SlaError) as exc:
            cf.parse(raw)
        assert exc.value.code == "SCHEMA_VIOLATION", raw


def test_unknown_doc_status_parses_but_cannot_transition():
    # the status vocabulary is a lifecycle concern, not a shape concern
    ag = cf.parse(b'{"documents":[],"headers":[{"doc_status":"finished"}],"parameter_sets":[]}')
    hdr = ag.agreement_header()
    assert hdr.doc_status == "finished"
    with pytest.raises(SlaError) as exc:
        lc.set_status(hdr, "signed", actor="x", timestamp=TS)
    assert exc.value.code == "ILLEGAL_TRANSITION"


def test_parsed_date_values_coerce_when_well_formed():
    good = cf.parse(
        b'{"parameter_sets":[{"owner":"@agreement","entries":'
        b'[{"name":"d","status":"bound","type":"date","value":"2017-02-28"}]}]}'
    )
    assert good.parameter_sets[0].entries[0].value == date(2017, 2, 28)

    # an impossible date stays text so the type checker can flag it
    bad = cf.parse(
        b'{"parameter_sets":[{"owner":"@agreement","entries":'
        b'[{"name":"d","status":"bound","type":"date","value":"2017-02-30"}]}]}'
    )
    entry = bad.parameter_sets[0].entries[0]
    assert isinstance(entry.value, str)
    assert "VALUE_TYPE_MISMATCH" in pm.typecheck_parameter(entry).codes()


def test_parsed_decimals_keep_scale():
    ag = cf.parse(
        b'{"parameter_sets":[{"owner":"@agreement","entries":'
        b'[{"name":"r","status":"bound","type":"decimal","value":4.50}]}]}'
    )
    value = ag.parameter_sets[0].entries[0].value
    assert value == Decimal("4.50") and str(value) == "4.50"
    assert b'"value":4.50' in cf.serialize(ag)


def test_parse_serialize_is_the_identity_on_canonical_bytes():
    for seed in range(10):
        data = cf.serialize(gen_agreement(random.Random(seed)))
        assert cf.serialize(cf.parse(data)) == data
