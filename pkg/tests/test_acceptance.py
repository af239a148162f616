"""Whole-system checks at scale.

One test per guarantee the package is sold on.  Sizes and wall-clock
budgets are part of each assertion; random inputs come from seeded
generators so any failure reproduces exactly.
"""

from __future__ import annotations

import itertools
import json
import random
import subprocess
import sys
import time
from dataclasses import replace
from decimal import Decimal
from pathlib import Path

import pytest

from slakit import canonical as cf
from slakit import crossrefs as xr
from slakit import lifecycle as lc
from slakit import model as md
from slakit import params as pm
from slakit import prose as pr
from slakit.diagnostics import SlaError

import gen
from binding_oracle import norm_value, oracle_resolve
from conftest import MASTER_ID, SCHED_ID, TS, build_agreement

CORPUS = Path(__file__).parent / "corpus"

# Digest of corpus/golden.sla.json, computed away from this library: the
# excluded header fields were stripped with the stdlib json module and the
# re-dumped bytes piped through sha256sum.
GOLDEN_DIGEST = "sha-256:f1cba2ea45a8f54eefa2493a345334203c0e626c5f2ce6005297b9bea0714e0c"


def test_round_trip_at_scale():
    start = time.perf_counter()
    for seed in range(700):
        doc, _ = gen.gen_document(random.Random(seed), f"d{seed}", max_nodes=18)
        assert cf.parse(cf.serialize(doc)) == cf.canonicalize(doc), seed
    for seed in range(300):
        ag = gen.gen_agreement(random.Random(10_000 + seed))
        assert cf.parse(cf.serialize(ag)) == cf.canonicalize(ag), seed
    assert time.perf_counter() - start < 10.0


def test_digest_ignores_markup_nesting_and_collection_order():
    start = time.perf_counter()

    # every way of stacking three marks onto one run of text
    marks = (pr.bold(), pr.italic(), pr.underline())
    forms = []
    for perm in itertools.permutations(marks):
        for cuts in ((3,), (2, 1), (1, 2), (1, 1, 1)):
            groups, i = [], 0
            for width in cuts:
                groups.append(perm[i:i + width])
                i += width
            node = pr.Text("The governing text.")
            for group in reversed(groups):
                node = pr.MarkedSpan(tuple(group), (node,))
            forms.append(pr.ProseDocument(pr.local_id("m"), (node,)))
    digests = {cf.hash_document(f).hex for f in forms}
    blobs = {cf.serialize(f) for f in forms}
    assert len(forms) == 24 and len(digests) == 1 and len(blobs) == 1

    # element order inside an agreement's collections
    base = build_agreement()
    want = cf.serialize(base)
    for docs in itertools.permutations(base.documents):
        for headers in itertools.permutations(base.headers):
            for sets in itertools.permutations(base.parameter_sets):
                shuffled = replace(
                    base,
                    documents=docs,
                    headers=headers,
                    parameter_sets=tuple(
                        pm.ParameterSet(s.owner, tuple(reversed(s.entries))) for s in sets
                    ),
                )
                assert cf.serialize(shuffled) == want
                assert cf.hash_agreement(shuffled).render() == cf.hash_agreement(base).render()
    assert time.perf_counter() - start < 5.0


def test_any_byte_flip_breaks_verification():
    start = time.perf_counter()
    data = (CORPUS / "golden.sla.json").read_bytes()
    ok, _ = cf.verify(data, GOLDEN_DIGEST)
    assert ok
    rng = random.Random(0xC0FFEE)
    for _ in range(100):
        pos = rng.randrange(len(data))
        flip = bytes([data[pos] ^ rng.randint(1, 255)])
        mutated = data[:pos] + flip + data[pos + 1:]
        ok, message = cf.verify(mutated, GOLDEN_DIGEST)
        assert not ok, f"flip at byte {pos} went unnoticed: {message}"
    assert time.perf_counter() - start < 5.0


def test_binding_resolution_matches_reference_model_at_scale():
    start = time.perf_counter()
    for seed in range(1_000, 1_500):
        sets = gen.gen_binding_case(random.Random(seed))
        env, report = pm.resolve_bindings(sets)
        want_bindings, want_codes = oracle_resolve(sets)
        assert {d.locator: d.code for d in report.diagnostics} == want_codes, seed
        assert set(env.bindings) == set(want_bindings), seed
        for node, got in env.bindings.items():
            value, provenance = want_bindings[node]
            assert norm_value(got.value) == norm_value(value), seed
            assert got.provenance == provenance, seed
    assert time.perf_counter() - start < 10.0


def test_references_survive_target_document_edits():
    start = time.perf_counter()
    for seed in range(200):
        rng = random.Random(seed)
        for _ in range(10):
            src_doc, _ = gen.gen_document(rng, "src", max_nodes=12)
            tgt_doc, _ = gen.gen_document(rng, "tgt", max_nodes=12)
            source = gen._pick_source(rng, src_doc)
            if source is None:
                continue
            spans = gen._span_paths(tgt_doc)
            if rng.random() < 0.5 and spans:
                target = xr.SegmentTarget(tgt_doc.id, rng.choice(spans))
            else:
                tgt_doc = pr.ProseDocument(tgt_doc.id, tgt_doc.root + (pr.Anchor(f"t{seed}"),))
                target = xr.AnchorTarget(tgt_doc.id, f"t{seed}")
            ag = md.SmartLegalAgreement(
                (src_doc, tgt_doc),
                (),
                (md.AgreementHeader(
                    identifiers=(pr.DocumentId("global", f"{seed:064x}"),),
                    version=lc.initial_version(TS),
                ),),
            )
            try:
                ag, xid = xr.add_crossref(ag, source, target)
                break
            except SlaError:
                continue
        else:
            pytest.fail(f"could not build a reference fixture for seed {seed}")

        before = cf.hash_document(ag.document(src_doc.id))
        idx = rng.randrange(len(ag.document(tgt_doc.id).root) + 1)

        def insert(doc, idx=idx, seed=seed):
            grown = doc.root[:idx] + (pr.Text(f"ins{seed}. "),) + doc.root[idx:]
            return pr.ProseDocument(doc.id, grown)

        out, report = xr.edit_preserving_sources(ag, tgt_doc.id, insert)
        assert report.ok, (seed, sorted(report.codes()))
        loc = xr.navigate(out, xid, "to-target")
        node = pr.resolve_path(out.document(tgt_doc.id), loc.path)
        if isinstance(target, xr.AnchorTarget):
            assert isinstance(node, pr.Anchor) and node.anchor_id == f"t{seed}", seed
        else:
            assert isinstance(node, pr.MarkedSpan), seed
            assert any(getattr(m, "kind", None) == "xref-target" for m in node.marks), seed
        assert cf.hash_document(out.document(src_doc.id)) == before, seed
    assert time.perf_counter() - start < 10.0


def test_redaction_never_leaks_and_is_idempotent():
    start = time.perf_counter()
    for seed in range(200):
        rng = random.Random(seed)
        doc, _ = gen.gen_document(rng, f"r{seed}", max_nodes=14)
        token = f"zq{seed}secret"
        body = list(doc.root)
        body.insert(
            rng.randrange(len(body) + 1),
            pr.MarkedSpan((pr.to_be_redacted(),), (pr.Text(token),)),
        )
        doc = pr.ProseDocument(doc.id, tuple(body))

        redacted, report = pr.redact(doc)
        assert report.spans_redacted >= 1, seed
        assert token.encode() not in cf.serialize(redacted), seed
        again, second = pr.redact(redacted)
        assert second.spans_redacted == 0 and second.bytes_removed == 0, seed
        assert cf.serialize(again) == cf.serialize(redacted), seed
    assert time.perf_counter() - start < 5.0


def test_corrupt_corpus_yields_expected_diagnostics():
    manifest = json.loads((CORPUS / "manifest.json").read_text())
    golden = (CORPUS / manifest["golden"]).read_bytes()
    agreement = cf.parse(golden)
    assert md.validate_agreement(agreement).ok
    assert cf.hash_agreement(agreement).render() == GOLDEN_DIGEST == manifest["golden_digest"]

    corrupt = manifest["corrupt"]
    assert len(corrupt) == 20
    for name, expected in sorted(corrupt.items()):
        data = (CORPUS / name).read_bytes()
        if expected["channel"] == "parse":
            with pytest.raises(SlaError) as exc:
                cf.parse(data)
            assert exc.value.code == expected["code"], name
        else:
            report = md.validate_agreement(cf.parse(data))
            assert expected["code"] in report.codes(), (name, sorted(report.codes()))


def test_master_schedule_confirmation_lifecycle():
    ag = build_agreement()
    master_header = ag.header_for(MASTER_ID)
    conf_doc, conf_header, grown_master = lc.derive_document(
        ag.document(MASTER_ID), master_header, "confirmation",
        child_id=pr.local_id("conf-1"), timestamp=TS,
    )
    ag = ag.with_header_replaced(master_header, grown_master)
    ag = replace(
        ag, documents=ag.documents + (conf_doc,), headers=ag.headers + (conf_header,)
    )
    assert md.validate_agreement(ag).ok
    assert conf_header.parent_ids == (MASTER_ID,)
    assert conf_doc.id in ag.header_for(MASTER_ID).child_ids

    # the master's rate comes out of the schedule
    env, report = pm.resolve_bindings(ag.parameter_sets)
    assert report.ok
    binding = env.bindings[(MASTER_ID, "rate")]
    assert binding.value == Decimal("4.5")
    assert binding.provenance == SCHED_ID

    h0 = ag.agreement_header()
    h = h0
    for status in ("parameters-identified", "agreed-with-counterparties", "signed"):
        h = lc.set_status(h, status, actor="ops", timestamp=TS)
    h = replace(h, code_refs=(lc.CodeRef("evm", "1.2.0"),))
    signed = cf.with_agreement_hash(ag.with_header_replaced(h0, h))

    request = lc.bind_code(signed, lc.CodeRef("evm", "1.2.0"), env)
    names = [name for name, _, _ in request.parameters]
    assert names == ["notional", "rate", "agreement_hash"]
    assert request.parameters[-1][2] == signed.agreement_header().agreement_hash.hex

    before = cf.hash_agreement(signed)
    done = lc.dual_integrate(signed, lc.CodeRef("evm", "1.2.0"), "0x1", timestamp=TS)
    header = done.agreement_header()
    assert header.doc_status == "code-bound-pending-authorization"
    assert header.code_refs[0].instance_id == "0x1"
    assert cf.hash_agreement(done) != before
    last = header.edit_history[-1]
    assert last.change_kind == "code-bound" and before.hex in last.detail


def test_derivation_links_stay_symmetric():
    types = ("confirmation", "amendment", "annex")
    for seed in range(100):
        rng = random.Random(seed)
        ag = build_agreement()
        roots = tuple(d.id for d in ag.documents)
        for step in range(1 + seed % 3):
            parent = rng.choice(ag.documents)
            parent_header = ag.header_for(parent.id)
            cid = pr.local_id(f"c{seed}s{step}")
            child_doc, child_header, updated_parent = lc.derive_document(
                parent, parent_header, rng.choice(types), child_id=cid, timestamp=TS
            )
            assert child_doc.root == parent.root, seed
            assert child_header.parent_ids == (parent.id,), seed
            assert cid in updated_parent.child_ids, seed
            ag = ag.with_header_replaced(parent_header, updated_parent)
            ag = replace(
                ag,
                documents=ag.documents + (child_doc,),
                headers=ag.headers + (child_header,),
            )
        for root_id in roots:
            assert ag.header_for(root_id).parent_ids == (), seed
        assert md.validate_agreement(ag).ok, seed


def run_cli(*args: str, stdin: bytes | None = None) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "slakit.cli", *args], capture_output=True, input=stdin
    )


def test_cli_pipeline_and_exit_codes_on_corpus(tmp_path):
    golden = CORPUS / "golden.sla.json"
    assert run_cli("validate", str(golden)).returncode == 0

    direct = run_cli("hash", str(golden))
    assert direct.stdout.decode().strip() == GOLDEN_DIGEST
    canon = run_cli("canonicalize", str(golden))
    assert run_cli("hash", "-", stdin=canon.stdout).stdout == direct.stdout

    check = run_cli("verify", str(golden), "--expect", GOLDEN_DIGEST)
    assert check.returncode == 0 and check.stdout == b"OK\n"

    manifest = json.loads((CORPUS / "manifest.json").read_text())
    for name, expected in sorted(manifest["corrupt"].items()):
        r = run_cli("validate", str(CORPUS / name))
        assert r.returncode == 1, name
        assert expected["code"].encode() in r.stderr, (name, r.stderr)

    assert run_cli("validate", str(tmp_path / "no-such.sla.json")).returncode == 2
