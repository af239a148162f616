"""Shared builders: a small master/schedule agreement most suites reuse."""

from __future__ import annotations

from datetime import date, datetime, timezone
from decimal import Decimal

import pytest

from slakit import lifecycle as lc
from slakit import model as md
from slakit import params as pm
from slakit import prose as pr

TS = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

MASTER_ID = pr.local_id("master")
SCHED_ID = pr.local_id("schedule")


def mk_doc(value: str, body: tuple) -> pr.ProseDocument:
    return pr.ProseDocument(pr.local_id(value), body)


def build_master() -> pr.ProseDocument:
    return pr.ProseDocument(
        MASTER_ID,
        (
            pr.PartBoundary("body", "Terms"),
            pr.MarkedSpan(
                (pr.clause(), pr.bold()),
                (
                    pr.Text("The rate is "),
                    pr.MarkedSpan((pr.parameter_markup("rate"),), (pr.Text("4.5"),)),
                    pr.Text(" percent."),
                ),
            ),
            pr.Anchor("a1"),
            pr.TableBlock(1, "Key dates", (
                pr.TableRow((
                    pr.TableCell((pr.Text("Start"),)),
                    pr.TableCell((pr.Text("2026-03-01"),)),
                )),
                pr.TableRow((
                    pr.TableCell((pr.Text("End"),)),
                    pr.TableCell((pr.Text("2027-03-01"),)),
                )),
            )),
            pr.ListBlock("numbered", (
                pr.ListItem((pr.Text("first"),)),
                pr.ListItem((pr.Text("second"),)),
            )),
            pr.ChoiceBlock("law", (
                pr.ChoiceOption((pr.Text("English law"),)),
                pr.ChoiceOption((pr.Text("NY law"),)),
            )),
        ),
    )


def build_agreement() -> md.SmartLegalAgreement:
    master = build_master()
    sched = pr.ProseDocument(
        SCHED_ID,
        (pr.MarkedSpan((pr.clause(),), (pr.Text("Schedule body."),)),),
    )
    headers = (
        md.AgreementHeader(
            identifiers=(pr.DocumentId("global", "0" * 64),),
            dates={"agreement": date(2026, 3, 1)},
            doc_type="master",
            version=lc.initial_version(TS),
        ),
        md.AgreementHeader(
            level="document", identifiers=(MASTER_ID,), doc_type="master",
            version=lc.initial_version(TS),
        ),
        md.AgreementHeader(
            level="document", identifiers=(SCHED_ID,), doc_type="schedule",
            version=lc.initial_version(TS),
        ),
    )
    sets = (
        pm.ParameterSet(MASTER_ID, (
            pm.located("rate", SCHED_ID, type_tag=pm.DECIMAL),
            pm.bound("notional", pm.INTEGER, 1000000, execution="true"),
        )),
        pm.ParameterSet(SCHED_ID, (
            pm.bound("rate", pm.DECIMAL, Decimal("4.5"), execution="true"),
        )),
    )
    return md.SmartLegalAgreement((master, sched), sets, headers)


@pytest.fixture
def agreement() -> md.SmartLegalAgreement:
    return build_agreement()


@pytest.fixture
def master() -> pr.ProseDocument:
    return build_master()
