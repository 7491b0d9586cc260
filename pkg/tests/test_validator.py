from datetime import date, datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rxledger import errors
from rxledger.models import (
    DrugRecord,
    MedicationItem,
    PatientRecord,
    Prescription,
    RuleId,
    RxState,
    Severity,
)
from rxledger.validator import (
    check_allergy_conflict,
    check_interaction,
    ensure_overridable,
    transmittable,
    validate_draft,
)
from rxledger.models import Alert, Override


def drug(drug_id, name, pharm_class="", interactions="", children_usage="ok"):
    return DrugRecord(
        drug_id=drug_id, name=name, pharmacological_class=pharm_class,
        interactions=interactions, children_usage=children_usage,
    )


def patient(allergy=frozenset(), dob=date(1990, 4, 1)):
    return PatientRecord(
        pat_id="P1", registered_by="drA", fullname="Test Patient", phone="0",
        dob=dob, address="x", drug_allergy=frozenset(allergy), occupation="",
    )


def item(drug_id, **overrides):
    fields = dict(
        drug_id=drug_id, pat_id="P1", med_id="M1", num=10,
        dosage="500 mg", freq="tds", route="oral", sig="after food",
    )
    fields.update(overrides)
    return MedicationItem(**fields)


def draft(items, created=datetime(2026, 1, 5, tzinfo=timezone.utc)):
    return Prescription(
        rx_id="RX1", pat_id="P1", prescriber_user="drA", state=RxState.DRAFT,
        created_at=created, note_id="N1", items=tuple(items),
    )


AMOX = drug("D1", "Amoxicillin", "penicillin antibiotic", "warfarin; methotrexate")
WARF = drug("D2", "Warfarin", "anticoagulant")
PARA = drug("D3", "Paracetamol", "analgesic")
ARTE = drug("D4", "Artemether/Lumefantrine", "antimalarial")
REGISTRY = {d.drug_id: d for d in (AMOX, WARF, PARA, ARTE)}


# --- R1 allergy ---

def test_r1_class_token_matches_allergy():
    """Hand trace: allergy {penicillin}; amoxicillin class tokens
    {penicillin, antibiotic}; intersection nonempty -> Blocking R1."""
    alerts = validate_draft(draft([item("D1")]), patient({"penicillin"}), [], REGISTRY)
    assert [(a.rule_id, a.severity) for a in alerts] == [(RuleId.R1_ALLERGY, Severity.BLOCKING)]
    assert "penicillin" in alerts[0].message


def test_r1_name_token_matches_allergy():
    alerts = validate_draft(draft([item("D2")]), patient({"warfarin"}), [], REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R1_ALLERGY]


def test_clean_draft_no_alerts():
    assert validate_draft(draft([item("D4")]), patient(), [], REGISTRY) == []


# --- R2 interactions ---

def test_r2_against_active_medication():
    active = [item("D2", med_id="M0")]
    alerts = validate_draft(draft([item("D1")]), patient(), active, REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R2_INTERACTION]
    assert alerts[0].severity is Severity.INTERRUPTIVE
    assert "Warfarin" in alerts[0].message


def test_r2_one_directional_mention_fires_both_ways():
    # warfarin's own interactions text is empty; amoxicillin mentions warfarin
    alerts = validate_draft(draft([item("D2")]), patient(), [item("D1", med_id="M0")], REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R2_INTERACTION]


def test_r2_codrafted_pair_fires_once_on_later_item():
    alerts = validate_draft(draft([item("D1"), item("D2")]), patient(), [], REGISTRY)
    r2 = [a for a in alerts if a.rule_id is RuleId.R2_INTERACTION]
    assert len(r2) == 1
    assert r2[0].alert_id == "R2.1.d0"


# --- R3 duplication ---

def test_r3_same_drug_twice_in_draft():
    alerts = validate_draft(draft([item("D4"), item("D4")]), patient(), [], REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R3_DUPLICATE]
    assert alerts[0].severity is Severity.INTERRUPTIVE


def test_r3_already_active():
    alerts = validate_draft(draft([item("D4")]), patient(), [item("D4", med_id="M0")], REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R3_DUPLICATE]


# --- R4 incomplete sig ---

@pytest.mark.parametrize("missing,override", [
    ("dosage", {"dosage": ""}),
    ("freq", {"freq": ""}),
    ("route", {"route": ""}),
    ("num", {"num": None}),
])
def test_r4_each_missing_field(missing, override):
    alerts = validate_draft(draft([item("D4", **override)]), patient(), [], REGISTRY)
    assert [a.rule_id for a in alerts] == [RuleId.R4_INCOMPLETE]
    assert alerts[0].severity is Severity.BLOCKING
    assert missing in alerts[0].message


# --- R5 pediatric gap ---

def test_r5_child_with_no_children_usage():
    no_peds = drug("D9", "Adultsonly", children_usage="")
    registry = {**REGISTRY, "D9": no_peds}
    child = patient(dob=date(2020, 1, 1))  # age 6 at draft date
    alerts = validate_draft(draft([item("D9")]), child, [], registry)
    assert [(a.rule_id, a.severity) for a in alerts] == [
        (RuleId.R5_PEDIATRIC_GAP, Severity.INFORMATIONAL)
    ]


def test_r5_not_fired_for_adults_or_covered_drugs():
    child = patient(dob=date(2020, 1, 1))
    assert validate_draft(draft([item("D4")]), child, [], REGISTRY) == []  # children_usage on file
    no_peds = drug("D9", "Adultsonly", children_usage="")
    registry = {**REGISTRY, "D9": no_peds}
    assert validate_draft(draft([item("D9")]), patient(), [], registry) == []


def test_r5_age_boundary_uses_draft_date():
    no_peds = drug("D9", "Adultsonly", children_usage="")
    registry = {**REGISTRY, "D9": no_peds}
    twelve = patient(dob=date(2014, 1, 5))  # turns 12 exactly on the draft date
    assert validate_draft(draft([item("D9")]), twelve, [], registry) == []
    eleven = patient(dob=date(2014, 1, 6))  # still 11 on the draft date
    alerts = validate_draft(draft([item("D9")]), eleven, [], registry)
    assert [a.rule_id for a in alerts] == [RuleId.R5_PEDIATRIC_GAP]


# --- combinations / purity ---

def test_unknown_drug_rejected():
    with pytest.raises(errors.UnknownDrug):
        validate_draft(draft([item("D404")]), patient(), [], REGISTRY)


def test_alert_list_is_deterministic():
    d = draft([item("D1", dosage=""), item("D2")])
    p = patient({"penicillin"})
    active = [item("D2", med_id="M0")]
    first = validate_draft(d, p, active, REGISTRY)
    second = validate_draft(d, p, active, REGISTRY)
    assert first == second
    assert [a.alert_id for a in first] == [a.alert_id for a in second]


def test_multiple_rules_in_item_order():
    d = draft([item("D1", dosage=""), item("D2")])
    alerts = validate_draft(d, patient({"penicillin"}), [], REGISTRY)
    assert [a.alert_id for a in alerts] == ["R1.0", "R4.0", "R2.1.d0"]


@given(st.frozensets(st.sampled_from(["penicillin", "sulfa", "warfarin", "dust"]), max_size=4))
def test_adding_allergy_terms_never_removes_r1(extra):
    base = frozenset({"penicillin"})
    base_alerts = validate_draft(draft([item("D1")]), patient(base), [], REGISTRY)
    wider_alerts = validate_draft(draft([item("D1")]), patient(base | extra), [], REGISTRY)
    base_r1 = {a.alert_id for a in base_alerts if a.rule_id is RuleId.R1_ALLERGY}
    wider_r1 = {a.alert_id for a in wider_alerts if a.rule_id is RuleId.R1_ALLERGY}
    assert base_r1 <= wider_r1


# --- pure checks ---

def test_check_allergy_direct_token_hit():
    assert check_allergy_conflict(AMOX, frozenset({"penicillin"}))


def test_check_allergy_empty_set_never_fires():
    for d in REGISTRY.values():
        assert not check_allergy_conflict(d, frozenset())


def test_check_allergy_disjoint_tokens():
    assert not check_allergy_conflict(PARA, frozenset({"sulfa"}))


def test_check_interaction_name_mention():
    assert check_interaction(AMOX, WARF)
    assert check_interaction(WARF, AMOX)


def test_check_interaction_empty_fields():
    assert not check_interaction(PARA, ARTE)


_drug_strategy = st.builds(
    drug,
    drug_id=st.sampled_from(["DA", "DB"]),
    name=st.sampled_from(["Alpha", "Beta", "Gamma Forte"]),
    pharm_class=st.sampled_from(["", "class one", "beta blocker"]),
    interactions=st.sampled_from(["", "alpha", "beta; gamma", "unrelated"]),
)


@given(_drug_strategy, _drug_strategy)
def test_check_interaction_symmetric(a, b):
    assert check_interaction(a, b) == check_interaction(b, a)


# --- transmittable / overrides ---

def _alert(rule, severity, override=None):
    return Alert(alert_id="A1", rule_id=rule, severity=severity, message="m", override=override)


def test_transmittable_logic():
    ov = Override("reason", "drA", datetime(2026, 1, 1, tzinfo=timezone.utc))
    assert transmittable([])
    assert transmittable([_alert(RuleId.R5_PEDIATRIC_GAP, Severity.INFORMATIONAL)])
    assert not transmittable([_alert(RuleId.R1_ALLERGY, Severity.BLOCKING)])
    assert not transmittable([_alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE)])
    assert transmittable([_alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE, ov)])
    assert not transmittable([
        _alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE, ov),
        _alert(RuleId.R1_ALLERGY, Severity.BLOCKING),
    ])


def test_ensure_overridable_rules():
    ov = Override("reason", "drA", datetime(2026, 1, 1, tzinfo=timezone.utc))
    with pytest.raises(errors.CannotOverrideBlocking):
        ensure_overridable(_alert(RuleId.R1_ALLERGY, Severity.BLOCKING), "reason")
    with pytest.raises(errors.OverrideNotRequired):
        ensure_overridable(_alert(RuleId.R5_PEDIATRIC_GAP, Severity.INFORMATIONAL), "reason")
    with pytest.raises(errors.EmptyReason):
        ensure_overridable(_alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE), "   ")
    with pytest.raises(errors.AlreadyOverridden):
        ensure_overridable(_alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE, ov), "again")
    ensure_overridable(_alert(RuleId.R2_INTERACTION, Severity.INTERRUPTIVE), "monitored co-therapy")
