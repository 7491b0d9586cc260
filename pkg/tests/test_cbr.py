import random
from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rxledger import errors
from rxledger.cbr import age_band, band_affinity, encode_case, similarity
from rxledger.models import (
    AgeBand,
    Case,
    CaseQuery,
    ConsultationNote,
    MedicationItem,
    PatientRecord,
    SigBundle,
)
from rxledger.terms import normalize_terms
from rxledger.validator import check_allergy_conflict


# --- age banding ---

@pytest.mark.parametrize("dob,on,expected", [
    (date(2026, 3, 1), date(2026, 3, 1), AgeBand.INFANT),   # age 0
    (date(2024, 3, 1), date(2026, 2, 28), AgeBand.INFANT),  # 1: birthday not reached
    (date(2024, 3, 1), date(2026, 3, 1), AgeBand.CHILD),    # exactly 2
    (date(2014, 6, 1), date(2026, 5, 31), AgeBand.CHILD),   # 11
    (date(2014, 6, 1), date(2026, 6, 1), AgeBand.ADOLESCENT),  # exactly 12 -> upper band
    (date(2008, 6, 1), date(2026, 5, 31), AgeBand.ADOLESCENT),  # 17
    (date(2008, 6, 1), date(2026, 6, 1), AgeBand.ADULT),    # exactly 18
    (date(1962, 1, 1), date(2026, 6, 1), AgeBand.ADULT),    # 64
    (date(1961, 6, 1), date(2026, 6, 1), AgeBand.ELDERLY),  # exactly 65
])
def test_age_band_boundaries(dob, on, expected):
    assert age_band(dob, on) is expected


def test_future_dob_rejected():
    with pytest.raises(errors.FutureDob):
        age_band(date(2027, 1, 1), date(2026, 1, 1))


# --- fixtures for pure functions ---

def make_note(nature="p.falciparum malaria", description="fever and chills"):
    return ConsultationNote(
        note_id="N1", pat_id="P1", author="drA", nature=nature,
        description=description, recorded_at=datetime(2026, 1, 2, tzinfo=timezone.utc),
    )


def make_patient(dob=date(1990, 4, 1), allergy=frozenset()):
    return PatientRecord(
        pat_id="P1", registered_by="drA", fullname="Test Patient", phone="0",
        dob=dob, address="x", drug_allergy=frozenset(allergy), occupation="",
    )


def make_item(**overrides):
    fields = dict(
        drug_id="D1", pat_id="P1", med_id="M1", num=12, refill=1, substitute=True,
        dosage="80/480 mg", freq="bd", route="oral", sig="with food",
        date=date(2026, 1, 2),
    )
    fields.update(overrides)
    return MedicationItem(**fields)


def make_case(case_id, terms, band=AgeBand.ADULT, drug_id="D1",
              created=datetime(2026, 1, 1, tzinfo=timezone.utc), allergy=frozenset()):
    return Case(
        case_id=case_id, diagnosis_terms=frozenset(terms), age_band=band,
        allergy_set=frozenset(allergy), drug_id=drug_id,
        sig_bundle=SigBundle("80/480 mg", "bd", "oral", 12, 0, False, "with food"),
        created_at=created,
    )


# --- encode ---

def test_encode_case_terms_and_band():
    case = encode_case(make_note(), make_patient(), make_item())
    assert {"p", "falciparum", "malaria"} <= case.diagnosis_terms
    assert case.age_band is AgeBand.ADULT
    assert case.sig_bundle == SigBundle("80/480 mg", "bd", "oral", 12, 1, True, "with food")


def test_encode_case_deterministic():
    a = encode_case(make_note(), make_patient(), make_item())
    b = encode_case(make_note(), make_patient(), make_item())
    assert a == b


def test_encode_incomplete_sig_rejected():
    with pytest.raises(errors.IncompleteSig):
        encode_case(make_note(), make_patient(), make_item(route=""))


# --- similarity ---

def test_similarity_identity_is_one():
    q = CaseQuery(frozenset({"malaria", "fever"}), AgeBand.ADULT)
    c = make_case("C1", {"malaria", "fever"}, AgeBand.ADULT)
    assert similarity(q, c) == 1.0


def test_similarity_disjoint_far_bands_is_zero():
    q = CaseQuery(frozenset({"typhoid"}), AgeBand.INFANT)
    c = make_case("C1", {"malaria"}, AgeBand.ADULT)
    assert similarity(q, c) == 0.0


def test_similarity_hand_value():
    # jaccard({malaria,fever},{malaria}) = 1/2; same band -> 0.8*0.5 + 0.2
    q = CaseQuery(frozenset({"malaria", "fever"}), AgeBand.ADULT)
    c = make_case("C1", {"malaria"}, AgeBand.ADULT)
    assert similarity(q, c) == pytest.approx(0.6, abs=1e-12)


def test_band_affinity_values():
    assert band_affinity(AgeBand.ADULT, AgeBand.ADULT) == 1.0
    assert band_affinity(AgeBand.ADULT, AgeBand.ADOLESCENT) == 0.5
    assert band_affinity(AgeBand.ADULT, AgeBand.ELDERLY) == 0.5
    assert band_affinity(AgeBand.INFANT, AgeBand.ADOLESCENT) == 0.0


_terms = st.frozensets(st.sampled_from(["malaria", "fever", "cough", "typhoid", "p"]),
                       min_size=1, max_size=4)
_bands = st.sampled_from(list(AgeBand))


@given(_terms, _terms, _bands, _bands)
def test_similarity_symmetric_in_sets_and_bounded(t1, t2, b1, b2):
    q12 = similarity(CaseQuery(t1, b1), make_case("C", t2, b2))
    q21 = similarity(CaseQuery(t2, b2), make_case("C", t1, b1))
    assert q12 == q21
    assert 0.0 <= q12 <= 1.0
    assert (q12 == 1.0) == (t1 == t2 and b1 == b2)


# --- retrieval (engine vs oracle) ---

def brute_force_retrieve(cases, drugs, query, k, theta,
                         diagnosis_weight=0.8, age_weight=0.2):
    """Independent oracle: score everything, filter, full sort, slice."""
    survivors = []
    for case in cases:
        drug = drugs.get(case.drug_id)
        if drug is None:
            continue
        if check_allergy_conflict(drug, query.allergy_set):
            continue
        score = (diagnosis_weight * (len(query.diagnosis_terms & case.diagnosis_terms)
                                     / len(query.diagnosis_terms | case.diagnosis_terms)
                                     if (query.diagnosis_terms or case.diagnosis_terms) else 0.0)
                 + age_weight * band_affinity(query.age_band, case.age_band))
        if score >= theta:
            survivors.append((case, score))
    survivors.sort(key=lambda pair: (-pair[1], -pair[0].created_at.timestamp(), pair[0].case_id))
    return survivors[:k]


VOCAB = ["malaria", "fever", "p", "falciparum", "typhoid", "cough", "rash",
         "headache", "cold", "ulcer", "asthma", "pain"]


def seed_case_memory(world, rnd, n):
    """Retain n synthetic cases by running real dispenses is slow; insert
    directly through the engine's retain to keep ids/clock authoritative."""
    drug_ids = [d.drug_id for d in world.svc.kb.list_drugs()]
    for i in range(n):
        terms = frozenset(rnd.sample(VOCAB, rnd.randint(1, 4)))
        case = make_case(
            "", terms,
            band=rnd.choice(list(AgeBand)),
            drug_id=rnd.choice(drug_ids),
            created=datetime(2026, 1, 1, tzinfo=timezone.utc) + timedelta(seconds=rnd.randint(0, 5)),
        )
        world.svc.cbr.retain(case)


def test_empty_memory_retrieves_nothing(world):
    query = CaseQuery(frozenset({"malaria"}), AgeBand.ADULT)
    assert world.svc.cbr.retrieve(query) == []


def test_allergy_filter_dominates_score(world):
    # the only case is a perfect match but its drug hits the allergy set
    case = make_case("", {"malaria"}, AgeBand.ADULT, drug_id=world.drug_id("Amoxicillin"))
    world.svc.cbr.retain(case)
    query = CaseQuery(frozenset({"malaria"}), AgeBand.ADULT, frozenset({"penicillin"}))
    assert world.svc.cbr.retrieve(query) == []
    clean_query = CaseQuery(frozenset({"malaria"}), AgeBand.ADULT)
    assert [s for _, s in world.svc.cbr.retrieve(clean_query)] == [1.0]


def test_retrieve_matches_oracle_on_random_memory(world):
    rnd = random.Random(42)
    seed_case_memory(world, rnd, 200)
    cases = world.svc.store.all_cases()
    drugs = world.svc.store.drugs_by_id()
    for _ in range(20):
        query = CaseQuery(
            frozenset(rnd.sample(VOCAB, rnd.randint(1, 3))),
            rnd.choice(list(AgeBand)),
            frozenset() if rnd.random() < 0.5 else frozenset({"penicillin"}),
        )
        k = rnd.randint(1, 8)
        theta = rnd.choice([0.0, 0.2, 0.4, 0.6])
        got = world.svc.cbr.retrieve(query, k=k, theta=theta)
        expected = brute_force_retrieve(cases, drugs, query, k, theta)
        assert [(c.case_id, s) for c, s in got] == [(c.case_id, s) for c, s in expected]


def test_tie_broken_by_newer_then_smaller_id(world):
    base = datetime(2026, 2, 1, tzinfo=timezone.utc)
    drug_id = world.drug_id("Paracetamol")
    world.svc.cbr.retain(make_case("", {"malaria"}, drug_id=drug_id, created=base))  # older
    world.svc.cbr.retain(make_case("", {"malaria"}, drug_id=drug_id, created=base + timedelta(hours=1)))
    world.svc.cbr.retain(make_case("", {"malaria"}, drug_id=drug_id, created=base + timedelta(hours=1)))
    query = CaseQuery(frozenset({"malaria"}), AgeBand.ADULT)
    got = [c.case_id for c, _ in world.svc.cbr.retrieve(query, k=3)]
    ids = sorted(c.case_id for c in world.svc.store.all_cases())
    assert got == [ids[1], ids[2], ids[0]]  # equal scores: newer first, then smaller id


def test_theta_boundary_inclusive(world):
    # single shared token over a two-token query scores exactly 0.8*0.5 = 0.4
    world.svc.cbr.retain(make_case("", {"malaria"}, band=AgeBand.INFANT,
                                   drug_id=world.drug_id("Paracetamol")))
    query = CaseQuery(frozenset({"malaria", "fever"}), AgeBand.ADULT)
    got = world.svc.cbr.retrieve(query, theta=0.4)
    assert len(got) == 1
    assert got[0][1] == pytest.approx(0.4, abs=1e-15)


def test_retain_then_retrieve_roundtrip(world):
    case = make_case("", {"p", "falciparum", "malaria"}, AgeBand.ADULT,
                     drug_id=world.drug_id("Artemether/Lumefantrine"))
    before = world.svc.store.count_cases()
    case_id = world.svc.cbr.retain(case)
    assert world.svc.store.count_cases() == before + 1
    query = CaseQuery(case.diagnosis_terms, case.age_band, frozenset())
    got = world.svc.cbr.retrieve(query)
    assert got[0][0].case_id == case_id
    assert got[0][1] == 1.0


# --- adapt ---

def _retain_adult_case(world, drug_name="Artemether/Lumefantrine"):
    case = make_case("", {"malaria"}, AgeBand.ADULT, drug_id=world.drug_id(drug_name))
    case_id = world.svc.cbr.retain(case)
    stored = {c.case_id: c for c in world.svc.store.all_cases()}[case_id]
    return stored


def test_adapt_same_band_copies_sig(world):
    case = _retain_adult_case(world)
    adult = world.register_patient("Adult Adapt")
    draft = world.svc.cbr.adapt(case, adult)
    assert (draft.dosage, draft.freq, draft.route, draft.num, draft.refill, draft.substitute, draft.sig) == (
        case.sig_bundle.dosage, case.sig_bundle.freq, case.sig_bundle.route,
        case.sig_bundle.num, case.sig_bundle.refill, case.sig_bundle.substitute,
        case.sig_bundle.sig,
    )
    assert draft.pat_id == adult.pat_id
    assert draft.pat_name == "Adult Adapt"
    assert draft.note == "80/480 mg twice daily for 3 days"  # adult usage attached


def test_adapt_for_child_attaches_pediatric_note(world):
    case = _retain_adult_case(world)
    child = world.register_patient("Child Adapt", dob="2020-06-01")
    draft = world.svc.cbr.adapt(case, child)
    assert draft.note.startswith("Pediatric:")
    assert "weight-banded dosing per chart" in draft.note
    assert draft.num == case.sig_bundle.num  # sig still copied


def test_adapt_child_with_no_children_usage_flags_gap(world):
    case = _retain_adult_case(world, "Amoxicillin")
    child = world.register_patient("Child Gap", dob="2020-06-01")
    draft = world.svc.cbr.adapt(case, child)
    assert draft.note == "Pediatric: no children's dosing on file"


def test_adapt_withdrawn_drug_rejected(world):
    case = _retain_adult_case(world, "Paracetamol")
    world.svc.store.delete_drug(world.drug_id("Paracetamol"))
    with pytest.raises(errors.DrugWithdrawn):
        world.svc.cbr.adapt(case, world.register_patient("Any One"))


def test_retrieve_skips_withdrawn_drug_cases(world):
    world.svc.cbr.retain(make_case("", {"malaria"}, drug_id=world.drug_id("Paracetamol")))
    world.svc.store.delete_drug(world.drug_id("Paracetamol"))
    assert world.svc.cbr.retrieve(CaseQuery(frozenset({"malaria"}), AgeBand.ADULT)) == []


# --- patterns ---

def test_patterns_empty_for_new_patient(world):
    patient = world.register_patient("Fresh Patient")
    assert world.svc.cbr.patient_patterns(patient.pat_id) == []


def test_patterns_unknown_patient(world):
    with pytest.raises(errors.PatientNotFound):
        world.svc.cbr.patient_patterns("P999999")


def test_patterns_newest_first(world):
    patient = world.register_patient("Pattern Patient")
    world.consult(patient.pat_id)
    names = ["Artemether/Lumefantrine", "Paracetamol", "Warfarin"]
    for name in names:
        rx = world.svc.rx.create_draft(world.doc_sess, patient.pat_id, [world.clean_item(name)])
        world.svc.rx.sign_and_transmit(world.doc_sess, rx.rx_id, world.pharmacy1.pharm_id)
    got = [i.med_name for i in world.svc.cbr.patient_patterns(patient.pat_id)]
    assert got == list(reversed(names))
    assert all(i.sig for i in world.svc.cbr.patient_patterns(patient.pat_id))
