"""Case engine: retrieve, adapt, and retain successful prescriptions.

Every dispensed medication item is encoded as a case — diagnosis terms, the
patient's age band, their allergy set, and the full sig — and appended to
case memory. A new consultation is answered by scoring memory against the
query and adapting the best matches into editable draft items.

Scoring: weighted sum of diagnosis-term Jaccard overlap (default 0.8) and
age-band affinity (default 0.2; same band 1.0, adjacent 0.5, otherwise 0).
Cases whose drug would conflict with the query's allergy set are excluded
outright before scoring: a contraindicated suggestion must never surface,
however relevant.
"""

from __future__ import annotations

import heapq
from dataclasses import replace
from datetime import date, datetime
from typing import Callable, Optional

from .auth import utcnow
from .errors import (
    DrugWithdrawn,
    FutureDob,
    IncompleteSig,
    InvalidRequest,
    PatientNotFound,
)
from .knowledge import KnowledgeBase
from .models import (
    AgeBand,
    Case,
    CaseQuery,
    ConsultationNote,
    MedicationItem,
    PatientRecord,
    RxState,
    SigBundle,
    whole_year_age,
)
from .store import Store
from .terms import jaccard, normalize_terms
from .validator import check_allergy_conflict

DEFAULT_K = 5
DEFAULT_THETA = 0.4
DEFAULT_DIAGNOSIS_WEIGHT = 0.8
DEFAULT_AGE_WEIGHT = 0.2

_BANDS = [AgeBand.INFANT, AgeBand.CHILD, AgeBand.ADOLESCENT, AgeBand.ADULT, AgeBand.ELDERLY]
_BAND_UPPER = [1, 11, 17, 64]  # inclusive upper age of each band except Elderly


def age_band(dob: date, on_date: date) -> AgeBand:
    """Map whole-year age to a band; boundary ages belong to the upper band."""
    if dob > on_date:
        raise FutureDob("date of birth is after the reference date")
    age = whole_year_age(dob, on_date)
    for band, upper in zip(_BANDS, _BAND_UPPER):
        if age <= upper:
            return band
    return AgeBand.ELDERLY


def band_affinity(a: AgeBand, b: AgeBand) -> float:
    distance = abs(a.index - b.index)
    if distance == 0:
        return 1.0
    if distance == 1:
        return 0.5
    return 0.0


def similarity(
    query: CaseQuery,
    case: Case,
    *,
    diagnosis_weight: float = DEFAULT_DIAGNOSIS_WEIGHT,
    age_weight: float = DEFAULT_AGE_WEIGHT,
) -> float:
    """Score in [0, 1]; 1.0 iff equal term sets and equal bands (default weights)."""
    return (
        diagnosis_weight * jaccard(query.diagnosis_terms, case.diagnosis_terms)
        + age_weight * band_affinity(query.age_band, case.age_band)
    )


def encode_case(
    note: ConsultationNote,
    patient: PatientRecord,
    item: MedicationItem,
    *,
    case_id: str = "",
    created_at: Optional[datetime] = None,
) -> Case:
    """Turn a dispensed item and its consultation into a retained case.

    Deterministic apart from the assigned case_id/created_at: the same note,
    patient, and item always produce the same terms, band, and sig bundle.
    """
    if not item.sig_complete():
        raise IncompleteSig("a case requires a complete sig (dosage, freq, route, num)")
    terms = normalize_terms(f"{note.nature} {note.description}")
    if not terms:
        raise InvalidRequest("consultation text yields no diagnosis terms")
    on_date = item.date or (created_at.date() if created_at else note.recorded_at.date())
    return Case(
        case_id=case_id,
        diagnosis_terms=terms,
        age_band=age_band(patient.dob, on_date),
        allergy_set=patient.drug_allergy,
        drug_id=item.drug_id,
        sig_bundle=SigBundle(
            dosage=item.dosage, freq=item.freq, route=item.route,
            num=item.num, refill=item.refill, substitute=item.substitute,
            sig=item.sig,
        ),
        created_at=created_at or note.recorded_at,
    )


class CbrEngine:
    def __init__(
        self,
        store: Store,
        knowledge: KnowledgeBase,
        clock: Callable[[], datetime] = utcnow,
        *,
        k: int = DEFAULT_K,
        theta: float = DEFAULT_THETA,
        diagnosis_weight: float = DEFAULT_DIAGNOSIS_WEIGHT,
        age_weight: float = DEFAULT_AGE_WEIGHT,
    ):
        self._store = store
        self._knowledge = knowledge
        self._clock = clock
        self.k = k
        self.theta = theta
        self.diagnosis_weight = diagnosis_weight
        self.age_weight = age_weight

    def retain(self, case: Case) -> str:
        """Append to case memory; the case is immediately retrievable."""
        case_id = self._store.next_id("case", "C")
        self._store.insert_case(replace(case, case_id=case_id))
        return case_id

    def retrieve(
        self,
        query: CaseQuery,
        k: Optional[int] = None,
        theta: Optional[float] = None,
    ) -> list[tuple[Case, float]]:
        """Top-k cases scoring >= theta, after the allergy hard filter.

        Ties: higher score, then newer created_at, then smaller case_id.
        Cases whose drug has left the registry are skipped (they can be
        neither allergy-checked nor adapted). Selection runs on a heap, not
        a full sort.
        """
        if not query.diagnosis_terms:
            raise InvalidRequest("query diagnosis terms must be non-empty")
        k = self.k if k is None else k
        theta = self.theta if theta is None else theta
        if k < 1:
            raise InvalidRequest("k must be >= 1")
        if not 0.0 <= theta <= 1.0:
            raise InvalidRequest("theta must be within [0, 1]")

        drugs = self._store.drugs_by_id()
        candidates: list[tuple[tuple[float, float, str], Case, float]] = []
        for case in self._store.all_cases():
            drug = drugs.get(case.drug_id)
            if drug is None:
                continue
            if check_allergy_conflict(drug, query.allergy_set):
                continue
            score = similarity(
                query, case,
                diagnosis_weight=self.diagnosis_weight, age_weight=self.age_weight,
            )
            if score >= theta:
                key = (-score, -case.created_at.timestamp(), case.case_id)
                candidates.append((key, case, score))

        best = heapq.nsmallest(k, candidates, key=lambda c: c[0])
        return [(case, score) for _, case, score in best]

    def adapt(self, case: Case, patient: PatientRecord) -> MedicationItem:
        """Rebind a retrieved case to a new patient as an editable draft item.

        The sig bundle is copied verbatim; usage guidance is re-selected for
        the patient's current age band and carried on the item note, flagged
        when the patient is pediatric. The draft is still subject to the
        full safety rules at drafting time.
        """
        drug = self._store.get_drug(case.drug_id)
        if drug is None:
            raise DrugWithdrawn(f"drug {case.drug_id} is no longer in the registry")
        today = self._clock().date()
        band = age_band(patient.dob, today)
        if band.pediatric:
            guidance = (drug.children_usage or "").strip()
            note = f"Pediatric: {guidance}" if guidance else "Pediatric: no children's dosing on file"
        else:
            note = (drug.adult_usage or "").strip()
        sig = case.sig_bundle
        return MedicationItem(
            drug_id=case.drug_id,
            pat_id=patient.pat_id,
            pat_name=patient.fullname,
            med_name=drug.name,
            num=sig.num,
            refill=sig.refill,
            substitute=sig.substitute,
            dosage=sig.dosage,
            freq=sig.freq,
            route=sig.route,
            sig=sig.sig,
            note=note,
            date=today,
            start_d=today,
        )

    def patient_patterns(self, pat_id: str) -> list[MedicationItem]:
        """The patient's own transmitted/dispensed medications, newest first."""
        if self._store.get_patient(pat_id) is None:
            raise PatientNotFound(f"no patient {pat_id}")
        prescriptions = self._store.prescriptions_for_patient(
            pat_id, [RxState.TRANSMITTED, RxState.DISPENSED]
        )
        prescriptions.sort(key=lambda rx: (rx.transmitted_at, rx.rx_id), reverse=True)
        items: list[MedicationItem] = []
        for rx in prescriptions:
            items.extend(rx.items)
        return items
