"""Safety rules applied to a draft prescription.

Five IF-THEN checks run over every draft item, in item order, rules in
numeric order, so the alert list is a pure, deterministic function of the
inputs:

  R1 allergy conflict        Blocking       drug name/class token in the
                                            patient's allergy set
  R2 drug-drug interaction   Interruptive   another active or co-drafted
                                            drug appears in this drug's
                                            interactions text (either
                                            direction)
  R3 therapeutic duplication Interruptive   same drug already active, or
                                            repeated within the draft
  R4 incomplete sig          Blocking       dosage, freq, route, or num
                                            missing
  R5 pediatric gap           Informational  patient under the pediatric age
                                            limit and no children's usage on
                                            file

Interaction and allergy matching are token-overlap heuristics over free-text
monograph fields; precision is limited by the source data and that is a
documented trade-off, not a bug.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .errors import (
    AlreadyOverridden,
    CannotOverrideBlocking,
    EmptyReason,
    OverrideNotRequired,
    UnknownDrug,
)
from .models import (
    Alert,
    DrugRecord,
    MedicationItem,
    PatientRecord,
    Prescription,
    RuleId,
    Severity,
    whole_year_age,
)
from .terms import normalize_terms

DEFAULT_PEDIATRIC_AGE_LIMIT = 12

_SIG_FIELDS = ("dosage", "freq", "route", "num")


def drug_terms(drug: DrugRecord) -> frozenset[str]:
    """Tokens a drug is known by: its name plus its pharmacological class."""
    return normalize_terms(drug.name) | normalize_terms(drug.pharmacological_class)


def check_allergy_conflict(drug: DrugRecord, allergy_set: frozenset[str]) -> bool:
    """True iff any name/class token of the drug is in the allergy set."""
    return bool(drug_terms(drug) & allergy_set)


def check_interaction(a: DrugRecord, b: DrugRecord) -> bool:
    """True iff either monograph's interactions text mentions the other drug.

    Symmetric by construction: a one-directional mention is enough.
    """
    return _mentions(a, b) or _mentions(b, a)


def _mentions(src: DrugRecord, other: DrugRecord) -> bool:
    return bool(normalize_terms(src.interactions) & drug_terms(other))


def validate_draft(
    draft: Prescription,
    patient: PatientRecord,
    active_meds: Sequence[MedicationItem],
    drugs: Mapping[str, DrugRecord],
    *,
    pediatric_age_limit: int = DEFAULT_PEDIATRIC_AGE_LIMIT,
) -> list[Alert]:
    """Run R1-R5 over the draft; an empty result means the draft is clean.

    Pure: same draft, patient, active medications, and registry view always
    produce the identical alert list (ids, order, and content). Patient age
    is taken at the draft's creation date. Co-draft pairs are reported once,
    on the later item; a pair with the same drug_id is duplication (R3), not
    an interaction.
    """
    for item in draft.items:
        if item.drug_id not in drugs:
            raise UnknownDrug(f"drug {item.drug_id} is not in the registry")

    age = whole_year_age(patient.dob, draft.created_at.date())
    alerts: list[Alert] = []

    for idx, item in enumerate(draft.items):
        drug = drugs[item.drug_id]

        hits = sorted(drug_terms(drug) & patient.drug_allergy)
        if hits:
            alerts.append(Alert(
                alert_id=f"R1.{idx}",
                rule_id=RuleId.R1_ALLERGY,
                severity=Severity.BLOCKING,
                message=(
                    f"{drug.name} conflicts with recorded allergy "
                    f"({', '.join(hits)})"
                ),
            ))

        for m_idx, med in enumerate(active_meds):
            other = drugs.get(med.drug_id)
            if other is None or other.drug_id == drug.drug_id:
                continue
            if check_interaction(drug, other):
                alerts.append(Alert(
                    alert_id=f"R2.{idx}.a{m_idx}",
                    rule_id=RuleId.R2_INTERACTION,
                    severity=Severity.INTERRUPTIVE,
                    message=f"{drug.name} may interact with active medication {other.name}",
                ))
        for j in range(idx):
            other = drugs[draft.items[j].drug_id]
            if other.drug_id == drug.drug_id:
                continue
            if check_interaction(drug, other):
                alerts.append(Alert(
                    alert_id=f"R2.{idx}.d{j}",
                    rule_id=RuleId.R2_INTERACTION,
                    severity=Severity.INTERRUPTIVE,
                    message=f"{drug.name} may interact with co-drafted {other.name}",
                ))

        if any(med.drug_id == item.drug_id for med in active_meds):
            alerts.append(Alert(
                alert_id=f"R3.{idx}.active",
                rule_id=RuleId.R3_DUPLICATE,
                severity=Severity.INTERRUPTIVE,
                message=f"{drug.name} is already active for this patient",
            ))
        if any(draft.items[j].drug_id == item.drug_id for j in range(idx)):
            alerts.append(Alert(
                alert_id=f"R3.{idx}.draft",
                rule_id=RuleId.R3_DUPLICATE,
                severity=Severity.INTERRUPTIVE,
                message=f"{drug.name} appears more than once in this draft",
            ))

        missing = [f for f in _SIG_FIELDS if not getattr(item, f)]
        if missing:
            alerts.append(Alert(
                alert_id=f"R4.{idx}",
                rule_id=RuleId.R4_INCOMPLETE,
                severity=Severity.BLOCKING,
                message=f"{drug.name}: incomplete sig, missing {', '.join(missing)}",
            ))

        if age < pediatric_age_limit and not (drug.children_usage or "").strip():
            alerts.append(Alert(
                alert_id=f"R5.{idx}",
                rule_id=RuleId.R5_PEDIATRIC_GAP,
                severity=Severity.INFORMATIONAL,
                message=f"{drug.name} has no children's usage on file and the patient is {age}",
            ))

    return alerts


def transmittable(alerts: Sequence[Alert]) -> bool:
    """A draft may move forward iff nothing blocks and every interruption
    has been answered with an override."""
    for alert in alerts:
        if alert.severity is Severity.BLOCKING:
            return False
        if alert.severity is Severity.INTERRUPTIVE and alert.override is None:
            return False
    return True


def ensure_overridable(alert: Alert, reason: str) -> None:
    """Raise unless this alert may legally receive the given override."""
    if alert.severity is Severity.BLOCKING:
        raise CannotOverrideBlocking(f"{alert.rule_id.value} alerts cannot be overridden")
    if alert.severity is Severity.INFORMATIONAL:
        raise OverrideNotRequired(f"{alert.rule_id.value} alerts do not require an override")
    if alert.override is not None:
        raise AlreadyOverridden(f"alert {alert.alert_id} already carries an override")
    if not reason or not reason.strip():
        raise EmptyReason("an override requires a non-empty reason")
