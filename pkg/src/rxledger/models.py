"""Domain types shared across the service modules.

These mirror the relational model of the data store: users, the drug list,
patients, pharmacies, consultation notes, medication items, prescriptions,
safety alerts, and retained prescribing cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime
from enum import Enum
from typing import Any, Optional

FINGERPRINT_TEMPLATE_BYTES = 512
FINGERPRINT_TEMPLATE_BITS = FINGERPRINT_TEMPLATE_BYTES * 8


class UserType(str, Enum):
    ADMINISTRATOR = "Administrator"
    PHYSICIAN = "Physician"
    PHARMACIST = "Pharmacist"

    @property
    def prescribes(self) -> bool:
        return self in (UserType.ADMINISTRATOR, UserType.PHYSICIAN)


class RxState(str, Enum):
    DRAFT = "Draft"
    VALIDATED = "Validated"
    TRANSMITTED = "Transmitted"
    DISPENSED = "Dispensed"
    REJECTED = "Rejected"


class Severity(str, Enum):
    BLOCKING = "Blocking"
    INTERRUPTIVE = "Interruptive"
    INFORMATIONAL = "Informational"


class RuleId(str, Enum):
    R1_ALLERGY = "R1_ALLERGY"
    R2_INTERACTION = "R2_INTERACTION"
    R3_DUPLICATE = "R3_DUPLICATE"
    R4_INCOMPLETE = "R4_INCOMPLETE"
    R5_PEDIATRIC_GAP = "R5_PEDIATRIC_GAP"


class AgeBand(str, Enum):
    INFANT = "Infant"          # 0-1
    CHILD = "Child"            # 2-11
    ADOLESCENT = "Adolescent"  # 12-17
    ADULT = "Adult"            # 18-64
    ELDERLY = "Elderly"        # 65+

    @property
    def index(self) -> int:
        return _AGE_BAND_ORDER[self]

    @property
    def pediatric(self) -> bool:
        return self in (AgeBand.INFANT, AgeBand.CHILD)


_AGE_BAND_ORDER = {
    AgeBand.INFANT: 0,
    AgeBand.CHILD: 1,
    AgeBand.ADOLESCENT: 2,
    AgeBand.ADULT: 3,
    AgeBand.ELDERLY: 4,
}


def whole_year_age(dob: date, on_date: date) -> int:
    """Completed years between dob and on_date (birthday not yet reached counts down)."""
    years = on_date.year - dob.year
    if (on_date.month, on_date.day) < (dob.month, dob.day):
        years -= 1
    return years


class VerifyResult(str, Enum):
    VALID = "Valid"
    UNKNOWN = "Unknown"


def _iso(value: date | datetime | None) -> str | None:
    return value.isoformat() if value is not None else None


@dataclass(frozen=True)
class UserRecord:
    """A credentialed actor. Password and fingerprint material never leave
    the service through :meth:`to_public_dict`."""

    user_id: str
    password_digest: bytes
    salt: bytes
    iterations: int
    fullname: str
    user_type: UserType
    phone_no: str
    fingerprint_template: bytes  # exactly 512 bytes after enrollment
    prescriber_no: Optional[str] = None   # present iff the user prescribes
    pharmacy_id: Optional[str] = None     # present iff user_type is Pharmacist
    active: bool = True

    def to_public_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "fullname": self.fullname,
            "user_type": self.user_type.value,
            "phone_no": self.phone_no,
            "prescriber_no": self.prescriber_no,
            "pharmacy_id": self.pharmacy_id,
            "active": self.active,
        }


@dataclass(frozen=True)
class Session:
    """Issued login session. Immutable; safe to share across handlers."""

    token: str
    user_id: str
    role: UserType
    issued_at: datetime
    expires_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "token": self.token,
            "user_id": self.user_id,
            "role": self.role.value,
            "issued_at": self.issued_at.isoformat(),
            "expires_at": self.expires_at.isoformat(),
        }


@dataclass(frozen=True)
class FingerprintScan:
    """Live capture payload: up to 512 opaque bytes, never empty."""

    data: bytes


@dataclass(frozen=True)
class DrugRecord:
    """One monograph in the drug knowledge base (14 fields)."""

    drug_id: str
    name: str
    legal_class: Optional[str] = None
    manufacturer: Optional[str] = None
    pharmacological_class: Optional[str] = None
    general_description: Optional[str] = None
    indications: Optional[str] = None
    adult_usage: Optional[str] = None
    children_usage: Optional[str] = None
    contraindications: Optional[str] = None
    precautions: Optional[str] = None
    interactions: Optional[str] = None  # free text drug names/classes, ';'-separated
    adverse_reactions: Optional[str] = None
    how_supplied: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "drug_id": self.drug_id,
            "name": self.name,
            "legal_class": self.legal_class,
            "manufacturer": self.manufacturer,
            "pharmacological_class": self.pharmacological_class,
            "general_description": self.general_description,
            "indications": self.indications,
            "adult_usage": self.adult_usage,
            "children_usage": self.children_usage,
            "contraindications": self.contraindications,
            "precautions": self.precautions,
            "interactions": self.interactions,
            "adverse_reactions": self.adverse_reactions,
            "how_supplied": self.how_supplied,
        }


@dataclass(frozen=True)
class PatientRecord:
    pat_id: str
    registered_by: str
    fullname: str
    phone: str
    dob: date
    address: str
    drug_allergy: frozenset[str]  # normalized terms
    occupation: str
    default_pharmacy: Optional[str] = None
    fingerprint_template: Optional[bytes] = None

    def to_public_dict(self) -> dict[str, Any]:
        return {
            "pat_id": self.pat_id,
            "registered_by": self.registered_by,
            "fullname": self.fullname,
            "phone": self.phone,
            "dob": self.dob.isoformat(),
            "address": self.address,
            "drug_allergy": sorted(self.drug_allergy),
            "occupation": self.occupation,
            "default_pharmacy": self.default_pharmacy,
            "has_fingerprint": self.fingerprint_template is not None,
        }


@dataclass(frozen=True)
class Pharmacy:
    pharm_id: str
    name: str
    address: str
    phone: str
    email: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "pharm_id": self.pharm_id,
            "name": self.name,
            "address": self.address,
            "phone": self.phone,
            "email": self.email,
        }


@dataclass(frozen=True)
class ConsultationNote:
    """Append-only entry in a patient's medical history."""

    note_id: str
    pat_id: str
    author: str
    nature: str           # short disease/infection label
    description: str
    recorded_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "note_id": self.note_id,
            "pat_id": self.pat_id,
            "author": self.author,
            "nature": self.nature,
            "description": self.description,
            "recorded_at": self.recorded_at.isoformat(),
        }


@dataclass(frozen=True)
class MedicationItem:
    """One medication line on a prescription.

    pat_name/med_name are stored display copies frozen at write time, so a
    printed prescription reproduces exactly what the prescriber saw.
    """

    drug_id: str
    pat_id: str = ""
    med_id: Optional[str] = None
    rx_id: Optional[str] = None
    pat_name: str = ""
    med_name: str = ""
    num: Optional[int] = None
    refill: int = 0
    substitute: bool = False
    dosage: str = ""
    freq: str = ""
    route: str = ""
    sig: str = ""
    note: str = ""
    start_d: Optional[date] = None
    refill_d: Optional[date] = None
    renew_d: Optional[date] = None
    date: Optional[date] = None
    pharmacist: Optional[str] = None  # pharmacy reference, stamped at transmit

    def sig_complete(self) -> bool:
        return bool(self.dosage) and bool(self.freq) and bool(self.route) and self.num is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "med_id": self.med_id,
            "rx_id": self.rx_id,
            "pat_id": self.pat_id,
            "drug_id": self.drug_id,
            "pat_name": self.pat_name,
            "med_name": self.med_name,
            "num": self.num,
            "refill": self.refill,
            "substitute": self.substitute,
            "dosage": self.dosage,
            "freq": self.freq,
            "route": self.route,
            "sig": self.sig,
            "note": self.note,
            "start_d": _iso(self.start_d),
            "refill_d": _iso(self.refill_d),
            "renew_d": _iso(self.renew_d),
            "date": _iso(self.date),
            "pharmacist": self.pharmacist,
        }


@dataclass(frozen=True)
class Override:
    reason: str
    user_id: str
    at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {"reason": self.reason, "user_id": self.user_id, "at": self.at.isoformat()}


@dataclass(frozen=True)
class Alert:
    """Safety-rule finding attached to a draft.

    Blocking alerts can never carry an override; Interruptive alerts must be
    overridden with a reason before the draft may be transmitted.
    """

    alert_id: str
    rule_id: RuleId
    severity: Severity
    message: str
    override: Optional[Override] = None

    def with_override(self, override: Override) -> "Alert":
        return replace(self, override=override)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alert_id": self.alert_id,
            "rule_id": self.rule_id.value,
            "severity": self.severity.value,
            "message": self.message,
            "override": self.override.to_dict() if self.override else None,
        }


@dataclass(frozen=True)
class Prescription:
    rx_id: str
    pat_id: str
    prescriber_user: str
    state: RxState
    created_at: datetime
    note_id: str                       # consultation the draft was written against
    items: tuple[MedicationItem, ...] = ()
    alerts: tuple[Alert, ...] = ()
    prescriber_no: Optional[str] = None  # stamped at signing
    pharmacy: Optional[str] = None
    transmitted_at: Optional[datetime] = None
    dispensed_at: Optional[datetime] = None
    reject_reason: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rx_id": self.rx_id,
            "pat_id": self.pat_id,
            "prescriber_user": self.prescriber_user,
            "prescriber_no": self.prescriber_no,
            "pharmacy": self.pharmacy,
            "state": self.state.value,
            "note_id": self.note_id,
            "created_at": self.created_at.isoformat(),
            "transmitted_at": _iso(self.transmitted_at),
            "dispensed_at": _iso(self.dispensed_at),
            "reject_reason": self.reject_reason,
            "items": [i.to_dict() for i in self.items],
            "alerts": [a.to_dict() for a in self.alerts],
        }


@dataclass(frozen=True)
class SigBundle:
    """The reusable directions of a retained case."""

    dosage: str
    freq: str
    route: str
    num: int
    refill: int
    substitute: bool
    sig: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "dosage": self.dosage,
            "freq": self.freq,
            "route": self.route,
            "num": self.num,
            "refill": self.refill,
            "substitute": self.substitute,
            "sig": self.sig,
        }


@dataclass(frozen=True)
class Case:
    """A stored (diagnosis, patient features, medication) triple."""

    case_id: str
    diagnosis_terms: frozenset[str]
    age_band: AgeBand
    allergy_set: frozenset[str]
    drug_id: str
    sig_bundle: SigBundle
    created_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "diagnosis_terms": sorted(self.diagnosis_terms),
            "age_band": self.age_band.value,
            "allergy_set": sorted(self.allergy_set),
            "drug_id": self.drug_id,
            "sig_bundle": self.sig_bundle.to_dict(),
            "created_at": self.created_at.isoformat(),
        }


@dataclass(frozen=True)
class CaseQuery:
    diagnosis_terms: frozenset[str]
    age_band: AgeBand
    allergy_set: frozenset[str] = frozenset()


@dataclass(frozen=True)
class HistoryEntry:
    """One event in a patient's chronological history."""

    kind: str  # "consultation" | "medication"
    at: datetime
    note: Optional[ConsultationNote] = None
    item: Optional[MedicationItem] = None

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"kind": self.kind, "at": self.at.isoformat()}
        if self.note is not None:
            payload["note"] = self.note.to_dict()
        if self.item is not None:
            payload["item"] = self.item.to_dict()
        return payload


@dataclass(frozen=True)
class FrequentEntry:
    """One row of the frequently-prescribed report: a complete sig template."""

    drug_id: str
    med_name: str
    dosage: str
    freq: str
    route: str
    num: Optional[int]
    refill: int
    substitute: bool
    sig: str
    count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "drug_id": self.drug_id,
            "med_name": self.med_name,
            "dosage": self.dosage,
            "freq": self.freq,
            "route": self.route,
            "num": self.num,
            "refill": self.refill,
            "substitute": self.substitute,
            "sig": self.sig,
            "count": self.count,
        }


@dataclass(frozen=True)
class PrintableDocument:
    """Rendered prescription, plain text and HTML with stable field order."""

    text: str
    html: str

    def to_dict(self) -> dict[str, str]:
        return {"text": self.text, "html": self.html}
