"""Knowledge base: drug monographs, patients, pharmacies, and medical history.

The drug registry and per-patient record (allergies, default pharmacy,
consultation notes, past medications) are the data every downstream check
and suggestion draws on.
"""

from __future__ import annotations

import re
from datetime import date, datetime
from typing import Callable, Optional

from .auth import AuthService, normalize_template, utcnow
from .errors import (
    DrugNotFound,
    DuplicateName,
    InvalidDob,
    InvalidRequest,
    PatientNotFound,
    UnregisteredPharmacy,
)
from .models import (
    ConsultationNote,
    DrugRecord,
    FingerprintScan,
    HistoryEntry,
    PatientRecord,
    Pharmacy,
    RxState,
    Session,
    UserType,
)
from .store import Store
from .terms import normalize_terms

SEARCH_RESULT_CAP = 20

_EMAIL_PATTERN = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

REGISTRY_VERSION_KEY = "drug_registry_version"


class KnowledgeBase:
    def __init__(self, store: Store, auth: AuthService, clock: Callable[[], datetime] = utcnow):
        self._store = store
        self._auth = auth
        self._clock = clock

    # --- drug registry ---

    def upsert_drug(self, session: Session, drug: DrugRecord | dict) -> str:
        """Create or fully replace a monograph; bumps the registry version."""
        self._auth.require_prescriber(session)
        if isinstance(drug, dict):
            drug = DrugRecord(**drug)
        if not drug.name or not drug.name.strip():
            raise InvalidRequest("drug name must be non-empty")

        drug_id = drug.drug_id or self._store.next_id("drug", "D")
        existing = self._store.get_drug(drug_id)
        same_name = self._store.get_drug_by_name(drug.name)
        if same_name is not None and same_name.drug_id != drug_id:
            raise DuplicateName(f"drug named {drug.name!r} already exists")
        if existing is None and same_name is not None:
            raise DuplicateName(f"drug named {drug.name!r} already exists")

        with self._store.transaction():
            self._store.put_drug(DrugRecord(**{**drug.to_dict(), "drug_id": drug_id}))
            version = int(self._store.get_meta(REGISTRY_VERSION_KEY)) + 1
            self._store.set_meta(REGISTRY_VERSION_KEY, str(version))
        return drug_id

    def seed_drugs(self, records: list[dict]) -> int:
        """Operator bulk load (no session). All-or-nothing: duplicate names,
        within the file or against the registry, abort the whole load."""
        drugs = []
        for raw in records:
            if not isinstance(raw, dict) or not (raw.get("name") or "").strip():
                raise InvalidRequest("every seed record needs a non-empty name")
            drugs.append(raw)
        seen: dict[str, str] = {}
        duplicates = []
        for raw in drugs:
            folded = raw["name"].lower()
            if folded in seen or self._store.get_drug_by_name(raw["name"]) is not None:
                duplicates.append(raw["name"])
            seen[folded] = raw["name"]
        if duplicates:
            raise DuplicateName(
                "duplicate drug names: " + ", ".join(sorted(set(duplicates))),
                details={"names": sorted(set(duplicates))},
            )
        with self._store.transaction():
            for raw in drugs:
                drug_id = raw.get("drug_id") or self._store.next_id("drug", "D")
                self._store.put_drug(DrugRecord(**{**raw, "drug_id": drug_id}))
                version = int(self._store.get_meta(REGISTRY_VERSION_KEY)) + 1
                self._store.set_meta(REGISTRY_VERSION_KEY, str(version))
        return len(drugs)

    def get_drug_info(self, drug_id: str) -> DrugRecord:
        drug = self._store.get_drug(drug_id)
        if drug is None:
            raise DrugNotFound(f"no drug {drug_id}")
        return drug

    def list_drugs(self) -> list[DrugRecord]:
        return self._store.list_drugs()

    def registry_version(self) -> int:
        return int(self._store.get_meta(REGISTRY_VERSION_KEY))

    # --- pharmacies ---

    def register_pharmacy(
        self, session: Session, name: str, address: str, phone: str, email: str | None = None
    ) -> Pharmacy:
        self._auth.require_role(session, UserType.ADMINISTRATOR)
        if not name or not name.strip():
            raise InvalidRequest("pharmacy name must be non-empty")
        if email and not _EMAIL_PATTERN.match(email):
            raise InvalidRequest(f"invalid email address: {email!r}")
        if self._store.get_pharmacy_by_name(name) is not None:
            raise DuplicateName(f"pharmacy named {name!r} already exists")
        pharmacy = Pharmacy(
            pharm_id=self._store.next_id("pharm", "PH", width=4),
            name=name, address=address, phone=phone, email=email or None,
        )
        self._store.insert_pharmacy(pharmacy)
        return pharmacy

    def list_pharmacies(self) -> list[Pharmacy]:
        return self._store.list_pharmacies()

    def get_pharmacy(self, pharm_id: str) -> Pharmacy:
        pharmacy = self._store.get_pharmacy(pharm_id)
        if pharmacy is None:
            raise UnregisteredPharmacy(f"pharmacy {pharm_id} is not registered")
        return pharmacy

    # --- patients ---

    def register_patient(
        self,
        session: Session,
        fullname: str,
        phone: str,
        dob: date | str,
        address: str,
        allergy_text: str = "",
        occupation: str = "",
        default_pharmacy: Optional[str] = None,
        fingerprint: Optional[FingerprintScan] = None,
    ) -> PatientRecord:
        live = self._auth.require_prescriber(session)
        if isinstance(dob, str):
            try:
                dob = date.fromisoformat(dob)
            except ValueError as exc:
                raise InvalidDob(f"unparseable date of birth: {dob!r}") from exc
        if dob > self._clock().date():
            raise InvalidDob("date of birth is in the future")
        if not fullname or not fullname.strip():
            raise InvalidRequest("patient fullname must be non-empty")
        if default_pharmacy is not None and self._store.get_pharmacy(default_pharmacy) is None:
            raise UnregisteredPharmacy(f"pharmacy {default_pharmacy} is not registered")

        template = None
        if fingerprint is not None and fingerprint.data:
            template = normalize_template(fingerprint.data)

        patient = PatientRecord(
            pat_id=self._store.next_id("pat", "P"),
            registered_by=live.user_id,
            fullname=fullname,
            phone=phone,
            dob=dob,
            address=address,
            drug_allergy=normalize_terms(allergy_text),
            occupation=occupation,
            default_pharmacy=default_pharmacy,
            fingerprint_template=template,
        )
        self._store.insert_patient(patient)
        return patient

    def get_patient(self, pat_id: str) -> PatientRecord:
        patient = self._store.get_patient(pat_id)
        if patient is None:
            raise PatientNotFound(f"no patient {pat_id}")
        return patient

    def search_patients(self, prefix: str) -> list[tuple[str, str]]:
        """Case-insensitive prefix match on fullname, alphabetical, capped."""
        if not prefix:
            return []
        return self._store.search_patients(prefix, SEARCH_RESULT_CAP)

    # --- consultations and history ---

    def record_consultation(
        self, session: Session, pat_id: str, nature: str, description: str
    ) -> ConsultationNote:
        live = self._auth.require_prescriber(session)
        self.get_patient(pat_id)
        if not nature or not nature.strip():
            raise InvalidRequest("consultation nature must be non-empty")
        note = ConsultationNote(
            note_id=self._store.next_id("note", "N"),
            pat_id=pat_id,
            author=live.user_id,
            nature=nature,
            description=description,
            recorded_at=self._clock(),
        )
        self._store.insert_consultation(note)
        return note

    def get_history(self, pat_id: str) -> list[HistoryEntry]:
        """Chronological merge of consultation notes and dispatched medications.

        Medications enter the history once transmitted; their history
        timestamp is the transmission time.
        """
        self.get_patient(pat_id)
        entries = [
            HistoryEntry(kind="consultation", at=note.recorded_at, note=note)
            for note in self._store.consultations_for_patient(pat_id)
        ]
        for rx in self._store.prescriptions_for_patient(
            pat_id, [RxState.TRANSMITTED, RxState.DISPENSED]
        ):
            for item in rx.items:
                entries.append(HistoryEntry(kind="medication", at=rx.transmitted_at, item=item))
        entries.sort(key=lambda e: (e.at, 0 if e.kind == "consultation" else 1, _entry_id(e)))
        return entries


def _entry_id(entry: HistoryEntry) -> str:
    if entry.note is not None:
        return entry.note.note_id
    return entry.item.med_id or ""
