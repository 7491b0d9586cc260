"""Prescription lifecycle: draft, validate, sign-and-transmit, verify, dispense.

Legal state transitions, with no skips and no reversals:

    Draft -> Validated -> Transmitted -> Dispensed
                                      -> Rejected

A draft advances to Validated only once nothing blocks it and every
interruptive alert carries an override; transmission stamps the prescriber's
license number onto the record; dispensing re-verifies that number against
the registry and, on success, retains every item as a case in the suggestion
engine — atomically, so a crash can never double-retain.
"""

from __future__ import annotations

import html as html_mod
from dataclasses import replace
from datetime import date, datetime
from typing import Callable, Mapping, Optional, Sequence

from .auth import AuthService, match_fingerprint, utcnow
from .cbr import CbrEngine, encode_case
from .config import ServiceConfig
from .errors import (
    AlertNotFound,
    AmbiguousMatch,
    EmptyItems,
    EmptyScan,
    Forbidden,
    InvalidRequest,
    InvalidState,
    NoConsultation,
    NoMatch,
    NoPharmacyResolvable,
    PatientNotFound,
    PrescriberVerificationFailed,
    PrescriptionNotFound,
    UnknownDrug,
    UnregisteredPharmacy,
)
from .knowledge import KnowledgeBase
from .models import (
    Alert,
    DrugRecord,
    FingerprintScan,
    FrequentEntry,
    MedicationItem,
    Override,
    PatientRecord,
    Prescription,
    PrintableDocument,
    RxState,
    Session,
    UserType,
    VerifyResult,
)
from .store import Store
from .validator import ensure_overridable, transmittable, validate_draft

#: States whose items count as a patient's active/relevant medications.
ACTIVE_STATES = (RxState.TRANSMITTED, RxState.DISPENSED)


class PrescriptionService:
    def __init__(
        self,
        store: Store,
        auth: AuthService,
        knowledge: KnowledgeBase,
        cbr: CbrEngine,
        config: ServiceConfig,
        clock: Callable[[], datetime] = utcnow,
    ):
        self._store = store
        self._auth = auth
        self._knowledge = knowledge
        self._cbr = cbr
        self._config = config
        self._clock = clock

    # --- drafting ---

    def create_draft(
        self, session: Session, pat_id: str, items: Sequence[MedicationItem | Mapping]
    ) -> Prescription:
        """Open a draft against the patient's latest consultation.

        The safety rules run immediately; a clean (or fully overridden,
        which a fresh draft cannot yet be) draft auto-advances to Validated.
        """
        live = self._auth.require_prescriber(session)
        patient = self._store.get_patient(pat_id)
        if patient is None:
            raise PatientNotFound(f"no patient {pat_id}")
        if not items:
            raise EmptyItems("a prescription needs at least one medication item")
        note = self._store.latest_consultation(pat_id)
        if note is None:
            raise NoConsultation(f"patient {pat_id} has no recorded consultation to prescribe against")

        now = self._clock()
        drugs = self._store.drugs_by_id()
        rx_id = self._store.next_id("rx", "RX")
        built: list[MedicationItem] = []
        for spec_item in items:
            built.append(self._build_item(spec_item, patient, rx_id, now.date(), drugs))

        draft = Prescription(
            rx_id=rx_id,
            pat_id=pat_id,
            prescriber_user=live.user_id,
            state=RxState.DRAFT,
            created_at=now,
            note_id=note.note_id,
            items=tuple(built),
        )
        active = self._active_items(pat_id)
        alerts = validate_draft(
            draft, patient, active, drugs,
            pediatric_age_limit=self._config.pediatric_age_limit,
        )
        state = RxState.VALIDATED if transmittable(alerts) else RxState.DRAFT
        draft = replace(draft, alerts=tuple(alerts), state=state)

        with self._store.transaction():
            self._store.insert_prescription(draft)
        self._store.append_audit(
            now, "rx.drafted", live.user_id,
            {"rx_id": rx_id, "pat_id": pat_id, "alerts": len(alerts), "state": state.value},
        )
        return draft

    def _build_item(
        self,
        spec_item: MedicationItem | Mapping,
        patient: PatientRecord,
        rx_id: str,
        on_date: date,
        drugs: Mapping[str, DrugRecord],
    ) -> MedicationItem:
        if isinstance(spec_item, MedicationItem):
            raw = spec_item.to_dict()
        else:
            raw = dict(spec_item)
        drug_id = raw.get("drug_id") or ""
        drug = drugs.get(drug_id)
        if drug is None:
            raise UnknownDrug(f"drug {drug_id!r} is not in the registry")

        num = raw.get("num")
        refill = int(raw.get("refill") or 0)
        if num is not None and int(num) <= 0:
            raise InvalidRequest("num must be positive when present")
        if refill < 0:
            raise InvalidRequest("refill must be >= 0")
        start_d = _as_date(raw.get("start_d"))
        if start_d is not None and start_d < on_date:
            raise InvalidRequest("start date cannot precede the prescription date")

        return MedicationItem(
            med_id=self._store.next_id("med", "M"),
            rx_id=rx_id,
            pat_id=patient.pat_id,
            drug_id=drug_id,
            pat_name=patient.fullname,
            med_name=drug.name,
            num=int(num) if num is not None else None,
            refill=refill,
            substitute=bool(raw.get("substitute") or False),
            dosage=str(raw.get("dosage") or ""),
            freq=str(raw.get("freq") or ""),
            route=str(raw.get("route") or ""),
            sig=str(raw.get("sig") or ""),
            note=str(raw.get("note") or ""),
            start_d=start_d,
            refill_d=_as_date(raw.get("refill_d")),
            renew_d=_as_date(raw.get("renew_d")),
            date=on_date,
        )

    def _active_items(self, pat_id: str) -> list[MedicationItem]:
        items: list[MedicationItem] = []
        for rx in self._store.prescriptions_for_patient(pat_id, list(ACTIVE_STATES)):
            items.extend(rx.items)
        return items

    # --- overrides ---

    def record_override(self, session: Session, rx_id: str, alert_id: str, reason: str) -> Alert:
        """Attach an override to an interruptive alert on the caller's own draft.

        When the last un-overridden interruption is resolved and nothing
        blocks, the draft advances to Validated.
        """
        live = self._auth.require_prescriber(session)
        rx = self._get_rx(rx_id)
        if rx.prescriber_user != live.user_id:
            raise Forbidden("only the drafting prescriber may override alerts")
        if rx.state is not RxState.DRAFT:
            raise InvalidState(f"cannot override alerts on a {rx.state.value} prescription")
        alert = next((a for a in rx.alerts if a.alert_id == alert_id), None)
        if alert is None:
            raise AlertNotFound(f"no alert {alert_id} on {rx_id}")
        ensure_overridable(alert, reason)

        now = self._clock()
        override = Override(reason=reason, user_id=live.user_id, at=now)
        with self._store.transaction():
            self._store.set_alert_override(rx_id, alert_id, reason, live.user_id, now)
            updated = self._get_rx(rx_id)
            if transmittable(updated.alerts):
                self._store.update_rx_state(rx_id, RxState.DRAFT, RxState.VALIDATED)
        self._store.append_audit(
            now, "alert.overridden", live.user_id,
            {"rx_id": rx_id, "alert_id": alert_id, "reason": reason},
        )
        return alert.with_override(override)

    # --- signing and transmission ---

    def sign_and_transmit(
        self, session: Session, rx_id: str, pharmacy_id: Optional[str] = None
    ) -> Prescription:
        """Stamp the prescriber's license number and send to the central store.

        Pharmacy resolution: explicit choice first, else the patient's
        default pharmacy, else the call fails. A first explicit choice
        becomes the patient's default.
        """
        live = self._auth.require_prescriber(session)
        rx = self._get_rx(rx_id)
        if rx.prescriber_user != live.user_id:
            raise Forbidden("only the drafting prescriber may transmit")
        if rx.state is not RxState.VALIDATED:
            raise InvalidState(f"cannot transmit a {rx.state.value} prescription")
        if not transmittable(rx.alerts):
            raise InvalidState("prescription has unresolved safety alerts")

        patient = self._store.get_patient(rx.pat_id)
        if pharmacy_id is not None:
            if self._store.get_pharmacy(pharmacy_id) is None:
                raise UnregisteredPharmacy(f"pharmacy {pharmacy_id} is not registered")
            pharm_id = pharmacy_id
        elif patient.default_pharmacy is not None:
            pharm_id = patient.default_pharmacy
        else:
            raise NoPharmacyResolvable("no pharmacy chosen and the patient has no default")

        user = self._store.get_user(live.user_id)
        now = self._clock()
        with self._store.transaction():
            moved = self._store.update_rx_state(
                rx_id, RxState.VALIDATED, RxState.TRANSMITTED,
                prescriber_no=user.prescriber_no, pharm_id=pharm_id, transmitted_at=now,
            )
            if not moved:
                raise InvalidState("prescription state changed concurrently")
            self._store.stamp_items_pharmacy(rx_id, pharm_id)
            if patient.default_pharmacy is None:
                self._store.set_default_pharmacy(rx.pat_id, pharm_id)
        self._store.append_audit(
            now, "rx.transmitted", live.user_id,
            {"rx_id": rx_id, "pharmacy": pharm_id, "prescriber_no": user.prescriber_no},
        )
        return self._get_rx(rx_id)

    # --- pharmacy side ---

    def verify_prescriber(self, prescriber_no: str) -> VerifyResult:
        """Valid iff the number belongs to an active registered prescriber."""
        if not prescriber_no:
            return VerifyResult.UNKNOWN
        user = self._store.get_user_by_prescriber_no(prescriber_no)
        if user is None or not user.active:
            return VerifyResult.UNKNOWN
        return VerifyResult.VALID

    def pharmacy_inbox(self, session: Session, pharm_id: str) -> list[Prescription]:
        """Transmitted prescriptions awaiting this pharmacy, oldest first."""
        live = self._auth.require_role(session, UserType.PHARMACIST)
        user = self._store.get_user(live.user_id)
        if user.pharmacy_id != pharm_id:
            raise Forbidden("session is not bound to this pharmacy")
        return self._store.prescriptions_for_pharmacy(pharm_id, RxState.TRANSMITTED)

    def lookup_by_patient_fingerprint(
        self, session: Session, scan: FingerprintScan
    ) -> list[Prescription]:
        """Resolve a walk-in patient by fingerprint and list their active
        prescriptions. Exactly one enrolled template must reach the match
        threshold."""
        self._auth.require_role(session, UserType.PHARMACIST)
        if not scan.data:
            raise EmptyScan("fingerprint scan is empty")
        threshold = self._config.fingerprint_threshold
        matches = [
            p for p in self._store.patients_with_fingerprint()
            if match_fingerprint(p.fingerprint_template, scan) >= threshold
        ]
        if not matches:
            raise NoMatch("no enrolled patient matches the scan")
        if len(matches) > 1:
            raise AmbiguousMatch(
                "multiple patients match the scan",
                details={"pat_ids": [p.pat_id for p in matches]},
            )
        return self._store.prescriptions_for_patient(matches[0].pat_id, [RxState.TRANSMITTED])

    def dispense(self, session: Session, rx_id: str) -> Prescription:
        """Release medication against a verified prescription.

        The prescriber number is re-verified against the registry; an
        unverifiable number rejects the prescription. Success marks it
        Dispensed and retains one case per item, in the same transaction.
        """
        live = self._auth.require_role(session, UserType.PHARMACIST)
        rx = self._get_rx(rx_id)
        if rx.state is not RxState.TRANSMITTED:
            raise InvalidState(f"cannot dispense a {rx.state.value} prescription")
        user = self._store.get_user(live.user_id)
        if user.pharmacy_id != rx.pharmacy:
            raise Forbidden("prescription belongs to a different pharmacy")

        now = self._clock()
        if self.verify_prescriber(rx.prescriber_no or "") is not VerifyResult.VALID:
            reason = f"prescriber number {rx.prescriber_no!r} failed re-verification"
            with self._store.transaction():
                self._store.update_rx_state(
                    rx_id, RxState.TRANSMITTED, RxState.REJECTED, reject_reason=reason
                )
            self._store.append_audit(now, "rx.rejected", live.user_id, {"rx_id": rx_id, "reason": reason})
            raise PrescriberVerificationFailed(reason)

        patient = self._store.get_patient(rx.pat_id)
        note = self._store.get_consultation(rx.note_id)
        with self._store.transaction():
            moved = self._store.update_rx_state(
                rx_id, RxState.TRANSMITTED, RxState.DISPENSED, dispensed_at=now
            )
            if not moved:
                raise InvalidState("prescription state changed concurrently")
            for item in rx.items:
                case = encode_case(note, patient, item, created_at=now)
                self._cbr.retain(case)
        self._store.append_audit(now, "rx.dispensed", live.user_id, {"rx_id": rx_id})
        return self._get_rx(rx_id)

    # --- reporting / rendering ---

    def frequently_prescribed(self, limit: int) -> list[FrequentEntry]:
        """Most-used sig templates over every transmitted or dispensed item.

        Grouped by (drug_id, dosage, freq, route); remaining template fields
        come from the newest item in the group. Ordered by count descending,
        then drug name, drug id, and sig fields ascending.
        """
        if limit < 1:
            raise InvalidRequest("limit must be >= 1")
        drugs = self._store.drugs_by_id()
        groups: dict[tuple[str, str, str, str], list[MedicationItem]] = {}
        for item, _state in self._store.items_with_state(list(ACTIVE_STATES)):
            groups.setdefault((item.drug_id, item.dosage, item.freq, item.route), []).append(item)

        entries = []
        for (drug_id, dosage, freq, route), members in groups.items():
            newest = max(members, key=lambda m: m.med_id or "")
            drug = drugs.get(drug_id)
            name = drug.name if drug is not None else newest.med_name
            entries.append(FrequentEntry(
                drug_id=drug_id, med_name=name, dosage=dosage, freq=freq, route=route,
                num=newest.num, refill=newest.refill, substitute=newest.substitute,
                sig=newest.sig, count=len(members),
            ))
        entries.sort(key=lambda e: (-e.count, e.med_name.lower(), e.drug_id, e.dosage, e.freq, e.route))
        return entries[:limit]

    def render_printable(self, rx_id: str) -> PrintableDocument:
        """Deterministic print document (text + HTML) for a sent prescription."""
        rx = self._get_rx(rx_id)
        if rx.state not in (RxState.TRANSMITTED, RxState.DISPENSED, RxState.REJECTED):
            raise InvalidState(f"cannot print a {rx.state.value} prescription")
        patient = self._store.get_patient(rx.pat_id)
        pharmacy = self._store.get_pharmacy(rx.pharmacy) if rx.pharmacy else None
        prescriber = self._store.get_user(rx.prescriber_user)
        return _render(rx, patient, pharmacy, prescriber)

    # --- helpers ---

    def get_prescription(self, rx_id: str) -> Prescription:
        return self._get_rx(rx_id)

    def _get_rx(self, rx_id: str) -> Prescription:
        rx = self._store.get_prescription(rx_id)
        if rx is None:
            raise PrescriptionNotFound(f"no prescription {rx_id}")
        return rx


def _as_date(value) -> Optional[date]:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


_RULE = "=" * 58


def _render(rx, patient, pharmacy, prescriber) -> PrintableDocument:
    lines = [
        _RULE,
        "ELECTRONIC PRESCRIPTION".center(58),
        _RULE,
        f"Rx ID:       {rx.rx_id}",
        f"Status:      {rx.state.value}",
        f"Written:     {rx.created_at.isoformat()}",
        f"Transmitted: {rx.transmitted_at.isoformat() if rx.transmitted_at else '-'}",
        "",
        "PATIENT",
        f"  Name:      {patient.fullname}",
        f"  ID:        {patient.pat_id}",
        f"  DOB:       {patient.dob.isoformat()}",
        f"  Address:   {patient.address}",
        "",
        "MEDICATIONS",
    ]
    for i, item in enumerate(rx.items, start=1):
        substitution = "permitted" if item.substitute else "not permitted"
        lines += [
            f"  {i}. {item.med_name}",
            f"     Dosage: {item.dosage}  Freq: {item.freq}  Route: {item.route}",
            f"     Quantity: {item.num}  Refills: {item.refill}  Substitution: {substitution}",
            f"     Sig: {item.sig}",
        ]
        if item.note:
            lines.append(f"     Note: {item.note}")
    lines += [
        "",
        "PHARMACY",
        f"  Name:      {pharmacy.name if pharmacy else '-'}",
        f"  Address:   {pharmacy.address if pharmacy else '-'}",
        f"  Phone:     {pharmacy.phone if pharmacy else '-'}",
        "",
        "PRESCRIBER",
        f"  Name:           {prescriber.fullname}",
        f"  Prescriber ID:  {rx.prescriber_no}",
        _RULE,
    ]
    text = "\n".join(lines) + "\n"

    def esc(value) -> str:
        return html_mod.escape(str(value))

    item_rows = []
    for item in rx.items:
        substitution = "permitted" if item.substitute else "not permitted"
        item_rows.append(
            "<li>"
            f"<strong>{esc(item.med_name)}</strong> "
            f"&mdash; dosage {esc(item.dosage)}, freq {esc(item.freq)}, route {esc(item.route)}, "
            f"quantity {esc(item.num)}, refills {esc(item.refill)}, substitution {substitution}"
            f"<div class=\"sig\">Sig: {esc(item.sig)}</div>"
            + (f"<div class=\"note\">Note: {esc(item.note)}</div>" if item.note else "")
            + "</li>"
        )
    html = (
        "<!doctype html><html><head><meta charset=\"utf-8\">"
        f"<title>Prescription {esc(rx.rx_id)}</title></head><body>"
        "<h1>Electronic Prescription</h1>"
        f"<p>Rx {esc(rx.rx_id)} &middot; {esc(rx.state.value)} &middot; "
        f"transmitted {esc(rx.transmitted_at.isoformat() if rx.transmitted_at else '-')}</p>"
        "<h2>Patient</h2>"
        f"<p>{esc(patient.fullname)} ({esc(patient.pat_id)}), born {esc(patient.dob.isoformat())}, "
        f"{esc(patient.address)}</p>"
        "<h2>Medications</h2>"
        f"<ol>{''.join(item_rows)}</ol>"
        "<h2>Pharmacy</h2>"
        f"<p>{esc(pharmacy.name) if pharmacy else '-'}, {esc(pharmacy.address) if pharmacy else '-'}</p>"
        "<h2>Prescriber</h2>"
        f"<p>{esc(prescriber.fullname)} &middot; Prescriber ID {esc(rx.prescriber_no)}</p>"
        "</body></html>"
    )
    return PrintableDocument(text=text, html=html)
