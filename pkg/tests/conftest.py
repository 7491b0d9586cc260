"""Shared fixtures: deterministic clock, fast in-memory service, seeded world."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import pytest

from rxledger.config import ServiceConfig
from rxledger.models import DrugRecord, FingerprintScan, PatientRecord, Pharmacy, Session, UserType
from rxledger.service import RxLedgerService

#: Collected acceptance results, printed in the terminal summary.
ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


class TickClock:
    """Deterministic clock advancing one second per call."""

    def __init__(self, start: datetime | None = None, step_seconds: float = 1.0):
        self.now = start or datetime(2026, 1, 1, 8, 0, 0, tzinfo=timezone.utc)
        self.step = timedelta(seconds=step_seconds)

    def __call__(self) -> datetime:
        self.now += self.step
        return self.now

    def advance(self, **kwargs) -> None:
        self.now += timedelta(**kwargs)


def make_template(seed: int) -> bytes:
    rnd = random.Random(seed)
    return bytes(rnd.randrange(256) for _ in range(512))


def flip_bits(data: bytes, positions) -> bytes:
    out = bytearray(data)
    for pos in positions:
        out[pos // 8] ^= 1 << (pos % 8)
    return bytes(out)


def fast_config(**overrides) -> ServiceConfig:
    defaults = dict(data_dir=":memory:", pbkdf2_iterations=400, session_ttl_minutes=30)
    defaults.update(overrides)
    return ServiceConfig(**defaults)


BASE_DRUGS = [
    {
        "name": "Artemether/Lumefantrine",
        "legal_class": "POM",
        "pharmacological_class": "antimalarial",
        "indications": "uncomplicated falciparum malaria",
        "adult_usage": "80/480 mg twice daily for 3 days",
        "children_usage": "weight-banded dosing per chart",
        "interactions": "",
    },
    {
        "name": "Amoxicillin",
        "pharmacological_class": "penicillin antibiotic",
        "indications": "susceptible bacterial infections",
        "adult_usage": "500 mg three times daily",
        "children_usage": "",
        "interactions": "warfarin; methotrexate",
    },
    {
        "name": "Warfarin",
        "pharmacological_class": "anticoagulant",
        "adult_usage": "titrate to INR",
        "children_usage": "",
        "interactions": "",
    },
    {
        "name": "Paracetamol",
        "pharmacological_class": "analgesic antipyretic",
        "adult_usage": "500-1000 mg every 4-6 hours",
        "children_usage": "10-15 mg/kg every 4-6 hours",
        "interactions": "",
    },
    {
        "name": "Cotrimoxazole",
        "pharmacological_class": "sulfonamide antibiotic",
        "adult_usage": "960 mg twice daily",
        "children_usage": "weight-based suspension",
        "interactions": "warfarin",
    },
]


@dataclass
class World:
    svc: RxLedgerService
    clock: TickClock
    admin_fp: bytes
    doc_fp: bytes
    doc2_fp: bytes
    pharm_fp: bytes
    admin_sess: Session
    doc_sess: Session
    doc2_sess: Session
    pharm_sess: Session
    pharm2_sess: Session
    pharmacy1: Pharmacy
    pharmacy2: Pharmacy
    drugs: dict[str, DrugRecord] = field(default_factory=dict)

    def drug_id(self, name: str) -> str:
        return self.drugs[name].drug_id

    def register_patient(self, fullname: str, dob: str = "1990-04-01", allergy: str = "",
                         fingerprint: bytes | None = None, default_pharmacy: str | None = None) -> PatientRecord:
        scan = FingerprintScan(fingerprint) if fingerprint else None
        return self.svc.kb.register_patient(
            self.doc_sess, fullname, "0800-000", dob, "12 Example Lane",
            allergy, "teacher", default_pharmacy, scan,
        )

    def consult(self, pat_id: str, nature: str = "p.falciparum malaria",
                description: str = "fever and chills"):
        return self.svc.kb.record_consultation(self.doc_sess, pat_id, nature, description)

    def clean_item(self, drug_name: str = "Artemether/Lumefantrine", **overrides) -> dict:
        item = {
            "drug_id": self.drug_id(drug_name),
            "num": 12,
            "refill": 0,
            "substitute": False,
            "dosage": "80/480 mg",
            "freq": "twice daily",
            "route": "oral",
            "sig": "take with food",
        }
        item.update(overrides)
        return item


def build_world(svc: RxLedgerService, clock: TickClock) -> World:
    auth = svc.auth
    admin_fp = make_template(1)
    doc_fp = make_template(2)
    doc2_fp = make_template(3)
    pharm_fp = make_template(4)
    pharm2_fp = make_template(5)

    auth.bootstrap_admin("admin", "Admin Achebe", "0800", "pw-admin",
                         FingerprintScan(admin_fp), "MD-000001")
    admin_sess = auth.authenticate("admin", "pw-admin", FingerprintScan(admin_fp))

    pharmacy1 = svc.kb.register_pharmacy(admin_sess, "Central Pharmacy", "1 Market Rd", "0700", "rx@central.example")
    pharmacy2 = svc.kb.register_pharmacy(admin_sess, "Harbour Pharmacy", "9 Quay St", "0701", None)

    auth.enroll_user(admin_sess, "drA", "Dr. Amaka Obi", UserType.PHYSICIAN, "0801",
                     "pw-doc", FingerprintScan(doc_fp), "MD-000002")
    auth.enroll_user(admin_sess, "drB", "Dr. Bode Sanni", UserType.PHYSICIAN, "0802",
                     "pw-doc2", FingerprintScan(doc2_fp), "MD-000003")
    auth.enroll_user(admin_sess, "pharm1", "Pharm. Chidi Eze", UserType.PHARMACIST, "0803",
                     "pw-ph1", FingerprintScan(pharm_fp), None, pharmacy1.pharm_id)
    auth.enroll_user(admin_sess, "pharm2", "Pharm. Dayo Alabi", UserType.PHARMACIST, "0804",
                     "pw-ph2", FingerprintScan(pharm2_fp), None, pharmacy2.pharm_id)

    doc_sess = auth.authenticate("drA", "pw-doc", FingerprintScan(doc_fp))
    doc2_sess = auth.authenticate("drB", "pw-doc2", FingerprintScan(doc2_fp))
    pharm_sess = auth.authenticate("pharm1", "pw-ph1", FingerprintScan(pharm_fp))
    pharm2_sess = auth.authenticate("pharm2", "pw-ph2", FingerprintScan(pharm2_fp))

    svc.kb.seed_drugs([dict(d) for d in BASE_DRUGS])
    drugs = {d.name: d for d in svc.kb.list_drugs()}

    return World(
        svc=svc, clock=clock,
        admin_fp=admin_fp, doc_fp=doc_fp, doc2_fp=doc2_fp, pharm_fp=pharm_fp,
        admin_sess=admin_sess, doc_sess=doc_sess, doc2_sess=doc2_sess,
        pharm_sess=pharm_sess, pharm2_sess=pharm2_sess,
        pharmacy1=pharmacy1, pharmacy2=pharmacy2, drugs=drugs,
    )


@pytest.fixture
def clock() -> TickClock:
    return TickClock()


@pytest.fixture
def svc(clock) -> RxLedgerService:
    service = RxLedgerService(fast_config(), clock=clock)
    yield service
    service.close()


@pytest.fixture
def world(svc, clock) -> World:
    return build_world(svc, clock)


def record_acceptance(name: str, passed: bool = True) -> None:
    ACCEPTANCE_RESULTS.append((name, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{status}] {name}")
