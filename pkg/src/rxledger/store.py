"""Embedded transactional store.

Single-node sqlite database under the service data directory. Table names
mirror the service's relational model (users, druglist, medication,
pharmacist, patient) plus lifecycle tables for prescriptions, alerts,
consultations, retained cases, and the append-only audit log.

Concurrency: one connection guarded by an RLock; every write runs inside an
explicit transaction, so multi-step operations (dispense + case retention)
commit or roll back atomically. Reads take the same lock, which makes each
read call snapshot-consistent.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from datetime import date, datetime
from typing import Any, Iterator, Optional, Sequence

from .models import (
    AgeBand,
    Alert,
    Case,
    ConsultationNote,
    DrugRecord,
    MedicationItem,
    Override,
    PatientRecord,
    Pharmacy,
    Prescription,
    RuleId,
    RxState,
    Severity,
    SigBundle,
    UserRecord,
    UserType,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    password_digest BLOB NOT NULL,
    salt BLOB NOT NULL,
    iterations INTEGER NOT NULL,
    fullname TEXT NOT NULL,
    user_type TEXT NOT NULL,
    phone_no TEXT NOT NULL DEFAULT '',
    fingerprint BLOB NOT NULL,
    prescriber_no TEXT,
    pharmacy_id TEXT,
    active INTEGER NOT NULL DEFAULT 1
);
CREATE UNIQUE INDEX IF NOT EXISTS ux_users_prescriber
    ON users(prescriber_no) WHERE prescriber_no IS NOT NULL;

CREATE TABLE IF NOT EXISTS druglist (
    drug_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    legal_class TEXT, manufacturer TEXT, pharmacological_class TEXT,
    general_description TEXT, indications TEXT, adult_usage TEXT,
    children_usage TEXT, contraindications TEXT, precautions TEXT,
    interactions TEXT, adverse_reactions TEXT, how_supplied TEXT
);
CREATE UNIQUE INDEX IF NOT EXISTS ux_druglist_name ON druglist(lower(name));

CREATE TABLE IF NOT EXISTS patient (
    pat_id TEXT PRIMARY KEY,
    use_id TEXT NOT NULL,
    fullname TEXT NOT NULL,
    phone TEXT NOT NULL DEFAULT '',
    dob TEXT NOT NULL,
    address TEXT NOT NULL DEFAULT '',
    drug_allergy TEXT NOT NULL DEFAULT '[]',
    occupation TEXT NOT NULL DEFAULT '',
    pharmacist TEXT,
    fingerprint BLOB
);

CREATE TABLE IF NOT EXISTS pharmacist (
    pharm_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    address TEXT NOT NULL DEFAULT '',
    phone TEXT NOT NULL DEFAULT '',
    email TEXT
);
CREATE UNIQUE INDEX IF NOT EXISTS ux_pharmacist_name ON pharmacist(lower(name));

CREATE TABLE IF NOT EXISTS consultation (
    note_id TEXT PRIMARY KEY,
    pat_id TEXT NOT NULL,
    author TEXT NOT NULL,
    nature TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    recorded_at TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS prescription (
    rx_id TEXT PRIMARY KEY,
    pat_id TEXT NOT NULL,
    prescriber_user TEXT NOT NULL,
    prescriber_no TEXT,
    pharm_id TEXT,
    state TEXT NOT NULL,
    note_id TEXT NOT NULL,
    reject_reason TEXT,
    created_at TEXT NOT NULL,
    transmitted_at TEXT,
    dispensed_at TEXT
);

CREATE TABLE IF NOT EXISTS medication (
    med_id TEXT PRIMARY KEY,
    rx_id TEXT NOT NULL,
    item_index INTEGER NOT NULL,
    pat_id TEXT NOT NULL,
    drug_id TEXT NOT NULL,
    pat_name TEXT NOT NULL DEFAULT '',
    med_name TEXT NOT NULL DEFAULT '',
    num INTEGER,
    refill INTEGER NOT NULL DEFAULT 0,
    substitute INTEGER NOT NULL DEFAULT 0,
    dosage TEXT NOT NULL DEFAULT '',
    freq TEXT NOT NULL DEFAULT '',
    route TEXT NOT NULL DEFAULT '',
    sig TEXT NOT NULL DEFAULT '',
    note TEXT NOT NULL DEFAULT '',
    start_d TEXT, refill_d TEXT, renew_d TEXT,
    pharmacist TEXT,
    date TEXT
);
CREATE INDEX IF NOT EXISTS ix_medication_rx ON medication(rx_id);
CREATE INDEX IF NOT EXISTS ix_medication_pat ON medication(pat_id);

CREATE TABLE IF NOT EXISTS alert (
    rx_id TEXT NOT NULL,
    alert_id TEXT NOT NULL,
    position INTEGER NOT NULL,
    rule_id TEXT NOT NULL,
    severity TEXT NOT NULL,
    message TEXT NOT NULL,
    override_reason TEXT,
    override_user TEXT,
    override_at TEXT,
    PRIMARY KEY (rx_id, alert_id)
);

CREATE TABLE IF NOT EXISTS case_memory (
    case_id TEXT PRIMARY KEY,
    diagnosis_terms TEXT NOT NULL,
    age_band TEXT NOT NULL,
    allergy_set TEXT NOT NULL,
    drug_id TEXT NOT NULL,
    dosage TEXT NOT NULL, freq TEXT NOT NULL, route TEXT NOT NULL,
    num INTEGER NOT NULL, refill INTEGER NOT NULL, substitute INTEGER NOT NULL,
    sig TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS audit_log (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    event TEXT NOT NULL,
    user_id TEXT,
    detail TEXT NOT NULL DEFAULT '{}'
);

CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""

_SNAPSHOT_TABLES = (
    "users", "druglist", "patient", "pharmacist", "consultation",
    "prescription", "medication", "alert", "case_memory", "audit_log", "meta",
)


def _dt(value: str | None) -> Optional[datetime]:
    return datetime.fromisoformat(value) if value else None


def _d(value: str | None) -> Optional[date]:
    return date.fromisoformat(value) if value else None


def _opt_iso(value: date | datetime | None) -> str | None:
    return value.isoformat() if value is not None else None


class Store:
    """sqlite-backed persistence for every entity the service owns."""

    def __init__(self, path: str = ":memory:"):
        self.path = path
        self._lock = threading.RLock()
        self._txn_depth = 0
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.isolation_level = None  # explicit transactions only
        self._conn.row_factory = sqlite3.Row
        with self._lock:
            if path != ":memory:":
                self._conn.execute("PRAGMA journal_mode=WAL")
                self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    @contextmanager
    def transaction(self) -> Iterator[sqlite3.Connection]:
        """Serialize a write; nested uses join the outermost transaction."""
        with self._lock:
            if self._txn_depth == 0:
                self._conn.execute("BEGIN IMMEDIATE")
            self._txn_depth += 1
            try:
                yield self._conn
            except BaseException:
                self._txn_depth -= 1
                if self._txn_depth == 0:
                    self._conn.execute("ROLLBACK")
                raise
            else:
                self._txn_depth -= 1
                if self._txn_depth == 0:
                    self._conn.execute("COMMIT")

    def _read(self, sql: str, params: Sequence[Any] = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, params).fetchall()

    def _read_one(self, sql: str, params: Sequence[Any] = ()) -> Optional[sqlite3.Row]:
        rows = self._read(sql, params)
        return rows[0] if rows else None

    # --- sequences / meta ---

    def next_id(self, name: str, prefix: str, width: int = 6) -> str:
        with self.transaction() as conn:
            key = f"seq:{name}"
            row = conn.execute("SELECT value FROM meta WHERE key=?", (key,)).fetchone()
            n = int(row["value"]) + 1 if row else 1
            conn.execute(
                "INSERT INTO meta(key,value) VALUES(?,?) "
                "ON CONFLICT(key) DO UPDATE SET value=excluded.value",
                (key, str(n)),
            )
        return f"{prefix}{n:0{width}d}"

    def get_meta(self, key: str, default: str = "0") -> str:
        row = self._read_one("SELECT value FROM meta WHERE key=?", (key,))
        return row["value"] if row else default

    def set_meta(self, key: str, value: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO meta(key,value) VALUES(?,?) "
                "ON CONFLICT(key) DO UPDATE SET value=excluded.value",
                (key, value),
            )

    # --- users ---

    def insert_user(self, user: UserRecord) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO users(user_id,password_digest,salt,iterations,fullname,"
                "user_type,phone_no,fingerprint,prescriber_no,pharmacy_id,active) "
                "VALUES(?,?,?,?,?,?,?,?,?,?,?)",
                (
                    user.user_id, user.password_digest, user.salt, user.iterations,
                    user.fullname, user.user_type.value, user.phone_no,
                    user.fingerprint_template, user.prescriber_no, user.pharmacy_id,
                    int(user.active),
                ),
            )

    def get_user(self, user_id: str) -> Optional[UserRecord]:
        row = self._read_one("SELECT * FROM users WHERE user_id=?", (user_id,))
        return self._user_from_row(row) if row else None

    def get_user_by_prescriber_no(self, prescriber_no: str) -> Optional[UserRecord]:
        row = self._read_one("SELECT * FROM users WHERE prescriber_no=?", (prescriber_no,))
        return self._user_from_row(row) if row else None

    def set_user_active(self, user_id: str, active: bool) -> None:
        with self.transaction() as conn:
            conn.execute("UPDATE users SET active=? WHERE user_id=?", (int(active), user_id))

    def count_users(self, user_type: UserType | None = None) -> int:
        if user_type is None:
            row = self._read_one("SELECT COUNT(*) AS n FROM users")
        else:
            row = self._read_one(
                "SELECT COUNT(*) AS n FROM users WHERE user_type=?", (user_type.value,)
            )
        return int(row["n"])

    @staticmethod
    def _user_from_row(row: sqlite3.Row) -> UserRecord:
        return UserRecord(
            user_id=row["user_id"],
            password_digest=row["password_digest"],
            salt=row["salt"],
            iterations=row["iterations"],
            fullname=row["fullname"],
            user_type=UserType(row["user_type"]),
            phone_no=row["phone_no"],
            fingerprint_template=row["fingerprint"],
            prescriber_no=row["prescriber_no"],
            pharmacy_id=row["pharmacy_id"],
            active=bool(row["active"]),
        )

    # --- drugs ---

    def put_drug(self, drug: DrugRecord) -> None:
        d = drug.to_dict()
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO druglist(drug_id,name,legal_class,manufacturer,"
                "pharmacological_class,general_description,indications,adult_usage,"
                "children_usage,contraindications,precautions,interactions,"
                "adverse_reactions,how_supplied) "
                "VALUES(:drug_id,:name,:legal_class,:manufacturer,"
                ":pharmacological_class,:general_description,:indications,"
                ":adult_usage,:children_usage,:contraindications,:precautions,"
                ":interactions,:adverse_reactions,:how_supplied) "
                "ON CONFLICT(drug_id) DO UPDATE SET "
                "name=excluded.name, legal_class=excluded.legal_class, "
                "manufacturer=excluded.manufacturer, "
                "pharmacological_class=excluded.pharmacological_class, "
                "general_description=excluded.general_description, "
                "indications=excluded.indications, adult_usage=excluded.adult_usage, "
                "children_usage=excluded.children_usage, "
                "contraindications=excluded.contraindications, "
                "precautions=excluded.precautions, interactions=excluded.interactions, "
                "adverse_reactions=excluded.adverse_reactions, "
                "how_supplied=excluded.how_supplied",
                d,
            )

    def get_drug(self, drug_id: str) -> Optional[DrugRecord]:
        row = self._read_one("SELECT * FROM druglist WHERE drug_id=?", (drug_id,))
        return self._drug_from_row(row) if row else None

    def get_drug_by_name(self, name: str) -> Optional[DrugRecord]:
        row = self._read_one("SELECT * FROM druglist WHERE lower(name)=?", (name.lower(),))
        return self._drug_from_row(row) if row else None

    def list_drugs(self) -> list[DrugRecord]:
        return [self._drug_from_row(r) for r in self._read("SELECT * FROM druglist ORDER BY drug_id")]

    def drugs_by_id(self) -> dict[str, DrugRecord]:
        return {d.drug_id: d for d in self.list_drugs()}

    def delete_drug(self, drug_id: str) -> None:
        """Operational withdrawal of a monograph; not exposed over the API."""
        with self.transaction() as conn:
            conn.execute("DELETE FROM druglist WHERE drug_id=?", (drug_id,))

    @staticmethod
    def _drug_from_row(row: sqlite3.Row) -> DrugRecord:
        return DrugRecord(**{k: row[k] for k in row.keys()})

    # --- patients ---

    def insert_patient(self, patient: PatientRecord) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO patient(pat_id,use_id,fullname,phone,dob,address,"
                "drug_allergy,occupation,pharmacist,fingerprint) "
                "VALUES(?,?,?,?,?,?,?,?,?,?)",
                (
                    patient.pat_id, patient.registered_by, patient.fullname,
                    patient.phone, patient.dob.isoformat(), patient.address,
                    json.dumps(sorted(patient.drug_allergy)), patient.occupation,
                    patient.default_pharmacy, patient.fingerprint_template,
                ),
            )

    def get_patient(self, pat_id: str) -> Optional[PatientRecord]:
        row = self._read_one("SELECT * FROM patient WHERE pat_id=?", (pat_id,))
        return self._patient_from_row(row) if row else None

    def search_patients(self, prefix: str, limit: int) -> list[tuple[str, str]]:
        rows = self._read(
            "SELECT pat_id, fullname FROM patient "
            "WHERE lower(fullname) LIKE ? ESCAPE '\\' "
            "ORDER BY lower(fullname), pat_id LIMIT ?",
            (_escape_like(prefix.lower()) + "%", limit),
        )
        return [(r["pat_id"], r["fullname"]) for r in rows]

    def set_default_pharmacy(self, pat_id: str, pharm_id: str) -> None:
        with self.transaction() as conn:
            conn.execute("UPDATE patient SET pharmacist=? WHERE pat_id=?", (pharm_id, pat_id))

    def patients_with_fingerprint(self) -> list[PatientRecord]:
        rows = self._read(
            "SELECT * FROM patient WHERE fingerprint IS NOT NULL ORDER BY pat_id"
        )
        return [self._patient_from_row(r) for r in rows]

    @staticmethod
    def _patient_from_row(row: sqlite3.Row) -> PatientRecord:
        return PatientRecord(
            pat_id=row["pat_id"],
            registered_by=row["use_id"],
            fullname=row["fullname"],
            phone=row["phone"],
            dob=date.fromisoformat(row["dob"]),
            address=row["address"],
            drug_allergy=frozenset(json.loads(row["drug_allergy"])),
            occupation=row["occupation"],
            default_pharmacy=row["pharmacist"],
            fingerprint_template=row["fingerprint"],
        )

    # --- pharmacies ---

    def insert_pharmacy(self, pharmacy: Pharmacy) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO pharmacist(pharm_id,name,address,phone,email) VALUES(?,?,?,?,?)",
                (pharmacy.pharm_id, pharmacy.name, pharmacy.address, pharmacy.phone, pharmacy.email),
            )

    def get_pharmacy(self, pharm_id: str) -> Optional[Pharmacy]:
        row = self._read_one("SELECT * FROM pharmacist WHERE pharm_id=?", (pharm_id,))
        return self._pharmacy_from_row(row) if row else None

    def get_pharmacy_by_name(self, name: str) -> Optional[Pharmacy]:
        row = self._read_one("SELECT * FROM pharmacist WHERE lower(name)=?", (name.lower(),))
        return self._pharmacy_from_row(row) if row else None

    def list_pharmacies(self) -> list[Pharmacy]:
        return [self._pharmacy_from_row(r) for r in self._read("SELECT * FROM pharmacist ORDER BY pharm_id")]

    @staticmethod
    def _pharmacy_from_row(row: sqlite3.Row) -> Pharmacy:
        return Pharmacy(
            pharm_id=row["pharm_id"], name=row["name"], address=row["address"],
            phone=row["phone"], email=row["email"],
        )

    # --- consultations ---

    def insert_consultation(self, note: ConsultationNote) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO consultation(note_id,pat_id,author,nature,description,recorded_at) "
                "VALUES(?,?,?,?,?,?)",
                (note.note_id, note.pat_id, note.author, note.nature,
                 note.description, note.recorded_at.isoformat()),
            )

    def get_consultation(self, note_id: str) -> Optional[ConsultationNote]:
        row = self._read_one("SELECT * FROM consultation WHERE note_id=?", (note_id,))
        return self._note_from_row(row) if row else None

    def consultations_for_patient(self, pat_id: str) -> list[ConsultationNote]:
        rows = self._read(
            "SELECT * FROM consultation WHERE pat_id=? ORDER BY recorded_at, note_id",
            (pat_id,),
        )
        return [self._note_from_row(r) for r in rows]

    def latest_consultation(self, pat_id: str) -> Optional[ConsultationNote]:
        row = self._read_one(
            "SELECT * FROM consultation WHERE pat_id=? ORDER BY recorded_at DESC, note_id DESC LIMIT 1",
            (pat_id,),
        )
        return self._note_from_row(row) if row else None

    def count_consultations(self) -> int:
        return int(self._read_one("SELECT COUNT(*) AS n FROM consultation")["n"])

    @staticmethod
    def _note_from_row(row: sqlite3.Row) -> ConsultationNote:
        return ConsultationNote(
            note_id=row["note_id"], pat_id=row["pat_id"], author=row["author"],
            nature=row["nature"], description=row["description"],
            recorded_at=datetime.fromisoformat(row["recorded_at"]),
        )

    # --- prescriptions ---

    def insert_prescription(self, rx: Prescription) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO prescription(rx_id,pat_id,prescriber_user,prescriber_no,"
                "pharm_id,state,note_id,reject_reason,created_at,transmitted_at,dispensed_at) "
                "VALUES(?,?,?,?,?,?,?,?,?,?,?)",
                (
                    rx.rx_id, rx.pat_id, rx.prescriber_user, rx.prescriber_no,
                    rx.pharmacy, rx.state.value, rx.note_id, rx.reject_reason,
                    rx.created_at.isoformat(), _opt_iso(rx.transmitted_at),
                    _opt_iso(rx.dispensed_at),
                ),
            )
            for idx, item in enumerate(rx.items):
                conn.execute(
                    "INSERT INTO medication(med_id,rx_id,item_index,pat_id,drug_id,"
                    "pat_name,med_name,num,refill,substitute,dosage,freq,route,sig,"
                    "note,start_d,refill_d,renew_d,pharmacist,date) "
                    "VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
                    (
                        item.med_id, rx.rx_id, idx, item.pat_id, item.drug_id,
                        item.pat_name, item.med_name, item.num, item.refill,
                        int(item.substitute), item.dosage, item.freq, item.route,
                        item.sig, item.note, _opt_iso(item.start_d),
                        _opt_iso(item.refill_d), _opt_iso(item.renew_d),
                        item.pharmacist, _opt_iso(item.date),
                    ),
                )
            for pos, alert in enumerate(rx.alerts):
                conn.execute(
                    "INSERT INTO alert(rx_id,alert_id,position,rule_id,severity,message,"
                    "override_reason,override_user,override_at) VALUES(?,?,?,?,?,?,?,?,?)",
                    (
                        rx.rx_id, alert.alert_id, pos, alert.rule_id.value,
                        alert.severity.value, alert.message,
                        alert.override.reason if alert.override else None,
                        alert.override.user_id if alert.override else None,
                        alert.override.at.isoformat() if alert.override else None,
                    ),
                )

    def get_prescription(self, rx_id: str) -> Optional[Prescription]:
        row = self._read_one("SELECT * FROM prescription WHERE rx_id=?", (rx_id,))
        if row is None:
            return None
        return self._assemble_rx(row)

    def _assemble_rx(self, row: sqlite3.Row) -> Prescription:
        items = [
            self._item_from_row(r)
            for r in self._read(
                "SELECT * FROM medication WHERE rx_id=? ORDER BY item_index", (row["rx_id"],)
            )
        ]
        alerts = [
            self._alert_from_row(r)
            for r in self._read(
                "SELECT * FROM alert WHERE rx_id=? ORDER BY position", (row["rx_id"],)
            )
        ]
        return Prescription(
            rx_id=row["rx_id"],
            pat_id=row["pat_id"],
            prescriber_user=row["prescriber_user"],
            prescriber_no=row["prescriber_no"],
            pharmacy=row["pharm_id"],
            state=RxState(row["state"]),
            note_id=row["note_id"],
            reject_reason=row["reject_reason"],
            created_at=datetime.fromisoformat(row["created_at"]),
            transmitted_at=_dt(row["transmitted_at"]),
            dispensed_at=_dt(row["dispensed_at"]),
            items=tuple(items),
            alerts=tuple(alerts),
        )

    def update_rx_state(
        self,
        rx_id: str,
        expect: RxState,
        new: RxState,
        *,
        prescriber_no: str | None = None,
        pharm_id: str | None = None,
        transmitted_at: datetime | None = None,
        dispensed_at: datetime | None = None,
        reject_reason: str | None = None,
    ) -> bool:
        """Compare-and-set state transition; returns False if expect no longer holds."""
        with self.transaction() as conn:
            row = conn.execute(
                "SELECT state FROM prescription WHERE rx_id=?", (rx_id,)
            ).fetchone()
            if row is None or RxState(row["state"]) is not expect:
                return False
            sets = ["state=?"]
            params: list[Any] = [new.value]
            if prescriber_no is not None:
                sets.append("prescriber_no=?")
                params.append(prescriber_no)
            if pharm_id is not None:
                sets.append("pharm_id=?")
                params.append(pharm_id)
            if transmitted_at is not None:
                sets.append("transmitted_at=?")
                params.append(transmitted_at.isoformat())
            if dispensed_at is not None:
                sets.append("dispensed_at=?")
                params.append(dispensed_at.isoformat())
            if reject_reason is not None:
                sets.append("reject_reason=?")
                params.append(reject_reason)
            params.append(rx_id)
            conn.execute(f"UPDATE prescription SET {', '.join(sets)} WHERE rx_id=?", params)
            return True

    def stamp_items_pharmacy(self, rx_id: str, pharm_id: str) -> None:
        with self.transaction() as conn:
            conn.execute("UPDATE medication SET pharmacist=? WHERE rx_id=?", (pharm_id, rx_id))

    def set_alert_override(
        self, rx_id: str, alert_id: str, reason: str, user_id: str, at: datetime
    ) -> None:
        with self.transaction() as conn:
            conn.execute(
                "UPDATE alert SET override_reason=?, override_user=?, override_at=? "
                "WHERE rx_id=? AND alert_id=?",
                (reason, user_id, at.isoformat(), rx_id, alert_id),
            )

    def prescriptions_for_pharmacy(self, pharm_id: str, state: RxState) -> list[Prescription]:
        rows = self._read(
            "SELECT * FROM prescription WHERE pharm_id=? AND state=? "
            "ORDER BY transmitted_at, rx_id",
            (pharm_id, state.value),
        )
        return [self._assemble_rx(r) for r in rows]

    def prescriptions_for_patient(self, pat_id: str, states: Sequence[RxState]) -> list[Prescription]:
        marks = ",".join("?" for _ in states)
        rows = self._read(
            f"SELECT * FROM prescription WHERE pat_id=? AND state IN ({marks}) "
            "ORDER BY transmitted_at, rx_id",
            (pat_id, *[s.value for s in states]),
        )
        return [self._assemble_rx(r) for r in rows]

    def list_prescriptions(self) -> list[Prescription]:
        return [self._assemble_rx(r) for r in self._read("SELECT * FROM prescription ORDER BY rx_id")]

    def items_with_state(self, states: Sequence[RxState]) -> list[tuple[MedicationItem, RxState]]:
        """Every medication item whose prescription is in one of ``states``."""
        marks = ",".join("?" for _ in states)
        rows = self._read(
            f"SELECT m.*, p.state AS rx_state FROM medication m "
            f"JOIN prescription p ON p.rx_id = m.rx_id "
            f"WHERE p.state IN ({marks}) ORDER BY m.med_id",
            [s.value for s in states],
        )
        return [(self._item_from_row(r), RxState(r["rx_state"])) for r in rows]

    @staticmethod
    def _item_from_row(row: sqlite3.Row) -> MedicationItem:
        return MedicationItem(
            med_id=row["med_id"],
            rx_id=row["rx_id"],
            pat_id=row["pat_id"],
            drug_id=row["drug_id"],
            pat_name=row["pat_name"],
            med_name=row["med_name"],
            num=row["num"],
            refill=row["refill"],
            substitute=bool(row["substitute"]),
            dosage=row["dosage"],
            freq=row["freq"],
            route=row["route"],
            sig=row["sig"],
            note=row["note"],
            start_d=_d(row["start_d"]),
            refill_d=_d(row["refill_d"]),
            renew_d=_d(row["renew_d"]),
            date=_d(row["date"]),
            pharmacist=row["pharmacist"],
        )

    @staticmethod
    def _alert_from_row(row: sqlite3.Row) -> Alert:
        override = None
        if row["override_reason"] is not None:
            override = Override(
                reason=row["override_reason"],
                user_id=row["override_user"],
                at=datetime.fromisoformat(row["override_at"]),
            )
        return Alert(
            alert_id=row["alert_id"],
            rule_id=RuleId(row["rule_id"]),
            severity=Severity(row["severity"]),
            message=row["message"],
            override=override,
        )

    # --- case memory ---

    def insert_case(self, case: Case) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO case_memory(case_id,diagnosis_terms,age_band,allergy_set,"
                "drug_id,dosage,freq,route,num,refill,substitute,sig,created_at) "
                "VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    case.case_id, json.dumps(sorted(case.diagnosis_terms)),
                    case.age_band.value, json.dumps(sorted(case.allergy_set)),
                    case.drug_id, case.sig_bundle.dosage, case.sig_bundle.freq,
                    case.sig_bundle.route, case.sig_bundle.num, case.sig_bundle.refill,
                    int(case.sig_bundle.substitute), case.sig_bundle.sig,
                    case.created_at.isoformat(),
                ),
            )

    def all_cases(self) -> list[Case]:
        return [self._case_from_row(r) for r in self._read("SELECT * FROM case_memory ORDER BY case_id")]

    def count_cases(self) -> int:
        return int(self._read_one("SELECT COUNT(*) AS n FROM case_memory")["n"])

    @staticmethod
    def _case_from_row(row: sqlite3.Row) -> Case:
        return Case(
            case_id=row["case_id"],
            diagnosis_terms=frozenset(json.loads(row["diagnosis_terms"])),
            age_band=AgeBand(row["age_band"]),
            allergy_set=frozenset(json.loads(row["allergy_set"])),
            drug_id=row["drug_id"],
            sig_bundle=SigBundle(
                dosage=row["dosage"], freq=row["freq"], route=row["route"],
                num=row["num"], refill=row["refill"], substitute=bool(row["substitute"]),
                sig=row["sig"],
            ),
            created_at=datetime.fromisoformat(row["created_at"]),
        )

    # --- audit log (append-only) ---

    def append_audit(self, at: datetime, event: str, user_id: str | None, detail: dict[str, Any]) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO audit_log(at,event,user_id,detail) VALUES(?,?,?,?)",
                (at.isoformat(), event, user_id, json.dumps(detail, sort_keys=True)),
            )

    def audit_entries(self, event_prefix: str = "") -> list[dict[str, Any]]:
        rows = self._read(
            "SELECT * FROM audit_log WHERE event LIKE ? ORDER BY seq",
            (_escape_like(event_prefix) + "%",),
        )
        return [
            {
                "seq": r["seq"], "at": r["at"], "event": r["event"],
                "user_id": r["user_id"], "detail": json.loads(r["detail"]),
            }
            for r in rows
        ]

    # --- snapshot for backup / persistence verification ---

    def snapshot(self) -> dict[str, list[dict[str, Any]]]:
        """Deterministic dump of every table, bytes rendered as hex."""
        out: dict[str, list[dict[str, Any]]] = {}
        with self._lock:
            for table in _SNAPSHOT_TABLES:
                rows = self._conn.execute(f"SELECT * FROM {table}").fetchall()
                dumped = []
                for row in rows:
                    entry = {}
                    for key in row.keys():
                        value = row[key]
                        entry[key] = value.hex() if isinstance(value, bytes) else value
                    dumped.append(entry)
                dumped.sort(key=lambda e: json.dumps(e, sort_keys=True, default=str))
                out[table] = dumped
        return out


def _escape_like(text: str) -> str:
    return text.replace("\\", "\\\\").replace("%", "\\%").replace("_", "\\_")
