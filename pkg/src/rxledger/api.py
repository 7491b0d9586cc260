"""HTTP gateway.

JSON over HTTP; every endpoint except login requires a session token in the
``X-Session-Token`` header. Fingerprint payloads travel base64-encoded. Role
checks live in the service operations — the gateway only resolves the
session and passes it through, so endpoint privileges cannot drift from the
operations they expose.

Errors are serialized as ``{"code": ..., "message": ..., "details": ...}``
with the code drawn from the closed enumeration in :mod:`rxledger.errors`;
stack traces and credential material never leave the process.
"""

from __future__ import annotations

import base64
import logging
from typing import Any, NamedTuple, Optional

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .cbr import age_band
from .errors import InvalidRequest, RxError
from .models import CaseQuery, DrugRecord, FingerprintScan, Session, UserType
from .service import RxLedgerService
from .terms import normalize_terms

logger = logging.getLogger(__name__)


class Endpoint(NamedTuple):
    method: str
    path: str
    operation: str


#: The documented wire surface, tested one-to-one against the route registry.
ENDPOINTS: tuple[Endpoint, ...] = (
    Endpoint("POST", "/auth/login", "auth.authenticate"),
    Endpoint("POST", "/users", "auth.enroll_user"),
    Endpoint("GET", "/patients", "kb.search_patients"),
    Endpoint("POST", "/patients", "kb.register_patient"),
    Endpoint("GET", "/patients/{pat_id}", "kb.get_patient"),
    Endpoint("POST", "/patients/{pat_id}/consultations", "kb.record_consultation"),
    Endpoint("GET", "/patients/{pat_id}/history", "kb.get_history"),
    Endpoint("GET", "/patients/{pat_id}/patterns", "cbr.patient_patterns"),
    Endpoint("POST", "/cbr/retrieve", "cbr.retrieve+adapt"),
    Endpoint("GET", "/drugs/{drug_id}", "kb.get_drug_info"),
    Endpoint("POST", "/drugs", "kb.upsert_drug"),
    Endpoint("PUT", "/drugs/{drug_id}", "kb.upsert_drug"),
    Endpoint("GET", "/pharmacies", "kb.list_pharmacies"),
    Endpoint("POST", "/pharmacies", "kb.register_pharmacy"),
    Endpoint("POST", "/prescriptions", "rx.create_draft"),
    Endpoint("POST", "/prescriptions/{rx_id}/overrides", "rx.record_override"),
    Endpoint("POST", "/prescriptions/{rx_id}/transmit", "rx.sign_and_transmit"),
    Endpoint("GET", "/prescriptions/frequent", "rx.frequently_prescribed"),
    Endpoint("GET", "/pharmacy/{pharm_id}/inbox", "rx.pharmacy_inbox"),
    Endpoint("POST", "/pharmacy/lookup", "rx.lookup_by_patient_fingerprint"),
    Endpoint("POST", "/prescriptions/{rx_id}/dispense", "rx.dispense"),
    Endpoint("GET", "/prescriptions/{rx_id}/print", "rx.render_printable"),
    Endpoint("GET", "/prescribers/{prescriber_no}/verify", "rx.verify_prescriber"),
)


# --- request bodies ---

class LoginRequest(BaseModel):
    user_id: str
    password: str
    fingerprint_b64: str


class EnrollRequest(BaseModel):
    user_id: str
    fullname: str
    user_type: str
    phone_no: str = ""
    password: str
    fingerprint_b64: str
    prescriber_no: Optional[str] = None
    pharmacy_id: Optional[str] = None


class PatientCreate(BaseModel):
    fullname: str
    phone: str = ""
    dob: str
    address: str = ""
    allergy_text: str = ""
    occupation: str = ""
    default_pharmacy: Optional[str] = None
    fingerprint_b64: Optional[str] = None


class ConsultationCreate(BaseModel):
    nature: str
    description: str = ""


class DrugBody(BaseModel):
    drug_id: Optional[str] = None
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
    interactions: Optional[str] = None
    adverse_reactions: Optional[str] = None
    how_supplied: Optional[str] = None


class PharmacyCreate(BaseModel):
    name: str
    address: str = ""
    phone: str = ""
    email: Optional[str] = None


class DraftItemBody(BaseModel):
    drug_id: str
    num: Optional[int] = None
    refill: int = 0
    substitute: bool = False
    dosage: str = ""
    freq: str = ""
    route: str = ""
    sig: str = ""
    note: str = ""
    start_d: Optional[str] = None


class DraftCreate(BaseModel):
    pat_id: str
    items: list[DraftItemBody]


class OverrideCreate(BaseModel):
    alert_id: str
    reason: str


class TransmitRequest(BaseModel):
    pharmacy_id: Optional[str] = None


class RetrieveRequest(BaseModel):
    pat_id: str
    text: str
    k: Optional[int] = None
    theta: Optional[float] = None


class LookupRequest(BaseModel):
    fingerprint_b64: str


def _decode_b64(payload: str, field: str) -> bytes:
    try:
        return base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise InvalidRequest(f"{field} is not valid base64") from exc


def _scan(payload: str, field: str = "fingerprint_b64") -> FingerprintScan:
    return FingerprintScan(_decode_b64(payload, field))


def create_app(service: RxLedgerService) -> FastAPI:
    app = FastAPI(title="rxledger", version="0.1.0")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # browser console may be served from any origin; auth is the boundary
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def current_session(
        x_session_token: Optional[str] = Header(default=None, alias="X-Session-Token"),
    ) -> Session:
        return service.auth.resolve(x_session_token)

    @app.exception_handler(RxError)
    async def rx_error_handler(_request: Request, exc: RxError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_payload())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        details = {"errors": [{"loc": [str(p) for p in e["loc"]], "msg": e["msg"]} for e in exc.errors()]}
        return JSONResponse(
            status_code=400,
            content={"code": "INVALID_REQUEST", "message": "malformed request body", "details": details},
        )

    @app.exception_handler(Exception)
    async def unexpected_handler(_request: Request, exc: Exception):
        logger.exception("unhandled error: %s", exc)
        return JSONResponse(status_code=500, content={"code": "INTERNAL", "message": "internal error"})

    # --- auth ---

    @app.post("/auth/login")
    def login(body: LoginRequest) -> dict[str, Any]:
        session = service.auth.authenticate(
            body.user_id, body.password, _scan(body.fingerprint_b64)
        )
        user = service.store.get_user(session.user_id)
        return {"session": session.to_dict(), "user": user.to_public_dict()}

    @app.post("/users", status_code=201)
    def enroll_user(body: EnrollRequest, session: Session = Depends(current_session)) -> dict[str, Any]:
        try:
            user_type = UserType(body.user_type)
        except ValueError as exc:
            raise InvalidRequest(f"unknown user_type {body.user_type!r}") from exc
        record = service.auth.enroll_user(
            session, body.user_id, body.fullname, user_type, body.phone_no,
            body.password, _scan(body.fingerprint_b64), body.prescriber_no,
            body.pharmacy_id,
        )
        return record.to_public_dict()

    # --- patients / knowledge base ---

    @app.get("/patients")
    def search_patients(
        prefix: str = Query(default=""), _session: Session = Depends(current_session)
    ) -> list[dict[str, str]]:
        return [
            {"pat_id": pat_id, "fullname": fullname}
            for pat_id, fullname in service.kb.search_patients(prefix)
        ]

    @app.post("/patients", status_code=201)
    def register_patient(body: PatientCreate, session: Session = Depends(current_session)) -> dict[str, Any]:
        fingerprint = _scan(body.fingerprint_b64) if body.fingerprint_b64 else None
        patient = service.kb.register_patient(
            session, body.fullname, body.phone, body.dob, body.address,
            body.allergy_text, body.occupation, body.default_pharmacy, fingerprint,
        )
        return patient.to_public_dict()

    @app.get("/patients/{pat_id}")
    def get_patient(pat_id: str, _session: Session = Depends(current_session)) -> dict[str, Any]:
        return service.kb.get_patient(pat_id).to_public_dict()

    @app.post("/patients/{pat_id}/consultations", status_code=201)
    def record_consultation(
        pat_id: str, body: ConsultationCreate, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        return service.kb.record_consultation(session, pat_id, body.nature, body.description).to_dict()

    @app.get("/patients/{pat_id}/history")
    def get_history(pat_id: str, _session: Session = Depends(current_session)) -> list[dict[str, Any]]:
        return [entry.to_dict() for entry in service.kb.get_history(pat_id)]

    @app.get("/patients/{pat_id}/patterns")
    def patient_patterns(pat_id: str, _session: Session = Depends(current_session)) -> list[dict[str, Any]]:
        return [item.to_dict() for item in service.cbr.patient_patterns(pat_id)]

    # --- suggestion engine ---

    @app.post("/cbr/retrieve")
    def cbr_retrieve(body: RetrieveRequest, _session: Session = Depends(current_session)) -> dict[str, Any]:
        patient = service.kb.get_patient(body.pat_id)
        terms = normalize_terms(body.text)
        if not terms:
            raise InvalidRequest("diagnosis text yields no terms")
        query = CaseQuery(
            diagnosis_terms=terms,
            age_band=age_band(patient.dob, service.clock().date()),
            allergy_set=patient.drug_allergy,
        )
        results = service.cbr.retrieve(query, k=body.k, theta=body.theta)
        payload = []
        for case, score in results:
            draft = service.cbr.adapt(case, patient)
            payload.append({"case": case.to_dict(), "score": score, "draft": draft.to_dict()})
        return {"results": payload}

    # --- drug registry ---

    @app.get("/drugs/{drug_id}")
    def get_drug(drug_id: str, _session: Session = Depends(current_session)) -> dict[str, Any]:
        return service.kb.get_drug_info(drug_id).to_dict()

    @app.post("/drugs", status_code=201)
    def create_drug(body: DrugBody, session: Session = Depends(current_session)) -> dict[str, str]:
        drug = DrugRecord(**{**body.model_dump(), "drug_id": body.drug_id or ""})
        return {"drug_id": service.kb.upsert_drug(session, drug)}

    @app.put("/drugs/{drug_id}")
    def update_drug(drug_id: str, body: DrugBody, session: Session = Depends(current_session)) -> dict[str, str]:
        drug = DrugRecord(**{**body.model_dump(), "drug_id": drug_id})
        return {"drug_id": service.kb.upsert_drug(session, drug)}

    # --- pharmacies ---

    @app.get("/pharmacies")
    def list_pharmacies(_session: Session = Depends(current_session)) -> list[dict[str, Any]]:
        return [p.to_dict() for p in service.kb.list_pharmacies()]

    @app.post("/pharmacies", status_code=201)
    def register_pharmacy(body: PharmacyCreate, session: Session = Depends(current_session)) -> dict[str, Any]:
        return service.kb.register_pharmacy(
            session, body.name, body.address, body.phone, body.email
        ).to_dict()

    # --- prescriptions ---

    @app.post("/prescriptions", status_code=201)
    def create_draft(body: DraftCreate, session: Session = Depends(current_session)) -> dict[str, Any]:
        items = [item.model_dump() for item in body.items]
        return service.rx.create_draft(session, body.pat_id, items).to_dict()

    @app.post("/prescriptions/{rx_id}/overrides")
    def record_override(
        rx_id: str, body: OverrideCreate, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        alert = service.rx.record_override(session, rx_id, body.alert_id, body.reason)
        return {"alert": alert.to_dict(), "prescription": service.rx.get_prescription(rx_id).to_dict()}

    @app.post("/prescriptions/{rx_id}/transmit")
    def transmit(
        rx_id: str, body: Optional[TransmitRequest] = None, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        pharmacy_id = body.pharmacy_id if body else None
        return service.rx.sign_and_transmit(session, rx_id, pharmacy_id).to_dict()

    @app.get("/prescriptions/frequent")
    def frequently_prescribed(
        limit: int = Query(default=10, ge=1), _session: Session = Depends(current_session)
    ) -> list[dict[str, Any]]:
        return [entry.to_dict() for entry in service.rx.frequently_prescribed(limit)]

    @app.get("/pharmacy/{pharm_id}/inbox")
    def pharmacy_inbox(pharm_id: str, session: Session = Depends(current_session)) -> list[dict[str, Any]]:
        return [rx.to_dict() for rx in service.rx.pharmacy_inbox(session, pharm_id)]

    @app.post("/pharmacy/lookup")
    def lookup_by_fingerprint(
        body: LookupRequest, session: Session = Depends(current_session)
    ) -> list[dict[str, Any]]:
        prescriptions = service.rx.lookup_by_patient_fingerprint(session, _scan(body.fingerprint_b64))
        return [rx.to_dict() for rx in prescriptions]

    @app.post("/prescriptions/{rx_id}/dispense")
    def dispense(rx_id: str, session: Session = Depends(current_session)) -> dict[str, Any]:
        return service.rx.dispense(session, rx_id).to_dict()

    @app.get("/prescriptions/{rx_id}/print")
    def render_printable(rx_id: str, _session: Session = Depends(current_session)) -> dict[str, str]:
        return service.rx.render_printable(rx_id).to_dict()

    @app.get("/prescribers/{prescriber_no}/verify")
    def verify_prescriber(
        prescriber_no: str, _session: Session = Depends(current_session)
    ) -> dict[str, str]:
        return {
            "prescriber_no": prescriber_no,
            "result": service.rx.verify_prescriber(prescriber_no).value,
        }

    return app
