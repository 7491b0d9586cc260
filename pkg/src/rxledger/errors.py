"""Service error hierarchy.

Every error carries a stable machine-readable ``code`` drawn from the closed
set below, and an HTTP status used by the API layer. Messages are safe to
show to callers: they never contain password or fingerprint material.
"""

from __future__ import annotations

from typing import Any, ClassVar


class RxError(Exception):
    """Base class for all service errors."""

    code: ClassVar[str] = "INTERNAL"
    http_status: ClassVar[int] = 500

    def __init__(self, message: str = "", details: dict[str, Any] | None = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details or {}

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details:
            payload["details"] = self.details
        return payload


# --- authentication / sessions ---

class AuthFailed(RxError):
    """Login rejected. Deliberately opaque: never says which factor failed."""
    code = "AUTH_FAILED"
    http_status = 401


class SessionExpired(RxError):
    code = "SESSION_EXPIRED"
    http_status = 401


class Forbidden(RxError):
    code = "FORBIDDEN"
    http_status = 403


# --- enrollment ---

class DuplicateUser(RxError):
    code = "DUPLICATE_USER"
    http_status = 409


class MissingPrescriberNo(RxError):
    code = "MISSING_PRESCRIBER_NO"
    http_status = 400


class UnexpectedPrescriberNo(RxError):
    code = "UNEXPECTED_PRESCRIBER_NO"
    http_status = 400


class InvalidPrescriberNo(RxError):
    code = "INVALID_PRESCRIBER_NO"
    http_status = 400


class DuplicatePrescriberNo(RxError):
    code = "DUPLICATE_PRESCRIBER_NO"
    http_status = 409


class MissingPharmacyId(RxError):
    code = "MISSING_PHARMACY_ID"
    http_status = 400


class EmptyScan(RxError):
    code = "EMPTY_SCAN"
    http_status = 400


# --- knowledge base ---

class DuplicateName(RxError):
    code = "DUPLICATE_NAME"
    http_status = 409


class DrugNotFound(RxError):
    code = "DRUG_NOT_FOUND"
    http_status = 404


class PatientNotFound(RxError):
    code = "PATIENT_NOT_FOUND"
    http_status = 404


class UnregisteredPharmacy(RxError):
    code = "UNREGISTERED_PHARMACY"
    http_status = 400


class InvalidDob(RxError):
    code = "INVALID_DOB"
    http_status = 400


class InvalidRequest(RxError):
    """Catch-all for malformed field values (negative refill, bad email, ...)."""
    code = "INVALID_REQUEST"
    http_status = 400


# --- validation / overrides ---

class UnknownDrug(RxError):
    code = "UNKNOWN_DRUG"
    http_status = 400


class AlertNotFound(RxError):
    code = "ALERT_NOT_FOUND"
    http_status = 404


class CannotOverrideBlocking(RxError):
    code = "CANNOT_OVERRIDE_BLOCKING"
    http_status = 409


class OverrideNotRequired(RxError):
    """Informational alerts carry no override; there is nothing to resolve."""
    code = "OVERRIDE_NOT_REQUIRED"
    http_status = 409


class AlreadyOverridden(RxError):
    code = "ALREADY_OVERRIDDEN"
    http_status = 409


class EmptyReason(RxError):
    code = "EMPTY_REASON"
    http_status = 400


# --- case engine ---

class FutureDob(RxError):
    code = "FUTURE_DOB"
    http_status = 400


class IncompleteSig(RxError):
    code = "INCOMPLETE_SIG"
    http_status = 400


class DrugWithdrawn(RxError):
    code = "DRUG_WITHDRAWN"
    http_status = 409


# --- prescription lifecycle ---

class PrescriptionNotFound(RxError):
    code = "PRESCRIPTION_NOT_FOUND"
    http_status = 404


class EmptyItems(RxError):
    code = "EMPTY_ITEMS"
    http_status = 400


class NoConsultation(RxError):
    """Drafting requires a recorded diagnosis for the patient first."""
    code = "NO_CONSULTATION"
    http_status = 409


class InvalidState(RxError):
    code = "INVALID_STATE"
    http_status = 409


class NoPharmacyResolvable(RxError):
    code = "NO_PHARMACY_RESOLVABLE"
    http_status = 400


class PrescriberVerificationFailed(RxError):
    code = "PRESCRIBER_VERIFICATION_FAILED"
    http_status = 409


class NoMatch(RxError):
    code = "NO_MATCH"
    http_status = 404


class AmbiguousMatch(RxError):
    code = "AMBIGUOUS_MATCH"
    http_status = 409


# --- operator / startup ---

class NoAdminBootstrapped(RxError):
    code = "NO_ADMIN_BOOTSTRAPPED"
    http_status = 503


class PortInUse(RxError):
    code = "PORT_IN_USE"
    http_status = 503


#: Closed enumeration of every error code the API may emit (plus INTERNAL for
#: unexpected failures). The API layer is tested against this set.
ALL_ERROR_CODES: frozenset[str] = frozenset(
    cls.code for cls in RxError.__subclasses__()
) | {"INTERNAL"}
