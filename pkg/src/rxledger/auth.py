"""Authentication and authorization.

Login is strictly conjunctive three-factor: user id, password, and a
fingerprint scan must all check out before a session is issued. Callers get
one opaque AUTH_FAILED on any miss; which factor failed is recorded in the
audit log only.

Fingerprints are fixed 512-byte templates compared by normalized Hamming
similarity. Passwords are salted PBKDF2-HMAC-SHA256 digests with a
configurable iteration count.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets
import threading
from datetime import datetime, timedelta, timezone
from typing import Callable, Optional

from .config import ServiceConfig
from .errors import (
    AuthFailed,
    DuplicatePrescriberNo,
    DuplicateUser,
    EmptyScan,
    Forbidden,
    InvalidPrescriberNo,
    InvalidRequest,
    MissingPharmacyId,
    MissingPrescriberNo,
    SessionExpired,
    UnexpectedPrescriberNo,
    UnregisteredPharmacy,
)
from .models import (
    FINGERPRINT_TEMPLATE_BITS,
    FINGERPRINT_TEMPLATE_BYTES,
    FingerprintScan,
    Session,
    UserRecord,
    UserType,
)
from .store import Store

Clock = Callable[[], datetime]

PRESCRIBER_NO_PATTERN = re.compile(r"^MD-\d{6}$")

_DUMMY_SALT = b"\x00" * 16
_DUMMY_PASSWORD = "no-such-user"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def normalize_template(data: bytes) -> bytes:
    """Zero-pad or truncate a capture payload to exactly 512 bytes."""
    if len(data) >= FINGERPRINT_TEMPLATE_BYTES:
        return bytes(data[:FINGERPRINT_TEMPLATE_BYTES])
    return bytes(data) + b"\x00" * (FINGERPRINT_TEMPLATE_BYTES - len(data))


def match_fingerprint(enrolled: bytes, scan: FingerprintScan) -> float:
    """Similarity score in [0, 1]: 1 - hamming_bits/4096.

    Deterministic and symmetric; 1.0 iff the templates are byte-equal after
    the scan is normalized to 512 bytes.
    """
    if not scan.data:
        raise EmptyScan("fingerprint scan is empty")
    if len(enrolled) != FINGERPRINT_TEMPLATE_BYTES:
        raise InvalidRequest(
            f"enrolled template must be {FINGERPRINT_TEMPLATE_BYTES} bytes"
        )
    candidate = normalize_template(scan.data)
    diff = int.from_bytes(enrolled, "big") ^ int.from_bytes(candidate, "big")
    return 1.0 - bin(diff).count("1") / FINGERPRINT_TEMPLATE_BITS


def hash_password(password: str, salt: bytes, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)


class AuthService:
    """Enrollment, login, session issue/validation, and role enforcement."""

    def __init__(self, store: Store, config: ServiceConfig, clock: Clock = utcnow):
        self._store = store
        self._config = config
        self._clock = clock
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    # --- enrollment ---

    def enroll_user(
        self,
        admin_session: Session,
        user_id: str,
        fullname: str,
        user_type: UserType | str,
        phone_no: str,
        password: str,
        fingerprint: FingerprintScan,
        prescriber_no: Optional[str] = None,
        pharmacy_id: Optional[str] = None,
    ) -> UserRecord:
        self.require_role(admin_session, UserType.ADMINISTRATOR)
        return self._create_user(
            user_id, fullname, user_type, phone_no, password, fingerprint,
            prescriber_no, pharmacy_id,
        )

    def bootstrap_admin(
        self,
        user_id: str,
        fullname: str,
        phone_no: str,
        password: str,
        fingerprint: FingerprintScan,
        prescriber_no: str,
    ) -> UserRecord:
        """Create the first Administrator. Refused once any admin exists."""
        if self._store.count_users(UserType.ADMINISTRATOR) > 0:
            raise Forbidden("an administrator already exists; enroll via an admin session")
        return self._create_user(
            user_id, fullname, UserType.ADMINISTRATOR, phone_no, password,
            fingerprint, prescriber_no, None,
        )

    def _create_user(
        self,
        user_id: str,
        fullname: str,
        user_type: UserType | str,
        phone_no: str,
        password: str,
        fingerprint: FingerprintScan,
        prescriber_no: Optional[str],
        pharmacy_id: Optional[str],
    ) -> UserRecord:
        user_type = UserType(user_type)
        if not user_id or not user_id.strip():
            raise InvalidRequest("user_id must be non-empty")
        if not password:
            raise InvalidRequest("password must be non-empty")
        if not fingerprint.data:
            raise EmptyScan("fingerprint scan is empty")

        if user_type.prescribes:
            if not prescriber_no:
                raise MissingPrescriberNo(f"{user_type.value} enrollment requires a prescriber number")
            if not PRESCRIBER_NO_PATTERN.match(prescriber_no):
                raise InvalidPrescriberNo("prescriber number must match MD-######")
            if self._store.get_user_by_prescriber_no(prescriber_no) is not None:
                raise DuplicatePrescriberNo(f"prescriber number {prescriber_no} is already registered")
        else:
            if prescriber_no:
                raise UnexpectedPrescriberNo("pharmacists do not carry a prescriber number")
            if not pharmacy_id:
                raise MissingPharmacyId("pharmacist enrollment requires the pharmacy they dispense for")
            if self._store.get_pharmacy(pharmacy_id) is None:
                raise UnregisteredPharmacy(f"pharmacy {pharmacy_id} is not registered")

        if user_type is not UserType.PHARMACIST:
            pharmacy_id = None
        if self._store.get_user(user_id) is not None:
            raise DuplicateUser(f"user {user_id} already exists")

        salt = secrets.token_bytes(16)
        iterations = self._config.pbkdf2_iterations
        record = UserRecord(
            user_id=user_id,
            password_digest=hash_password(password, salt, iterations),
            salt=salt,
            iterations=iterations,
            fullname=fullname,
            user_type=user_type,
            phone_no=phone_no,
            fingerprint_template=normalize_template(fingerprint.data),
            prescriber_no=prescriber_no,
            pharmacy_id=pharmacy_id,
        )
        self._store.insert_user(record)
        self._store.append_audit(
            self._clock(), "user.enrolled", user_id,
            {"user_type": user_type.value, "fullname": fullname},
        )
        return record

    def deactivate_user(self, admin_session: Session, user_id: str) -> None:
        self.require_role(admin_session, UserType.ADMINISTRATOR)
        self._store.set_user_active(user_id, False)
        self._store.append_audit(self._clock(), "user.deactivated", user_id, {})

    # --- login ---

    def authenticate(self, user_id: str, password: str, fingerprint: FingerprintScan) -> Session:
        """Issue a session iff every factor passes; otherwise AUTH_FAILED.

        Exactly one audit entry is written per call, success or failure.
        """
        user = self._store.get_user(user_id)
        failed: list[str] = []

        if user is None:
            # Burn a digest anyway so missing users cost the same as bad passwords.
            hash_password(_DUMMY_PASSWORD, _DUMMY_SALT, self._config.pbkdf2_iterations)
            failed.append("user_id")
            password_ok = False
            fingerprint_ok = False
        else:
            candidate = hash_password(password, user.salt, user.iterations)
            password_ok = hmac.compare_digest(candidate, user.password_digest)
            if not password_ok:
                failed.append("password")
            try:
                score = match_fingerprint(user.fingerprint_template, fingerprint)
                fingerprint_ok = score >= self._config.fingerprint_threshold
            except EmptyScan:
                fingerprint_ok = False
            if not fingerprint_ok:
                failed.append("fingerprint")
            if not user.active:
                failed.append("inactive")

        if failed:
            self._store.append_audit(
                self._clock(), "auth.failure", user_id, {"failed_factors": failed}
            )
            raise AuthFailed("authentication failed")

        session = self._issue_session(user)
        self._store.append_audit(self._clock(), "auth.success", user_id, {})
        return session

    def _issue_session(self, user: UserRecord) -> Session:
        now = self._clock()
        session = Session(
            token=secrets.token_urlsafe(32),
            user_id=user.user_id,
            role=user.user_type,
            issued_at=now,
            expires_at=now + timedelta(minutes=self._config.session_ttl_minutes),
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    # --- session validation / roles ---

    def resolve(self, token: str | None) -> Session:
        """Look up an issued session by token."""
        if not token:
            raise AuthFailed("missing session token")
        with self._lock:
            session = self._sessions.get(token)
        if session is None:
            raise AuthFailed("unknown session token")
        if session.expires_at <= self._clock():
            raise SessionExpired("session expired")
        return session

    def require_role(self, session: Session, role: UserType) -> Session:
        """Pass iff the session is genuine, unexpired, and carries the role.

        Administrators also pass Physician checks (they prescribe); nobody
        else crosses roles.
        """
        live = self.resolve(session.token if session else None)
        if live.role is role:
            return live
        if role is UserType.PHYSICIAN and live.role is UserType.ADMINISTRATOR:
            return live
        raise Forbidden(f"requires role {role.value}")

    def require_prescriber(self, session: Session) -> Session:
        return self.require_role(session, UserType.PHYSICIAN)

    def logout(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)
