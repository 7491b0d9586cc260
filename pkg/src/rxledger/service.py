"""Composition root: opens the store and wires the service modules together."""

from __future__ import annotations

from datetime import datetime
from pathlib import Path
from typing import Any, Callable

from .auth import AuthService, utcnow
from .cbr import CbrEngine
from .config import ServiceConfig
from .knowledge import KnowledgeBase
from .models import UserType
from .prescriptions import PrescriptionService
from .store import Store


class RxLedgerService:
    """One live service instance over one data directory."""

    def __init__(self, config: ServiceConfig, clock: Callable[[], datetime] = utcnow):
        self.config = config
        self.clock = clock
        if config.data_dir != ":memory:":
            Path(config.data_dir).mkdir(parents=True, exist_ok=True)
        self.store = Store(config.db_path())
        self.auth = AuthService(self.store, config, clock)
        self.kb = KnowledgeBase(self.store, self.auth, clock)
        self.cbr = CbrEngine(
            self.store, self.kb, clock,
            k=config.cbr_k, theta=config.cbr_theta,
            diagnosis_weight=config.cbr_diagnosis_weight,
            age_weight=config.cbr_age_weight,
        )
        self.rx = PrescriptionService(self.store, self.auth, self.kb, self.cbr, config, clock)

    def has_admin(self) -> bool:
        return self.store.count_users(UserType.ADMINISTRATOR) > 0

    def snapshot(self) -> dict[str, Any]:
        return self.store.snapshot()

    def close(self) -> None:
        self.store.close()
