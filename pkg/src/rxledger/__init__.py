"""rxledger: secure e-prescribing with rule-based safety checks and
case-based medication suggestions."""

from .config import ServiceConfig, load_config
from .service import RxLedgerService

__version__ = "0.1.0"

__all__ = ["RxLedgerService", "ServiceConfig", "load_config", "__version__"]
