"""Service configuration.

Precedence: command-line flags > RXLEDGER_* environment variables > JSON
config file > built-in defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "RXLEDGER_"


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str = "./data"
    host: str = "127.0.0.1"
    port: int = 8000
    fingerprint_threshold: float = 0.95
    session_ttl_minutes: int = 30
    pbkdf2_iterations: int = 100_000
    cbr_k: int = 5
    cbr_theta: float = 0.4
    cbr_diagnosis_weight: float = 0.8
    cbr_age_weight: float = 0.2
    pediatric_age_limit: int = 12  # ages strictly below use children_usage

    def db_path(self) -> str:
        if self.data_dir == ":memory:":
            return ":memory:"
        return str(Path(self.data_dir) / "rxledger.db")


_COERCERS = {int: int, float: float, str: str}


def _coerce(name: str, raw: Any, target: type) -> Any:
    try:
        return _COERCERS[target](raw)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"invalid value for {name}: {raw!r}") from exc


def load_config(
    flags: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
    config_file: str | Path | None = None,
) -> ServiceConfig:
    """Merge configuration sources into a ServiceConfig.

    ``flags`` entries with value None are treated as unset. The config file
    path itself may come from ``flags['config']`` or RXLEDGER_CONFIG.
    """
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    env = env if env is not None else os.environ

    if config_file is None:
        config_file = flags.get("config") or env.get(ENV_PREFIX + "CONFIG")

    merged: dict[str, Any] = {}
    if config_file:
        file_values = json.loads(Path(config_file).read_text(encoding="utf-8"))
        if not isinstance(file_values, dict):
            raise ValueError("config file must contain a JSON object")
        merged.update(file_values)

    known = {f.name: f.type for f in fields(ServiceConfig)}
    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            merged[name] = env[env_key]
    for name, value in flags.items():
        if name in known:
            merged[name] = value

    kwargs: dict[str, Any] = {}
    for f in fields(ServiceConfig):
        if f.name in merged:
            target = type(getattr(ServiceConfig(), f.name))
            kwargs[f.name] = _coerce(f.name, merged[f.name], target)
    unknown = set(merged) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ServiceConfig(**kwargs)
