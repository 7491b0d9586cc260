"""Operator command line: serve, bootstrap-admin, seed-drugs, report.

Configuration precedence is flags > RXLEDGER_* environment > JSON config
file given with --config or RXLEDGER_CONFIG.
"""

from __future__ import annotations

import argparse
import getpass
import json
import socket
import sys
from pathlib import Path

from .api import create_app
from .config import load_config
from .errors import RxError
from .models import FingerprintScan
from .service import RxLedgerService

_CONFIG_FLAGS = (
    ("--data-dir", "data_dir", str),
    ("--port", "port", int),
    ("--host", "host", str),
    ("--fingerprint-threshold", "fingerprint_threshold", float),
    ("--session-ttl-minutes", "session_ttl_minutes", int),
    ("--pbkdf2-iterations", "pbkdf2_iterations", int),
    ("--cbr-k", "cbr_k", int),
    ("--cbr-theta", "cbr_theta", float),
    ("--cbr-diagnosis-weight", "cbr_diagnosis_weight", float),
    ("--cbr-age-weight", "cbr_age_weight", float),
    ("--pediatric-age-limit", "pediatric_age_limit", int),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rxledger", description="e-prescribing service")
    parser.add_argument("--config", help="path to JSON config file")
    for flag, dest, kind in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the HTTP service")

    boot = sub.add_parser("bootstrap-admin", help="create the first administrator")
    boot.add_argument("--user-id", required=True)
    boot.add_argument("--fullname", required=True)
    boot.add_argument("--phone", default="")
    boot.add_argument("--password", default=None, help="prompted when omitted")
    boot.add_argument("--prescriber-no", required=True)
    boot.add_argument("--fingerprint-file", required=True, help="file holding the template bytes")

    seed = sub.add_parser("seed-drugs", help="load a JSON array of drug monographs")
    seed.add_argument("file")

    report = sub.add_parser("report", help="operator reports")
    report_sub = report.add_subparsers(dest="report_name", required=True)
    frequent = report_sub.add_parser("frequent", help="most frequently prescribed drugs")
    frequent.add_argument("--limit", type=int, default=10)

    return parser


def _service_from_args(args: argparse.Namespace) -> RxLedgerService:
    flags = {dest: getattr(args, dest) for _, dest, _ in _CONFIG_FLAGS}
    flags["config"] = args.config
    return RxLedgerService(load_config(flags))


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    service = _service_from_args(args)
    if not service.has_admin():
        print(
            "error [NO_ADMIN_BOOTSTRAPPED]: no administrator exists in this data "
            "directory; run `rxledger bootstrap-admin` first",
            file=sys.stderr,
        )
        return 3
    config = service.config
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.host, config.port))
    except OSError:
        print(f"error [PORT_IN_USE]: {config.host}:{config.port} is already bound", file=sys.stderr)
        return 4
    finally:
        probe.close()
    app = create_app(service)
    print(f"rxledger serving on http://{config.host}:{config.port} (data: {config.data_dir})")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def _cmd_bootstrap_admin(args: argparse.Namespace) -> int:
    service = _service_from_args(args)
    try:
        password = args.password or getpass.getpass("admin password: ")
        template = Path(args.fingerprint_file).read_bytes()
        user = service.auth.bootstrap_admin(
            args.user_id, args.fullname, args.phone, password,
            FingerprintScan(template), args.prescriber_no,
        )
    finally:
        service.close()
    print(f"administrator {user.user_id} created (prescriber {user.prescriber_no})")
    return 0


def _cmd_seed_drugs(args: argparse.Namespace) -> int:
    service = _service_from_args(args)
    try:
        records = json.loads(Path(args.file).read_text(encoding="utf-8"))
        if not isinstance(records, list):
            print("error [INVALID_REQUEST]: seed file must be a JSON array", file=sys.stderr)
            return 2
        count = service.kb.seed_drugs(records)
    except RxError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 2
    finally:
        service.close()
    print(f"{count} drugs loaded")
    return 0


def _cmd_report_frequent(args: argparse.Namespace) -> int:
    service = _service_from_args(args)
    try:
        entries = service.rx.frequently_prescribed(args.limit)
    finally:
        service.close()
    print(f"{'COUNT':>5}  {'DRUG':<30} {'DOSAGE':<16} {'FREQ':<16} ROUTE")
    for entry in entries:
        print(
            f"{entry.count:>5}  {entry.med_name:<30} {entry.dosage:<16} "
            f"{entry.freq:<16} {entry.route}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "bootstrap-admin":
            return _cmd_bootstrap_admin(args)
        if args.command == "seed-drugs":
            return _cmd_seed_drugs(args)
        if args.command == "report" and args.report_name == "frequent":
            return _cmd_report_frequent(args)
    except RxError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error [NOT_FOUND]: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
