import json
import socket

from rxledger.cli import main
from rxledger.config import ServiceConfig
from rxledger.service import RxLedgerService

from conftest import TickClock, build_world, make_template


def bootstrap(tmp_path, data_dir="data"):
    fp_file = tmp_path / "admin.fp"
    fp_file.write_bytes(make_template(1))
    code = main([
        "--data-dir", str(tmp_path / data_dir), "--pbkdf2-iterations", "400",
        "bootstrap-admin", "--user-id", "admin", "--fullname", "Admin One",
        "--password", "pw-admin", "--prescriber-no", "MD-000001",
        "--fingerprint-file", str(fp_file),
    ])
    assert code == 0
    return str(tmp_path / data_dir)


def test_bootstrap_admin_creates_user(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    out = capsys.readouterr().out
    assert "administrator admin created" in out
    svc = RxLedgerService(ServiceConfig(data_dir=data_dir, pbkdf2_iterations=400))
    try:
        assert svc.has_admin()
        user = svc.store.get_user("admin")
        assert user.prescriber_no == "MD-000001"
    finally:
        svc.close()


def test_second_bootstrap_refused(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    fp_file = tmp_path / "other.fp"
    fp_file.write_bytes(make_template(2))
    code = main([
        "--data-dir", data_dir, "--pbkdf2-iterations", "400",
        "bootstrap-admin", "--user-id", "admin2", "--fullname", "Admin Two",
        "--password", "pw", "--prescriber-no", "MD-000002",
        "--fingerprint-file", str(fp_file),
    ])
    assert code == 1
    assert "FORBIDDEN" in capsys.readouterr().err


def test_seed_drugs_loads_file(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    seed = tmp_path / "drugs.json"
    seed.write_text(json.dumps([
        {"name": f"Drug Number {i}", "pharmacological_class": "test class"} for i in range(10)
    ]))
    code = main(["--data-dir", data_dir, "seed-drugs", str(seed)])
    assert code == 0
    assert "10 drugs loaded" in capsys.readouterr().out


def test_seed_drugs_duplicate_names_listed(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    seed = tmp_path / "drugs.json"
    seed.write_text(json.dumps([
        {"name": "Twice"}, {"name": "twice"}, {"name": "Fine"},
    ]))
    code = main(["--data-dir", data_dir, "seed-drugs", str(seed)])
    assert code != 0
    err = capsys.readouterr().err
    assert "DUPLICATE_NAME" in err
    assert "twice" in err.lower()


def test_seed_drugs_missing_file(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    code = main(["--data-dir", data_dir, "seed-drugs", str(tmp_path / "absent.json")])
    assert code == 1


def test_report_frequent_empty_store(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    capsys.readouterr()  # drop bootstrap output
    code = main(["--data-dir", data_dir, "report", "frequent", "--limit", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "COUNT" in out and "DRUG" in out
    assert len(out.strip().splitlines()) == 1  # header only


def test_report_frequent_lists_counts(tmp_path, capsys):
    data_dir = str(tmp_path / "data")
    clock = TickClock()
    svc = RxLedgerService(ServiceConfig(data_dir=data_dir, pbkdf2_iterations=400), clock=clock)
    world = build_world(svc, clock)
    for i in range(2):  # distinct patients, or the repeat would trip duplication checks
        patient = world.register_patient(f"Report Patient {i}")
        world.consult(patient.pat_id)
        rx = svc.rx.create_draft(world.doc_sess, patient.pat_id, [world.clean_item("Paracetamol")])
        svc.rx.sign_and_transmit(world.doc_sess, rx.rx_id, world.pharmacy1.pharm_id)
    svc.close()

    code = main(["--data-dir", data_dir, "report", "frequent", "--limit", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "Paracetamol" in out
    assert out.splitlines()[1].strip().startswith("2")


def test_serve_refuses_without_admin(tmp_path, capsys):
    code = main(["--data-dir", str(tmp_path / "virgin"), "serve"])
    assert code == 3
    err = capsys.readouterr().err
    assert "NO_ADMIN_BOOTSTRAPPED" in err
    assert "bootstrap-admin" in err


def test_serve_reports_port_in_use(tmp_path, capsys):
    data_dir = bootstrap(tmp_path)
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        code = main(["--data-dir", data_dir, "--port", str(port), "serve"])
    finally:
        blocker.close()
    assert code == 4
    assert "PORT_IN_USE" in capsys.readouterr().err
