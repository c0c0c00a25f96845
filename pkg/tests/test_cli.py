"""Tests for the command-line workflow."""
import csv
import json

import stealthkit.services.bench_service as bench_service
from stealthkit.cli import main
from stealthkit.group import OpCounters
from stealthkit.services.bench_service import CostModel


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def _keygen(capsys, tmp_path, name="bob"):
    keys = tmp_path / f"{name}.json"
    public = tmp_path / f"{name}.pub.json"
    auditor = tmp_path / f"{name}.audit.json"
    code, out = _run(
        capsys,
        "--seed", "1", "keygen",
        "--out", str(keys), "--public-out", str(public), "--auditor-out", str(auditor),
    )
    assert code == 0
    assert json.loads(out)["kind"] == "public"
    return keys, public, auditor


def test_keygen_writes_bundles(capsys, tmp_path):
    keys, public, auditor = _keygen(capsys, tmp_path)
    private = json.loads(keys.read_text())
    assert private["kind"] == "keys"
    assert private["backend"] == "secp256k1"
    assert set(json.loads(auditor.read_text())) >= {"scan_private", "spend_public"}
    assert "spend_private" not in json.loads(auditor.read_text())
    assert "scan_private" not in json.loads(public.read_text())


def test_send_then_scan_evolving_epoch(capsys, tmp_path):
    keys, public, auditor = _keygen(capsys, tmp_path)
    ledger = tmp_path / "ledger.bin"

    code, out = _run(
        capsys,
        "--epoch-n", "3", "--seed", "2", "--ledger-file", str(ledger), "--state-file", str(tmp_path / "sender.st"),
        "send", "--to", str(public), "--amount", "5", "--count", "4",
    )
    assert code == 0
    sent = json.loads(out)
    assert [tx["cold"] for tx in sent["txs"]] == [True, False, False, True]
    assert sent["counters"] == {"rp": 2, "fp": 6, "h": 5}

    code, out = _run(
        capsys,
        "--epoch-n", "3", "--ledger-file", str(ledger), "--state-file", str(tmp_path / "receiver.st"),
        "scan", "--keys", str(keys), "--reveal-keys",
    )
    assert code == 0
    report = json.loads(out)
    assert len(report["matches"]) == 4
    assert all("spend_key" in match for match in report["matches"])

    code, out = _run(
        capsys,
        "--epoch-n", "3", "--ledger-file", str(ledger), "--state-file", str(tmp_path / "auditor.st"),
        "scan", "--keys", str(auditor), "--auditor", "--reveal-keys",
    )
    assert code == 0
    audit = json.loads(out)
    assert audit["role"] == "auditor"
    assert [m["destination"] for m in audit["matches"]] == [m["destination"] for m in report["matches"]]
    assert all("spend_key" not in match for match in audit["matches"])


def test_sender_state_file_carries_epoch_across_runs(capsys, tmp_path):
    _, public, _ = _keygen(capsys, tmp_path)
    args = ("--epoch-n", "3", "--ledger-file", str(tmp_path / "l.bin"), "--state-file", str(tmp_path / "s.st"))
    flags = []
    for _ in range(4):
        code, out = _run(capsys, *args, "send", "--to", str(public), "--amount", "1")
        assert code == 0
        flags.append(json.loads(out)["txs"][0]["cold"])
    assert flags == [True, False, False, True]


def test_baseline_send_and_scan(capsys, tmp_path):
    keys, public, _ = _keygen(capsys, tmp_path)
    ledger = str(tmp_path / "ledger.bin")
    code, _ = _run(capsys, "--ledger-file", ledger, "send", "--scheme", "dksap", "--to", str(public), "--amount", "9", "--count", "2")
    assert code == 0
    code, out = _run(capsys, "--ledger-file", ledger, "scan", "--scheme", "dksap", "--keys", str(keys))
    assert code == 0
    report = json.loads(out)
    assert len(report["matches"]) == 2
    assert report["counters"] == {"rp": 2, "fp": 2, "h": 2}


def test_input_errors_exit_with_code_two(capsys, tmp_path):
    _, public, _ = _keygen(capsys, tmp_path)
    assert main(["--backend", "nope", "counts"]) == 2
    assert main(["send", "--to", str(public), "--amount", "1"]) == 2
    assert main(["--ledger-file", str(tmp_path / "missing.bin"), "scan", "--keys", str(public)]) == 2
    assert main(["--ledger-file", str(tmp_path / "l.bin"), "send", "--scheme", "dksap", "--to", str(tmp_path / "x.json"), "--amount", "1"]) == 2


def test_counts_table_and_verification(capsys):
    code, out = _run(capsys, "counts", "--n", "1", "10")
    assert code == 0
    table = json.loads(out)["expected"]
    assert len(table) == 8
    assert {"scheme": "dksap", "side": "sender", "N": 10, "rp": 10, "fp": 20, "h": 10} in table

    code, out = _run(capsys, "counts", "--n", "1", "2", "--verify")
    assert code == 0
    assert json.loads(out)["mismatches"] == []


def test_counts_verification_mismatch_exits_nonzero(capsys, monkeypatch):
    monkeypatch.setattr(bench_service, "expected_counts", lambda scheme, side, n: OpCounters(0, 0, 0))
    code, out = _run(capsys, "counts", "--n", "1", "--verify")
    assert code == 3
    assert len(json.loads(out)["mismatches"]) == 4


def test_simulate_reports_complete_isolated_scans(capsys):
    code, out = _run(
        capsys,
        "--epoch-n", "2", "--seed", "3",
        "simulate", "--senders", "1", "--receivers", "2", "--txs-per-pair", "3", "--regular-txs", "2", "--workers", "2",
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["complete"] and summary["isolated"] and summary["auditor_parity"]
    assert summary["txs"] == 8
    assert [party["found"] for party in summary["parties"]] == [3, 3]


def test_bench_writes_csv_and_plots(capsys, tmp_path):
    csv_path = tmp_path / "bench.csv"
    plots = tmp_path / "plots"
    code, out = _run(
        capsys,
        "--csv-out", str(csv_path), "bench", "--n", "10", "--iterations", "100", "--plot-dir", str(plots),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["wire_savings"] == {"10": 33 * 9}
    measured = CostModel(**summary["cost_model"])
    expected_status = "passed" if measured.hash_premise_holds() else "skipped"
    assert summary["half_cost_claim"]["status"] == expected_status
    rows = list(csv.DictReader(csv_path.open(encoding="utf-8")))
    assert len(rows) == 4
    assert (plots / "cost_comparison.gp").exists()


def test_backends_listing(capsys):
    code, out = _run(capsys, "backends")
    assert code == 0
    assert json.loads(out)["selected"] == "secp256k1"


def test_scan_can_prune_finished_epochs(capsys, tmp_path):
    keys, public, _ = _keygen(capsys, tmp_path)
    ledger = str(tmp_path / "ledger.bin")
    state = str(tmp_path / "receiver.st")
    code, _ = _run(
        capsys,
        "--epoch-n", "3", "--ledger-file", ledger, "--state-file", str(tmp_path / "sender.st"),
        "send", "--to", str(public), "--amount", "2", "--count", "4",
    )
    assert code == 0

    args = ("--epoch-n", "3", "--ledger-file", ledger, "--state-file", state, "scan", "--keys", str(keys))
    code, out = _run(capsys, *args)
    assert code == 0
    assert json.loads(out)["pruned_slots"] == 0

    code, out = _run(capsys, *args, "--prune-exhausted")
    assert code == 0
    report = json.loads(out)
    assert report["pruned_slots"] == 1
    # Rescans replay the cold records only.
    assert len(report["matches"]) == 2

    code, out = _run(capsys, *args)
    assert code == 0
    # The pruned epoch is opened again from its cold record.
    assert len(json.loads(out)["matches"]) == 4
