"""Tests for operation-count accounting and the cost comparison."""
import csv
import io
import os

import pytest

import stealthkit.services.bench_service as bench_service
from stealthkit.group import OpCounters, get_group
from stealthkit.services.bench_service import (
    CSV_COLUMNS,
    BenchValidationError,
    ComparisonRow,
    CostModel,
    CountMismatchError,
    check_half_cost_claim,
    expected_counts,
    expected_wire_savings,
    measure_cost_model,
    rows_to_csv,
    run_comparison,
    run_scheme,
    verify_formula_agreement,
    wire_savings,
    write_csv,
)


FULL = os.environ.get("STEALTH_FULL_ACCEPTANCE") == "1"
# Host-independent model with the ordering t_h << t_fp < t_rp.
REFERENCE_MODEL = CostModel(t_rp=3.67e-3, t_fp=3.12e-3, t_h=5.26e-6)


def _modeled_rows(ns, model=REFERENCE_MODEL):
    rows = []
    for n in ns:
        for scheme in bench_service.SCHEMES:
            for side in bench_service.SIDES:
                counts = expected_counts(scheme, side, n)
                rows.append(ComparisonRow(scheme, side, n, counts, model.modeled(counts), 0.0, 0))
    return rows


def test_expected_counts_closed_form():
    assert expected_counts("dksap", "sender", 10) == OpCounters(10, 20, 10)
    assert expected_counts("dksap", "receiver", 10) == OpCounters(10, 10, 10)
    assert expected_counts("dksap-iot", "sender", 1) == expected_counts("dksap", "sender", 1)
    assert expected_counts("dksap-iot", "receiver", 30) == OpCounters(1, 30, 30)
    assert expected_counts("dksap-iot", "sender", 20) == OpCounters(1, 21, 20)


def test_expected_counts_validation():
    with pytest.raises(BenchValidationError) as excinfo:
        expected_counts("dksap", "sender", 0)
    assert excinfo.value.field == "N"
    with pytest.raises(BenchValidationError):
        expected_counts("ringct", "sender", 1)
    with pytest.raises(BenchValidationError):
        expected_counts("dksap", "auditor", 1)


def test_instrumented_runs_agree_with_formulas():
    ns = range(1, 65) if FULL else [1, 2, 3, 7, 10]
    assert verify_formula_agreement(get_group(), ns) == []


def test_run_scheme_matches_every_transaction():
    group = get_group()
    for scheme in bench_service.SCHEMES:
        run = run_scheme(group, scheme, 4)
        assert run["matched"] == 4
        assert len(run["txs"]) == 4
    with pytest.raises(BenchValidationError):
        run_scheme(group, "other", 4)


def test_run_comparison_rows_and_savings():
    group = get_group()
    ns = [1, 10, 20, 30] if FULL else [1, 4, 10]
    rows = run_comparison(group, ns, REFERENCE_MODEL)
    assert len(rows) == 4 * len(ns)
    for row in rows:
        assert row.counts == expected_counts(row.scheme, row.side, row.n)
        assert row.modeled_cost == pytest.approx(REFERENCE_MODEL.modeled(row.counts))
        assert row.measured_cost >= 0
    for n in ns:
        assert wire_savings(rows, n) == expected_wire_savings(group, n) == 33 * (n - 1)


def test_count_mismatch_is_a_hard_failure(monkeypatch):
    monkeypatch.setattr(bench_service, "expected_counts", lambda scheme, side, n: OpCounters(0, 0, 0))
    with pytest.raises(CountMismatchError) as excinfo:
        run_comparison(get_group(), [1], REFERENCE_MODEL)
    assert len(excinfo.value.mismatches) == 4


def test_half_cost_claim_holds_under_reference_model():
    result = check_half_cost_claim(_modeled_rows([10, 20, 30]), REFERENCE_MODEL, [10, 20, 30])
    assert result.status == "passed"
    assert all(ratio <= 0.5 for ratio in result.ratios.values())


def test_half_cost_claim_skipped_when_hashing_is_expensive():
    slow_hash = CostModel(t_rp=1e-3, t_fp=1e-3, t_h=1e-4)
    result = check_half_cost_claim(_modeled_rows([10], slow_hash), slow_hash, [10])
    assert result.status == "skipped"
    assert "t_h" in result.reason


def test_half_cost_claim_fails_when_fixed_base_dominates():
    model = CostModel(t_rp=1e-6, t_fp=1e-3, t_h=1e-9)
    result = check_half_cost_claim(_modeled_rows([10], model), model, [10])
    assert result.status == "failed"


def test_cost_model_validation_and_warnings():
    with pytest.raises(BenchValidationError):
        CostModel(0.0, 1.0, 1.0)
    assert REFERENCE_MODEL.sanity_warnings() == []
    assert len(CostModel(t_rp=1.0, t_fp=2.0, t_h=1.0).sanity_warnings()) == 2


def test_measure_cost_model_requires_enough_iterations():
    with pytest.raises(BenchValidationError):
        measure_cost_model(get_group(), 99)


def test_measured_costs_follow_hash_fixed_base_random_point_order():
    model = measure_cost_model(get_group(), 100)
    assert model.t_h < model.t_fp < model.t_rp
    assert model.hash_premise_holds()


@pytest.mark.skipif(not FULL, reason="timing comparison runs with STEALTH_FULL_ACCEPTANCE=1")
def test_cost_model_measurements_are_stable():
    first = measure_cost_model(get_group(), 200)
    second = measure_cost_model(get_group(), 200)
    assert first.t_fp < first.t_rp
    assert abs(first.t_rp - second.t_rp) / first.t_rp < 0.2


def test_csv_schema_and_determinism(tmp_path):
    group = get_group()
    first = rows_to_csv(run_comparison(group, [2, 3], REFERENCE_MODEL, seed=5), include_timings=False)
    second = rows_to_csv(run_comparison(group, [2, 3], REFERENCE_MODEL, seed=5), include_timings=False)
    assert first == second
    records = list(csv.DictReader(io.StringIO(first)))
    assert list(records[0]) == CSV_COLUMNS
    assert len(records) == 8
    assert {(r["scheme"], r["side"]) for r in records} == {
        ("dksap", "sender"), ("dksap", "receiver"), ("dksap-iot", "sender"), ("dksap-iot", "receiver")
    }

    path = tmp_path / "rows.csv"
    write_csv(_modeled_rows([10]), str(path))
    written = list(csv.DictReader(path.open(encoding="utf-8")))
    assert written[0]["rp"] == "10" and written[0]["fp"] == "20"
