"""Operation-count accounting and cost comparison between the two schemes."""
from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable

from stealthkit.dksap import DksapReceiver, DksapSender, keygen
from stealthkit.dksap_iot import EpochConfig, IotReceiver, IotSender
from stealthkit.events import get_logger, log_event
from stealthkit.group import Group, OpCounters, deterministic_entropy


SCHEMES = ("dksap", "dksap-iot")
SIDES = ("sender", "receiver")
CSV_COLUMNS = ["scheme", "side", "N", "rp", "fp", "h", "modeled_ms", "measured_ms", "wire_bytes"]
HASH_PREMISE_RATIO = 0.01
_HASH_BATCH = 64
_WARMUP = 5

logger = get_logger("bench")


class BenchValidationError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class CountMismatchError(RuntimeError):
    """Instrumented counts disagree with the closed-form formulas."""

    def __init__(self, mismatches: list[dict]):
        super().__init__(f"{len(mismatches)} operation-count mismatch(es)")
        self.mismatches = mismatches


class TimerResolutionError(RuntimeError):
    """The host timer cannot resolve the measured operations."""


@dataclass(frozen=True)
class CostModel:
    """Seconds per random-point mult, fixed-base mult and hash."""

    t_rp: float
    t_fp: float
    t_h: float

    def __post_init__(self):
        if min(self.t_rp, self.t_fp, self.t_h) <= 0:
            raise BenchValidationError("cost_model", "all timings must be positive")

    def modeled(self, counts: OpCounters) -> float:
        return counts.rp * self.t_rp + counts.fp * self.t_fp + counts.h * self.t_h

    def hash_premise_holds(self, ratio: float = HASH_PREMISE_RATIO) -> bool:
        return self.t_h <= ratio * min(self.t_rp, self.t_fp)

    def sanity_warnings(self) -> list[str]:
        warnings = []
        if not self.t_h * 10 < self.t_rp:
            warnings.append("hash is not much cheaper than a random-point multiplication")
        if not self.t_fp < self.t_rp:
            warnings.append("fixed-base multiplication is not cheaper than random-point")
        return warnings

    def as_dict(self) -> dict:
        return {"t_rp": self.t_rp, "t_fp": self.t_fp, "t_h": self.t_h}


@dataclass(frozen=True)
class ComparisonRow:
    scheme: str
    side: str
    n: int
    counts: OpCounters
    modeled_cost: float
    measured_cost: float
    wire_bytes: int

    def csv_record(self) -> dict:
        return {
            "scheme": self.scheme,
            "side": self.side,
            "N": self.n,
            "rp": self.counts.rp,
            "fp": self.counts.fp,
            "h": self.counts.h,
            "modeled_ms": f"{self.modeled_cost * 1000:.4f}",
            "measured_ms": f"{self.measured_cost * 1000:.4f}",
            "wire_bytes": self.wire_bytes,
        }


@dataclass(frozen=True)
class ClaimResult:
    status: str
    reason: str = ""
    ratios: dict | None = None


def _validate_n(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise BenchValidationError("N", "N must be an integer >= 1")


def expected_counts(scheme: str, side: str, n: int) -> OpCounters:
    """Closed-form (rp, fp, h) totals for sending or receiving N stealth transactions."""
    _validate_n(n)
    if scheme not in SCHEMES:
        raise BenchValidationError("scheme", f"scheme must be one of {', '.join(SCHEMES)}")
    if side not in SIDES:
        raise BenchValidationError("side", f"side must be one of {', '.join(SIDES)}")
    if scheme == "dksap":
        return OpCounters(n, 2 * n, n) if side == "sender" else OpCounters(n, n, n)
    return OpCounters(1, n + 1, n) if side == "sender" else OpCounters(1, n, n)


def _median_seconds(op: Callable[[], object], runs: int, batch: int = 1) -> float:
    for _ in range(_WARMUP):
        op()
    samples = []
    for _ in range(runs):
        start = time.perf_counter_ns()
        for _ in range(batch):
            op()
        samples.append((time.perf_counter_ns() - start) / batch)
    median_ns = statistics.median(samples)
    if median_ns <= 0:
        raise TimerResolutionError("timer reported zero elapsed time")
    return median_ns / 1e9


def measure_cost_model(group: Group, iterations: int) -> CostModel:
    """Median host timings for RP, FP and H on deterministic inputs; warmup excluded."""
    if isinstance(iterations, bool) or not isinstance(iterations, int) or iterations < 100:
        raise BenchValidationError("iterations", "iterations must be an integer >= 100")
    resolution = time.get_clock_info("perf_counter").resolution
    session = group.session(deterministic_entropy("cost-model"))
    k = session.random_scalar()
    point = session.scalar_mul_fixed_base(session.random_scalar())
    data = point.encode()

    model = CostModel(
        t_rp=_median_seconds(lambda: session.scalar_mul_random_point(k, point), iterations),
        t_fp=_median_seconds(lambda: session.scalar_mul_fixed_base(k), iterations),
        t_h=_median_seconds(lambda: session.hash_to_scalar(data), iterations, _HASH_BATCH),
    )
    if model.t_h * _HASH_BATCH < resolution * 10:
        raise TimerResolutionError(f"timer resolution {resolution}s too coarse for hashing")
    for warning in model.sanity_warnings():
        log_event(logger, "warning", "bench.cost_model.suspicious", detail=warning, **model.as_dict())
    return model


def run_scheme(group: Group, scheme: str, n: int, *, seed: int = 0, lookahead: int = 1) -> dict:
    """One instrumented epoch of N transactions between a single pair."""
    _validate_n(n)
    keys = keygen(group.session(deterministic_entropy(f"{seed}:bench:receiver")))
    entropy = deterministic_entropy(f"{seed}:bench:{scheme}")
    if scheme == "dksap":
        sender = DksapSender(group, entropy)
        receiver = DksapReceiver(group, keys)

        def send(amount):
            return sender.send(keys.public(), amount)
    elif scheme == "dksap-iot":
        config = EpochConfig(n, lookahead)
        sender = IotSender(group, config, entropy)
        receiver = IotReceiver(group, keys, config)

        def send(amount):
            return sender.send("receiver", keys.public(), amount)
    else:
        raise BenchValidationError("scheme", f"scheme must be one of {', '.join(SCHEMES)}")

    start = time.perf_counter()
    txs = [send(i + 1) for i in range(n)]
    sent = time.perf_counter()
    matches = [receiver.process(tx) for tx in txs]
    received = time.perf_counter()
    return {
        "sender": (sender.session.counters_snapshot(), sent - start),
        "receiver": (receiver.session.counters_snapshot(), received - sent),
        "matched": sum(1 for m in matches if m is not None),
        "wire_bytes": sum(len(tx.encode()) for tx in txs),
        "txs": txs,
    }


def run_comparison(
    group: Group,
    ns: Iterable[int],
    cost_model: CostModel,
    *,
    seed: int = 0,
) -> list[ComparisonRow]:
    """Run both schemes for every N and check counts against the formulas.

    Raises ``CountMismatchError`` after logging every disagreement.
    """
    rows = []
    mismatches = []
    for n in ns:
        for scheme in SCHEMES:
            run = run_scheme(group, scheme, n, seed=seed)
            if run["matched"] != n:
                mismatches.append({"scheme": scheme, "side": "receiver", "N": n, "matched": run["matched"]})
            for side in SIDES:
                counts, elapsed = run[side]
                expected = expected_counts(scheme, side, n)
                if counts != expected:
                    mismatches.append(
                        {"scheme": scheme, "side": side, "N": n,
                         "counted": counts.as_dict(), "expected": expected.as_dict()}
                    )
                rows.append(
                    ComparisonRow(
                        scheme=scheme,
                        side=side,
                        n=n,
                        counts=counts,
                        modeled_cost=cost_model.modeled(counts),
                        measured_cost=elapsed,
                        wire_bytes=run["wire_bytes"],
                    )
                )
    for mismatch in mismatches:
        log_event(logger, "error", "bench.counts.mismatch", **mismatch)
    if mismatches:
        raise CountMismatchError(mismatches)
    return rows


def verify_formula_agreement(group: Group, ns: Iterable[int], *, seed: int = 0) -> list[dict]:
    """Return every (scheme, side, N) whose instrumented counts differ from the formula."""
    mismatches = []
    for n in ns:
        for scheme in SCHEMES:
            run = run_scheme(group, scheme, n, seed=seed)
            for side in SIDES:
                counts, _ = run[side]
                if counts != expected_counts(scheme, side, n):
                    mismatches.append({"scheme": scheme, "side": side, "N": n, "counted": counts.as_dict()})
    return mismatches


def wire_savings(rows: list[ComparisonRow], n: int) -> int:
    by_scheme = {row.scheme: row.wire_bytes for row in rows if row.n == n and row.side == "sender"}
    return by_scheme["dksap"] - by_scheme["dksap-iot"]


def expected_wire_savings(group: Group, n: int) -> int:
    _validate_n(n)
    return group.params.point_length * (n - 1)


def _side_totals(rows: list[ComparisonRow], scheme: str, n: int) -> float:
    return sum(row.modeled_cost for row in rows if row.scheme == scheme and row.n == n)


def check_half_cost_claim(rows: list[ComparisonRow], cost_model: CostModel, ns: Iterable[int]) -> ClaimResult:
    """Modeled key-evolving total (both sides) must stay within half the baseline total."""
    if not cost_model.hash_premise_holds():
        reason = f"t_h={cost_model.t_h:.3e}s exceeds {HASH_PREMISE_RATIO} x min(t_rp, t_fp)"
        log_event(logger, "warning", "bench.premise.skipped", reason=reason)
        return ClaimResult("skipped", reason)
    ratios = {}
    for n in ns:
        baseline = _side_totals(rows, "dksap", n)
        ratios[n] = _side_totals(rows, "dksap-iot", n) / baseline
    failed = {n: ratio for n, ratio in ratios.items() if ratio > 0.5}
    if failed:
        return ClaimResult("failed", f"ratio above 0.5 for N in {sorted(failed)}", ratios)
    return ClaimResult("passed", "", ratios)


def rows_to_csv(rows: list[ComparisonRow], *, include_timings: bool = True) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        record = row.csv_record()
        if not include_timings:
            record["modeled_ms"] = record["measured_ms"] = ""
        writer.writerow(record)
    return buffer.getvalue()


def write_csv(rows: list[ComparisonRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(rows_to_csv(rows))
