"""Simulated append-only ledger, in-order scanning and traffic generation.

The ledger gives a total order. Receivers are expected to scan contiguously
from their last scanned height; the warm path of the key-evolving scheme only
works when transactions are seen in emission order.
"""
from __future__ import annotations

import os
import random
import threading
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from stealthkit.dksap import DksapSender, KeyBundle, keygen
from stealthkit.dksap_iot import EpochConfig, IotSender
from stealthkit.events import get_logger, log_event
from stealthkit.group import Group, GroupElement, GroupSession, OpCounters, Scalar, deterministic_entropy
from stealthkit.wire import (
    LedgerFormatError,
    MalformedTxError,
    StealthTx,
    coerce_tx,
    decode_ledger_blocks,
    encode_ledger_blocks,
)


SCHEMES = ("dksap", "dksap-iot")

logger = get_logger("ledger")


class LedgerError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class TrafficSpecError(LedgerError):
    """Invalid traffic generation spec."""


@dataclass(frozen=True)
class Block:
    height: int
    txs: tuple[StealthTx, ...]


class Ledger:
    """Append-only block list. Reads see an immutable snapshot; appends are serialized."""

    def __init__(self, group: Group):
        self.group = group
        self._blocks: tuple[Block, ...] = ()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._blocks)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return self._blocks

    def tx_count(self) -> int:
        return sum(len(block.txs) for block in self._blocks)

    def append_block(self, txs: Iterable[StealthTx | bytes]) -> int:
        decoded = []
        for index, tx in enumerate(txs):
            try:
                decoded.append(coerce_tx(self.group, tx))
            except MalformedTxError as exc:
                log_event(logger, "warning", "ledger.block.rejected", tx_index=index, field=exc.field, error=exc.message)
                raise LedgerError(f"txs[{index}].{exc.field}", exc.message) from exc
        with self._lock:
            height = len(self._blocks)
            self._blocks = self._blocks + (Block(height, tuple(decoded)),)
        log_event(logger, "debug", "ledger.block.appended", height=height, txs=len(decoded))
        return height

    def export_bytes(self) -> bytes:
        return encode_ledger_blocks([[tx.encode() for tx in block.txs] for block in self._blocks])

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "Ledger":
        ledger = cls(group)
        for height, txs in enumerate(decode_ledger_blocks(data)):
            try:
                ledger.append_block(txs)
            except LedgerError as exc:
                raise LedgerFormatError(f"block {height}: {exc.message}") from exc
        return ledger

    def save(self, path: str) -> None:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(self.export_bytes())

    @classmethod
    def load(cls, group: Group, path: str) -> "Ledger":
        with open(path, "rb") as f:
            return cls.from_bytes(group, f.read())


def append_block(ledger: Ledger, txs: Iterable[StealthTx | bytes]) -> int:
    return ledger.append_block(txs)


class ScanActor(Protocol):
    role: str
    session: GroupSession

    def process(self, tx: StealthTx):
        """Return a match object or None."""


@dataclass(frozen=True, repr=False)
class LedgerMatch:
    height: int
    tx_index: int
    spend_key: Scalar
    destination: GroupElement

    def __repr__(self) -> str:
        return f"LedgerMatch(height={self.height}, tx_index={self.tx_index})"


@dataclass(frozen=True)
class LedgerSighting:
    height: int
    tx_index: int
    destination: GroupElement


@dataclass(frozen=True)
class ScanReport:
    matches: list[LedgerMatch]
    counters: OpCounters
    txs_scanned: int

    def positions(self) -> set[tuple[int, int]]:
        return {(m.height, m.tx_index) for m in self.matches}


@dataclass(frozen=True)
class AuditReport:
    """Auditor scan result; sightings carry destinations only."""

    matches: list[LedgerSighting]
    counters: OpCounters
    txs_scanned: int

    def positions(self) -> set[tuple[int, int]]:
        return {(m.height, m.tx_index) for m in self.matches}


def scan_range(actor: ScanActor, ledger: Ledger, from_height: int = 0, to_height: int | None = None):
    """Feed blocks ``from_height..to_height`` (inclusive) through the actor in order."""
    blocks = ledger.blocks
    if to_height is None:
        to_height = len(blocks) - 1
    if from_height < 0 or to_height >= len(blocks) or from_height > to_height:
        raise LedgerError("range", f"height range {from_height}..{to_height} outside ledger of {len(blocks)} blocks")

    auditing = actor.role == "auditor"
    before = actor.session.counters_snapshot()
    matches = []
    scanned = 0
    for block in blocks[from_height:to_height + 1]:
        for index, tx in enumerate(block.txs):
            scanned += 1
            found = actor.process(tx)
            if found is None:
                continue
            if auditing:
                matches.append(LedgerSighting(block.height, index, found.destination))
            else:
                matches.append(LedgerMatch(block.height, index, found.spend_key, found.destination))
    counters = actor.session.counters_snapshot() - before
    log_event(
        logger,
        "info",
        "ledger.scan.completed",
        role=actor.role,
        scheme=getattr(actor, "scheme", ""),
        from_height=from_height,
        to_height=to_height,
        txs_scanned=scanned,
        matches=len(matches),
        **counters.as_dict(),
    )
    report_cls = AuditReport if auditing else ScanReport
    return report_cls(matches=matches, counters=counters, txs_scanned=scanned)


@dataclass(frozen=True)
class TrafficSpec:
    senders: int = 1
    receivers: int = 3
    txs_per_pair: int = 10
    seed: int = 0
    epoch_n: int = 10
    scheme: str = "dksap-iot"
    regular_txs: int = 0
    txs_per_block: int = 16
    lookahead: int = 1

    def __post_init__(self):
        for name in ("senders", "receivers", "txs_per_pair", "epoch_n", "txs_per_block", "lookahead"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise TrafficSpecError(name, f"{name} must be an integer >= 1")
        if isinstance(self.regular_txs, bool) or not isinstance(self.regular_txs, int) or self.regular_txs < 0:
            raise TrafficSpecError("regular_txs", "regular_txs must be an integer >= 0")
        if self.scheme not in SCHEMES:
            raise TrafficSpecError("scheme", f"scheme must be one of {', '.join(SCHEMES)}")


@dataclass(frozen=True, repr=False)
class Party:
    label: str
    keys: KeyBundle

    def __repr__(self) -> str:
        return f"Party({self.label!r})"


@dataclass
class Traffic:
    """A generated ledger plus the ground truth needed to check scans against it."""

    ledger: Ledger
    receivers: list[Party]
    ownership: dict[tuple[int, int], str] = field(default_factory=dict)
    regular: set[tuple[int, int]] = field(default_factory=set)

    def owned_by(self, label: str) -> set[tuple[int, int]]:
        return {position for position, owner in self.ownership.items() if owner == label}


def traffic_parties(group: Group, spec: TrafficSpec) -> list[Party]:
    """Receiver key bundles derived from the traffic seed."""
    return [
        Party(f"receiver-{i}", keygen(group.session(deterministic_entropy(f"{spec.seed}:receiver:{i}"))))
        for i in range(spec.receivers)
    ]


def _make_sender(group: Group, spec: TrafficSpec, index: int):
    entropy = deterministic_entropy(f"{spec.seed}:sender:{index}")
    if spec.scheme == "dksap":
        return DksapSender(group, entropy)
    return IotSender(group, EpochConfig(spec.epoch_n, spec.lookahead), entropy)


def generate_traffic(group: Group, spec: TrafficSpec) -> Traffic:
    """Interleave sender->receiver streams (per-pair order kept) and optional regular txs."""
    rng = random.Random(f"traffic:{spec.seed}")
    receivers = traffic_parties(group, spec)
    senders = [_make_sender(group, spec, i) for i in range(spec.senders)]
    noise = group.session(deterministic_entropy(f"{spec.seed}:regular"))

    schedule: list[tuple[int, int] | None] = [
        (s, r) for s in range(spec.senders) for r in range(spec.receivers) for _ in range(spec.txs_per_pair)
    ]
    schedule.extend([None] * spec.regular_txs)
    rng.shuffle(schedule)

    emitted: list[tuple[StealthTx, str | None]] = []
    for slot in schedule:
        amount = rng.randrange(1, 1_000_000)
        if slot is None:
            destination = noise.scalar_mul_fixed_base(noise.random_scalar())
            emitted.append((StealthTx(None, destination, amount), None))
            continue
        sender_index, receiver_index = slot
        sender = senders[sender_index]
        party = receivers[receiver_index]
        if spec.scheme == "dksap":
            tx = sender.send(party.keys.public(), amount)
        else:
            tx = sender.send(party.label, party.keys.public(), amount)
        emitted.append((tx, party.label))

    traffic = Traffic(Ledger(group), receivers)
    for start in range(0, len(emitted), spec.txs_per_block):
        chunk = emitted[start:start + spec.txs_per_block]
        height = traffic.ledger.append_block([tx for tx, _ in chunk])
        for index, (_, owner) in enumerate(chunk):
            if owner is None:
                traffic.regular.add((height, index))
            else:
                traffic.ownership[(height, index)] = owner
    log_event(
        logger,
        "info",
        "ledger.traffic.generated",
        scheme=spec.scheme,
        blocks=len(traffic.ledger),
        txs=len(emitted),
        seed=spec.seed,
    )
    return traffic


def traffic_generate(group: Group, spec: TrafficSpec) -> Ledger:
    return generate_traffic(group, spec).ledger
