"""Key-evolving stealth protocol with per-peer hash-chain state.

One ECDH exchange serves an epoch of N transactions. The first transaction of an
epoch carries R_A and seeds h_0 = H(encode(r_A*V_B)); every later one omits R_A
and pays to h_i*G + S_B with h_i = H(encode(h_{i-1})).

Counter convention: ``cnt`` counts transactions already processed in the epoch.
The sender starts a new epoch when cnt = N; the receiver accepts a warm hit while
cnt <= N before the update. Once cnt reaches N the stored chain value is erased,
so no table ever holds h_j with j < cnt.

The ledger carries no sender identity. A receiver labels each slot with a prefix
of the encoded R_A that opened it and finds warm transactions by their expected
destination. Replaying a cold transaction whose slot exists reports the match and
leaves the slot alone.

State file layout::

    b"SKST" | version u8 | kind u8 | point length u8 | scalar length u8
            | N u32 | lookahead u8 | record count u32
    sender record:   id len u16 | id | cnt u32 | h | V_B | S_B
    receiver record: id len u16 | id | cnt u32 | h | entry count u8
                     | per entry: index u32 | h_index | T | t

Chain values and spend keys are fixed-length scalars; an erased or absent value is
all-zero bytes. The file is plaintext: deployments must encrypt it at rest.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from stealthkit.dksap import (
    AuditorBundle,
    KeyBundle,
    PublicBundle,
    derive_shared_secret_receiver,
    derive_shared_secret_sender,
)
from stealthkit.events import get_logger, log_event
from stealthkit.group import DecodeError, Group, GroupElement, GroupSession, Scalar
from stealthkit.wire import ByteReader, StealthTx, check_amount, coerce_tx


STATE_MAGIC = b"SKST"
STATE_VERSION = 1
_KIND_CODES = {"sender": 1, "receiver": 2, "auditor": 3}
_KIND_NAMES = {code: name for name, code in _KIND_CODES.items()}

logger = get_logger("iot")


class EpochConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class StateFormatError(ValueError):
    """Raised on corrupt, truncated or unknown-version state files."""


@dataclass(frozen=True)
class EpochConfig:
    n: int
    lookahead: int = 1

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise EpochConfigError("n", "epoch length N must be an integer >= 1")
        if isinstance(self.lookahead, bool) or not isinstance(self.lookahead, int) or not 1 <= self.lookahead <= 255:
            raise EpochConfigError("lookahead", "lookahead window must be between 1 and 255")


@dataclass
class SenderPeerState:
    peer_id: str
    recipient: PublicBundle
    cnt: int
    h: Scalar | None = field(repr=False)


@dataclass(frozen=True)
class ExpectedKey:
    index: int
    chain_value: Scalar = field(repr=False)
    destination: GroupElement
    spend_key: Scalar | None = field(repr=False)


@dataclass
class ReceiverPeerState:
    peer_id: str
    cnt: int
    h: Scalar | None = field(repr=False)
    expected: list[ExpectedKey] = field(default_factory=list)

    @property
    def expected_destination(self) -> GroupElement | None:
        return self.expected[0].destination if self.expected else None

    @property
    def expected_spend_key(self) -> Scalar | None:
        return self.expected[0].spend_key if self.expected else None

    def chain_indices(self) -> list[int]:
        """Indices of every chain value this slot still holds."""
        indices = [entry.index for entry in self.expected]
        if self.h is not None and not indices:
            indices.append(self.cnt)
        return indices


class SenderStateTable:
    """Sender-side peer table. Single writer."""

    kind = "sender"

    def __init__(self, config: EpochConfig):
        self.config = config
        self._peers: dict[str, SenderPeerState] = {}

    def __len__(self) -> int:
        return len(self._peers)

    def __contains__(self, peer_id: str) -> bool:
        return peer_id in self._peers

    def get(self, peer_id: str) -> SenderPeerState | None:
        return self._peers.get(peer_id)

    def put(self, state: SenderPeerState) -> None:
        self._peers[state.peer_id] = state

    def peers(self) -> list[SenderPeerState]:
        return list(self._peers.values())


class ReceiverStateTable:
    """Receiver or auditor slot table with an index on expected destinations. Single writer."""

    def __init__(self, config: EpochConfig, kind: str = "receiver"):
        if kind not in ("receiver", "auditor"):
            raise StateFormatError(f"unknown receiver table kind {kind}")
        self.config = config
        self.kind = kind
        self._slots: dict[str, ReceiverPeerState] = {}
        self._index: dict[bytes, str] = {}
        # Destinations each slot currently has in the index; states are mutated in place.
        self._indexed: dict[str, list[bytes]] = {}

    def __len__(self) -> int:
        return len(self._slots)

    def __contains__(self, peer_id: str) -> bool:
        return peer_id in self._slots

    def get(self, peer_id: str) -> ReceiverPeerState | None:
        return self._slots.get(peer_id)

    def peers(self) -> list[ReceiverPeerState]:
        return list(self._slots.values())

    def lookup(self, destination: GroupElement) -> tuple[ReceiverPeerState, ExpectedKey] | None:
        slot_id = self._index.get(destination.encode())
        if slot_id is None:
            return None
        state = self._slots[slot_id]
        for entry in state.expected:
            if entry.destination == destination:
                return state, entry
        return None

    def index_size(self) -> int:
        return len(self._index)

    def _unindex(self, peer_id: str) -> None:
        for key in self._indexed.pop(peer_id, ()):
            self._index.pop(key, None)

    def store(self, state: ReceiverPeerState) -> None:
        self._unindex(state.peer_id)
        self._slots[state.peer_id] = state
        keys = [entry.destination.encode() for entry in state.expected]
        for key in keys:
            self._index[key] = state.peer_id
        self._indexed[state.peer_id] = keys

    def prune_exhausted(self) -> int:
        """Drop slots whose epoch is complete; returns how many were removed.

        Exhausted slots are what keep a rescan from reopening an epoch, so prune
        only once the scanned range has moved past their cold transactions.
        """
        exhausted = [slot for slot, state in self._slots.items() if not state.expected]
        for slot in exhausted:
            self._unindex(slot)
            del self._slots[slot]
        return len(exhausted)


@dataclass(frozen=True, repr=False)
class IotMatch:
    spend_key: Scalar
    peer_id: str
    index: int
    cold: bool
    destination: GroupElement

    def __repr__(self) -> str:
        return f"IotMatch(peer_id={self.peer_id!r}, index={self.index}, cold={self.cold})"


@dataclass(frozen=True)
class IotSighting:
    peer_id: str
    index: int
    cold: bool
    destination: GroupElement


def chain_step(session: GroupSession, h: Scalar) -> Scalar:
    return session.hash_to_scalar(h.to_bytes())


def epoch_chain(session: GroupSession, h0: Scalar, i: int) -> Scalar:
    """The i-fold hash-chain image of h0 (costs i hashes)."""
    if i < 0:
        raise ValueError("chain index must be >= 0")
    h = h0
    for _ in range(i):
        h = chain_step(session, h)
    return h


def slot_id_for(ephemeral: GroupElement) -> str:
    return ephemeral.encode().hex()[:32]


def sender_send(
    session: GroupSession,
    table: SenderStateTable,
    peer_id: str,
    recipient: PublicBundle,
    amount: int,
    config: EpochConfig | None = None,
) -> StealthTx:
    """Cold path 1 RP + 2 FP + 1 H, warm path 1 FP; plus one chain hash unless the epoch ends."""
    config = config or table.config
    check_amount(amount)
    state = table.get(peer_id)
    if state is None or state.recipient != recipient or state.h is None or state.cnt >= config.n:
        ephemeral_private = session.random_scalar()
        ephemeral = session.scalar_mul_fixed_base(ephemeral_private)
        h0 = derive_shared_secret_sender(session, ephemeral_private, recipient.scan_public)
        tx = StealthTx(ephemeral, session.scalar_mul_fixed_base(h0) + recipient.spend_public, amount)
        state = SenderPeerState(peer_id, recipient, 0, h0)
        table.put(state)
        log_event(logger, "debug", "iot.epoch.refreshed", peer_id=peer_id, epoch_n=config.n)
    else:
        tx = StealthTx(None, session.scalar_mul_fixed_base(state.h) + recipient.spend_public, amount)

    state.cnt += 1
    state.h = chain_step(session, state.h) if state.cnt < config.n else None
    return tx


def _expected_key(session, index, chain_value, spend_public, spend_private) -> ExpectedKey:
    destination = session.scalar_mul_fixed_base(chain_value) + spend_public
    spend_key = None if spend_private is None else chain_value + spend_private
    return ExpectedKey(index, chain_value, destination, spend_key)


def _advance(session, table, state, consumed: ExpectedKey, spend_public, spend_private, config) -> None:
    state.cnt = consumed.index + 1
    if state.cnt >= config.n:
        state.h = None
        state.expected = []
        table.store(state)
        return
    window = [entry for entry in state.expected if entry.index >= state.cnt]
    last = window[-1] if window else consumed
    target = min(state.cnt + config.lookahead - 1, config.n - 1)
    while last.index < target:
        last = _expected_key(session, last.index + 1, chain_step(session, last.chain_value), spend_public, spend_private)
        window.append(last)
    state.expected = window
    state.h = window[0].chain_value
    table.store(state)


def _track(session, table, scan_private, spend_public, spend_private, tx, config):
    config = config or table.config
    tx = coerce_tx(session.group, tx)
    if tx.ephemeral is not None:
        h0 = derive_shared_secret_receiver(session, scan_private, tx.ephemeral)
        entry = _expected_key(session, 0, h0, spend_public, spend_private)
        if entry.destination != tx.destination:
            return None
        slot_id = slot_id_for(tx.ephemeral)
        if slot_id not in table:
            state = ReceiverPeerState(slot_id, 0, h0, [entry])
            _advance(session, table, state, entry, spend_public, spend_private, config)
            log_event(logger, "debug", "iot.slot.opened", peer_id=slot_id, role=table.kind)
        return slot_id, entry, True

    hit = table.lookup(tx.destination)
    if hit is None:
        return None
    state, entry = hit
    if state.cnt > config.n:
        return None
    _advance(session, table, state, entry, spend_public, spend_private, config)
    return state.peer_id, entry, False


def receiver_process(
    session: GroupSession,
    table: ReceiverStateTable,
    keys: KeyBundle,
    tx,
    config: EpochConfig | None = None,
) -> IotMatch | None:
    """Cold hit 1 RP + 1 FP + 1 H plus precompute; warm hit is a lookup plus precompute."""
    tracked = _track(session, table, keys.scan_private, keys.spend_public, keys.spend_private, tx, config)
    if tracked is None:
        return None
    peer_id, entry, cold = tracked
    if entry.spend_key.is_zero():
        return None
    return IotMatch(entry.spend_key, peer_id, entry.index, cold, entry.destination)


def auditor_process(
    session: GroupSession,
    table: ReceiverStateTable,
    bundle: AuditorBundle,
    tx,
    config: EpochConfig | None = None,
) -> IotSighting | None:
    tracked = _track(session, table, bundle.scan_private, bundle.spend_public, None, tx, config)
    if tracked is None:
        return None
    peer_id, entry, cold = tracked
    return IotSighting(peer_id, entry.index, cold, entry.destination)


def _scalar_bytes(value: Scalar | None, length: int) -> bytes:
    return bytes(length) if value is None else value.to_bytes()


def _pack_id(peer_id: str) -> bytes:
    raw = peer_id.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise StateFormatError("peer id too long")
    return struct.pack(">H", len(raw)) + raw


def state_export(table: SenderStateTable | ReceiverStateTable, group: Group) -> bytes:
    params = group.params
    records = [
        STATE_MAGIC,
        struct.pack(
            ">BBBBIBI",
            STATE_VERSION,
            _KIND_CODES[table.kind],
            params.point_length,
            params.scalar_length,
            table.config.n,
            table.config.lookahead,
            len(table),
        ),
    ]
    for state in table.peers():
        records.append(_pack_id(state.peer_id))
        records.append(struct.pack(">I", state.cnt))
        records.append(_scalar_bytes(state.h, params.scalar_length))
        if table.kind == "sender":
            records.append(state.recipient.scan_public.encode())
            records.append(state.recipient.spend_public.encode())
            continue
        records.append(struct.pack(">B", len(state.expected)))
        for entry in state.expected:
            records.append(struct.pack(">I", entry.index))
            records.append(entry.chain_value.to_bytes())
            records.append(entry.destination.encode())
            records.append(_scalar_bytes(entry.spend_key, params.scalar_length))
    return b"".join(records)


def _read_scalar(group: Group, reader: ByteReader, *, optional: bool) -> Scalar | None:
    raw = reader.take(group.params.scalar_length)
    if not any(raw):
        if optional:
            return None
        raise StateFormatError("required scalar is zero")
    try:
        return group.decode_scalar(raw)
    except DecodeError as exc:
        raise StateFormatError(str(exc)) from exc


def _read_point(group: Group, reader: ByteReader) -> GroupElement:
    try:
        point = group.decode_point(reader.take(group.params.point_length))
    except DecodeError as exc:
        raise StateFormatError(str(exc)) from exc
    if point.is_identity():
        raise StateFormatError("state holds an identity key")
    return point


def _read_sender_record(group, reader, peer_id, cnt, h, config) -> SenderPeerState:
    recipient = PublicBundle(_read_point(group, reader), _read_point(group, reader))
    if (h is None) != (cnt >= config.n):
        raise StateFormatError(f"peer {peer_id}: chain value inconsistent with counter")
    return SenderPeerState(peer_id, recipient, cnt, h)


def _read_receiver_record(group, reader, peer_id, cnt, h, kind) -> ReceiverPeerState:
    entries = []
    for _ in range(reader.u8()):
        index = reader.u32()
        chain_value = _read_scalar(group, reader, optional=False)
        destination = _read_point(group, reader)
        spend_key = _read_scalar(group, reader, optional=True)
        if index < cnt:
            raise StateFormatError(f"peer {peer_id}: expected key behind the counter")
        if (spend_key is None) != (kind == "auditor"):
            raise StateFormatError(f"peer {peer_id}: spend key presence does not match table kind")
        entries.append(ExpectedKey(index, chain_value, destination, spend_key))
    return ReceiverPeerState(peer_id, cnt, h, entries)


def state_import(data: bytes, group: Group) -> SenderStateTable | ReceiverStateTable:
    reader = ByteReader(data, StateFormatError)
    if reader.take(4) != STATE_MAGIC:
        raise StateFormatError("not a state file")
    version, kind_code, point_length, scalar_length, n, lookahead, count = struct.unpack(
        ">BBBBIBI", reader.take(13)
    )
    if version != STATE_VERSION:
        raise StateFormatError(f"unknown state version {version}")
    if kind_code not in _KIND_NAMES:
        raise StateFormatError(f"unknown table kind {kind_code}")
    if (point_length, scalar_length) != (group.params.point_length, group.params.scalar_length):
        raise StateFormatError("state file was written for a different group backend")
    try:
        config = EpochConfig(n, lookahead)
    except EpochConfigError as exc:
        raise StateFormatError(str(exc)) from exc

    kind = _KIND_NAMES[kind_code]
    table = SenderStateTable(config) if kind == "sender" else ReceiverStateTable(config, kind)
    for _ in range(count):
        try:
            peer_id = reader.take(reader.u16()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StateFormatError("peer id is not UTF-8") from exc
        cnt = reader.u32()
        if cnt > config.n:
            raise StateFormatError(f"peer {peer_id}: counter beyond epoch length")
        h = _read_scalar(group, reader, optional=True)
        if kind == "sender":
            table.put(_read_sender_record(group, reader, peer_id, cnt, h, config))
        else:
            table.store(_read_receiver_record(group, reader, peer_id, cnt, h, kind))
    reader.expect_end()
    log_event(logger, "info", "iot.state.imported", kind=kind, peers=len(table), epoch_n=config.n)
    return table


class IotSender:
    scheme = "dksap-iot"

    def __init__(self, group: Group, config: EpochConfig, entropy=None, table: SenderStateTable | None = None):
        self.group = group
        self.session = group.session(entropy)
        self.table = table or SenderStateTable(config)

    def send(self, peer_id: str, recipient: PublicBundle, amount: int) -> StealthTx:
        return sender_send(self.session, self.table, peer_id, recipient, amount)


class IotReceiver:
    scheme = "dksap-iot"
    role = "receiver"

    def __init__(self, group: Group, keys: KeyBundle, config: EpochConfig, table: ReceiverStateTable | None = None):
        self.group = group
        self.session = group.session()
        self.keys = keys
        self.table = table or ReceiverStateTable(config, "receiver")

    def process(self, tx) -> IotMatch | None:
        return receiver_process(self.session, self.table, self.keys, tx)


class IotAuditor:
    scheme = "dksap-iot"
    role = "auditor"

    def __init__(self, group: Group, bundle: AuditorBundle, config: EpochConfig, table: ReceiverStateTable | None = None):
        self.group = group
        self.session = group.session()
        self.bundle = bundle
        self.table = table or ReceiverStateTable(config, "auditor")

    def process(self, tx) -> IotSighting | None:
        return auditor_process(self.session, self.table, self.bundle, tx)
