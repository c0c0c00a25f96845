"""Transaction records and the byte formats shared by the protocol modules.

StealthTx wire layout::

    flag (1 byte, 0x01 when R_A is present)
    [encode(R_A)]            only when flag is set
    encode(T_A)
    amount                   8-byte big-endian

A warm-path stealth tx and a regular tx (flag clear, ordinary destination) have
the same length and field layout.

Ledger file layout::

    b"SKLG" | version u8 | block count u32
    per block:  block length u32 | tx count u32 | per tx: tx length u16 | tx bytes
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

from stealthkit.group import DecodeError, Group, GroupElement


MAX_AMOUNT = (1 << 64) - 1
FLAG_EPHEMERAL = 0x01
FLAG_NONE = 0x00
LEDGER_MAGIC = b"SKLG"
LEDGER_VERSION = 1


class MalformedTxError(ValueError):
    """Structured error for undecodable or invalid transaction records."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class LedgerFormatError(ValueError):
    """Raised on corrupt, truncated or unknown-version ledger files."""


class ByteReader:
    """Cursor over a byte string; short reads raise ``make_error(message)``."""

    def __init__(self, data: bytes, make_error: Callable[[str], Exception] = ValueError):
        self._data = memoryview(bytes(data))
        self._offset = 0
        self._make_error = make_error

    @property
    def remaining(self) -> int:
        return len(self._data) - self._offset

    def take(self, size: int) -> bytes:
        if size < 0 or self.remaining < size:
            raise self._make_error(f"truncated input: wanted {size} bytes at offset {self._offset}")
        chunk = self._data[self._offset:self._offset + size].tobytes()
        self._offset += size
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def expect_end(self) -> None:
        if self.remaining:
            raise self._make_error(f"{self.remaining} trailing bytes")


def check_amount(amount: int) -> int:
    if isinstance(amount, bool) or not isinstance(amount, int):
        raise MalformedTxError("amount", "amount must be an integer")
    if not 0 <= amount <= MAX_AMOUNT:
        raise MalformedTxError("amount", "amount must fit in 8 unsigned bytes")
    return amount


def pack_amount(amount: int) -> bytes:
    return struct.pack(">Q", check_amount(amount))


def decode_element(group: Group, data: bytes, field: str) -> GroupElement:
    try:
        element = group.decode_point(data)
    except DecodeError as exc:
        raise MalformedTxError(field, str(exc)) from exc
    if element.is_identity():
        raise MalformedTxError(field, f"{field} must not be the identity")
    return element


@dataclass(frozen=True)
class StealthTx:
    """Ledger record: optional ephemeral key R_A, destination T_A, opaque amount."""

    ephemeral: GroupElement | None
    destination: GroupElement
    amount: int

    def __post_init__(self):
        check_amount(self.amount)
        if self.ephemeral is not None and self.ephemeral.is_identity():
            raise MalformedTxError("ephemeral", "ephemeral must not be the identity")
        if self.destination.is_identity():
            raise MalformedTxError("destination", "destination must not be the identity")

    @property
    def carries_ephemeral(self) -> bool:
        return self.ephemeral is not None

    def encode(self) -> bytes:
        if self.ephemeral is None:
            head = bytes([FLAG_NONE])
        else:
            head = bytes([FLAG_EPHEMERAL]) + self.ephemeral.encode()
        return head + self.destination.encode() + pack_amount(self.amount)

    @classmethod
    def decode(cls, group: Group, data: bytes) -> "StealthTx":
        reader = ByteReader(data, lambda msg: MalformedTxError("tx", msg))
        flag = reader.u8()
        if flag not in (FLAG_NONE, FLAG_EPHEMERAL):
            raise MalformedTxError("flag", f"unknown flag byte 0x{flag:02x}")
        ephemeral = None
        if flag == FLAG_EPHEMERAL:
            ephemeral = decode_element(group, reader.take(group.params.point_length), "ephemeral")
        destination = decode_element(group, reader.take(group.params.point_length), "destination")
        amount = reader.u64()
        reader.expect_end()
        return cls(ephemeral, destination, amount)


def coerce_tx(group: Group, tx: "StealthTx | bytes") -> StealthTx:
    if isinstance(tx, StealthTx):
        return tx
    if isinstance(tx, (bytes, bytearray, memoryview)):
        return StealthTx.decode(group, bytes(tx))
    raise MalformedTxError("tx", f"unsupported transaction type {type(tx).__name__}")


def tx_length(point_length: int, with_ephemeral: bool) -> int:
    return 1 + point_length * (2 if with_ephemeral else 1) + 8


def is_regular_format(data: bytes, point_length: int) -> bool:
    """True when ``data`` has the flag-clear destination-plus-amount layout."""
    return len(data) == tx_length(point_length, False) and data[0] == FLAG_NONE


def encode_ledger_blocks(blocks: list[list[bytes]]) -> bytes:
    out = [LEDGER_MAGIC, struct.pack(">BI", LEDGER_VERSION, len(blocks))]
    for txs in blocks:
        body = [struct.pack(">I", len(txs))]
        for raw in txs:
            body.append(struct.pack(">H", len(raw)))
            body.append(raw)
        payload = b"".join(body)
        out.append(struct.pack(">I", len(payload)))
        out.append(payload)
    return b"".join(out)


def decode_ledger_blocks(data: bytes) -> list[list[bytes]]:
    reader = ByteReader(data, LedgerFormatError)
    if reader.take(4) != LEDGER_MAGIC:
        raise LedgerFormatError("not a ledger file")
    version = reader.u8()
    if version != LEDGER_VERSION:
        raise LedgerFormatError(f"unknown ledger version {version}")
    blocks = []
    for _ in range(reader.u32()):
        block = ByteReader(reader.take(reader.u32()), LedgerFormatError)
        txs = [block.take(block.u16()) for _ in range(block.u32())]
        block.expect_end()
        blocks.append(txs)
    reader.expect_end()
    return blocks
