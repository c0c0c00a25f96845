"""Tests for transaction records and ledger file framing."""
import pytest

from stealthkit.group import deterministic_entropy, get_group
from stealthkit.wire import (
    LedgerFormatError,
    MalformedTxError,
    StealthTx,
    decode_ledger_blocks,
    encode_ledger_blocks,
    is_regular_format,
    tx_length,
)


def _points(count, seed="wire"):
    group = get_group()
    session = group.session(deterministic_entropy(seed))
    return [session.scalar_mul_fixed_base(session.random_scalar()) for _ in range(count)]


def test_layout_lengths():
    assert tx_length(33, True) == 75
    assert tx_length(33, False) == 42
    ephemeral, destination = _points(2)
    cold = StealthTx(ephemeral, destination, 10)
    warm = StealthTx(None, destination, 10)
    assert cold.encode()[0] == 0x01 and len(cold.encode()) == 75
    assert warm.encode()[0] == 0x00 and len(warm.encode()) == 42
    assert len(cold.encode()) - len(warm.encode()) == 33


def test_decode_restores_records():
    group = get_group()
    ephemeral, destination = _points(2)
    for tx in (StealthTx(ephemeral, destination, 2**64 - 1), StealthTx(None, destination, 0)):
        assert StealthTx.decode(group, tx.encode()) == tx


def test_warm_record_looks_like_regular_payment():
    ephemeral, stealth_destination, plain_destination = _points(3)
    warm = StealthTx(None, stealth_destination, 77).encode()
    regular = StealthTx(None, plain_destination, 77).encode()
    assert is_regular_format(warm, 33)
    assert is_regular_format(regular, 33)
    assert len(warm) == len(regular)
    assert not is_regular_format(StealthTx(ephemeral, stealth_destination, 77).encode(), 33)


def test_decode_rejects_malformed_records():
    group = get_group()
    _, destination = _points(2)
    encoded = StealthTx(None, destination, 5).encode()
    with pytest.raises(MalformedTxError) as excinfo:
        StealthTx.decode(group, b"\x02" + encoded[1:])
    assert excinfo.value.field == "flag"
    with pytest.raises(MalformedTxError):
        StealthTx.decode(group, encoded[:-1])
    with pytest.raises(MalformedTxError):
        StealthTx.decode(group, encoded + b"\x00")
    with pytest.raises(MalformedTxError) as excinfo:
        StealthTx.decode(group, b"\x00" + bytes(33) + encoded[-8:])
    assert excinfo.value.field == "destination"


def test_records_reject_identity_and_bad_amounts():
    group = get_group()
    (destination,) = _points(1)
    with pytest.raises(MalformedTxError):
        StealthTx(None, group.identity, 1)
    with pytest.raises(MalformedTxError):
        StealthTx(group.identity, destination, 1)
    with pytest.raises(MalformedTxError) as excinfo:
        StealthTx(None, destination, 2**64)
    assert excinfo.value.field == "amount"
    with pytest.raises(MalformedTxError):
        StealthTx(None, destination, True)


def test_ledger_framing():
    blocks = [[b"\x00abc", b"\x01"], [], [b"x" * 300]]
    data = encode_ledger_blocks(blocks)
    assert data[:4] == b"SKLG"
    assert decode_ledger_blocks(data) == blocks


def test_ledger_framing_rejects_corruption():
    data = encode_ledger_blocks([[b"abc"]])
    with pytest.raises(LedgerFormatError):
        decode_ledger_blocks(b"NOPE" + data[4:])
    with pytest.raises(LedgerFormatError):
        decode_ledger_blocks(data[:-1])
    with pytest.raises(LedgerFormatError):
        decode_ledger_blocks(data + b"\x00")
    bumped = bytearray(data)
    bumped[4] = 2
    with pytest.raises(LedgerFormatError):
        decode_ledger_blocks(bytes(bumped))
