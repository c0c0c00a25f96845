"""Baseline dual-key stealth address protocol.

A receiver publishes a scan key V_B and a spend key S_B. For every payment the
sender draws an ephemeral pair (r_A, R_A = r_A*G), derives the shared secret
c_AB = H(encode(r_A*V_B)) and pays to T_A = c_AB*G + S_B. The receiver recomputes
c_AB = H(encode(v_B*R_A)) and, on a match, spends with t_A = c_AB + s_B.

An auditor holding only (v_B, S_B) detects the same payments but has no way to
build t_A: its bundle type has no spend private key and its results carry none.

Payment wire format: encode(R_A) | encode(T_A) | amount (8-byte big-endian).
"""
from __future__ import annotations

from dataclasses import dataclass

from stealthkit.group import GroupElement, GroupError, GroupSession, Scalar
from stealthkit.wire import ByteReader, MalformedTxError, StealthTx, check_amount, decode_element, pack_amount


@dataclass(frozen=True)
class PublicBundle:
    scan_public: GroupElement
    spend_public: GroupElement

    def __post_init__(self):
        if self.scan_public.is_identity() or self.spend_public.is_identity():
            raise GroupError("public keys must not be the identity")


@dataclass(frozen=True)
class AuditorBundle:
    """Scan private key and spend public key; cannot hold s_B."""

    scan_private: Scalar
    spend_public: GroupElement


@dataclass(frozen=True, repr=False)
class KeyBundle:
    scan_private: Scalar
    scan_public: GroupElement
    spend_private: Scalar
    spend_public: GroupElement

    def __repr__(self) -> str:
        return f"KeyBundle(scan_public={self.scan_public!r}, spend_public={self.spend_public!r})"

    def public(self) -> PublicBundle:
        return PublicBundle(self.scan_public, self.spend_public)

    def auditor(self) -> AuditorBundle:
        return AuditorBundle(self.scan_private, self.spend_public)


@dataclass(frozen=True)
class StealthPayment:
    ephemeral: GroupElement
    destination: GroupElement
    amount: int

    def __post_init__(self):
        check_amount(self.amount)
        if self.ephemeral.is_identity():
            raise MalformedTxError("ephemeral", "ephemeral must not be the identity")
        if self.destination.is_identity():
            raise MalformedTxError("destination", "destination must not be the identity")

    def encode(self) -> bytes:
        return self.ephemeral.encode() + self.destination.encode() + pack_amount(self.amount)

    @classmethod
    def decode(cls, group, data: bytes) -> "StealthPayment":
        reader = ByteReader(data, lambda msg: MalformedTxError("payment", msg))
        point_length = group.params.point_length
        ephemeral = decode_element(group, reader.take(point_length), "ephemeral")
        destination = decode_element(group, reader.take(point_length), "destination")
        amount = reader.u64()
        reader.expect_end()
        return cls(ephemeral, destination, amount)

    def to_tx(self) -> StealthTx:
        return StealthTx(self.ephemeral, self.destination, self.amount)

    @classmethod
    def from_tx(cls, tx: StealthTx) -> "StealthPayment":
        if tx.ephemeral is None:
            raise MalformedTxError("ephemeral", "baseline payments always carry R_A")
        return cls(tx.ephemeral, tx.destination, tx.amount)


@dataclass(frozen=True, repr=False)
class ReceiverMatch:
    spend_key: Scalar
    destination: GroupElement

    def __repr__(self) -> str:
        return f"ReceiverMatch(destination={self.destination!r})"


@dataclass(frozen=True)
class AuditorMatch:
    destination: GroupElement


def keygen(session: GroupSession) -> KeyBundle:
    """Two random scalars, two fixed-base mults."""
    scan_private = session.random_scalar()
    spend_private = session.random_scalar()
    while spend_private == scan_private:
        spend_private = session.random_scalar()
    return KeyBundle(
        scan_private=scan_private,
        scan_public=session.scalar_mul_fixed_base(scan_private),
        spend_private=spend_private,
        spend_public=session.scalar_mul_fixed_base(spend_private),
    )


def validate_key_bundle(session: GroupSession, keys: KeyBundle) -> bool:
    """Check V_B = v_B*G, S_B = s_B*G and v_B != s_B (costs 2 FP)."""
    if keys.scan_private == keys.spend_private:
        return False
    return (
        session.scalar_mul_fixed_base(keys.scan_private) == keys.scan_public
        and session.scalar_mul_fixed_base(keys.spend_private) == keys.spend_public
    )


def derive_shared_secret_sender(session: GroupSession, ephemeral_private: Scalar, scan_public: GroupElement) -> Scalar:
    shared = session.scalar_mul_random_point(ephemeral_private, scan_public)
    return session.hash_to_scalar(shared.encode())


def derive_shared_secret_receiver(session: GroupSession, scan_private: Scalar, ephemeral: GroupElement) -> Scalar:
    shared = session.scalar_mul_random_point(scan_private, ephemeral)
    return session.hash_to_scalar(shared.encode())


def sender_build_payment(session: GroupSession, recipient: PublicBundle, amount: int) -> StealthPayment:
    """Fresh ephemeral key per payment: 1 RP + 2 FP + 1 H."""
    check_amount(amount)
    ephemeral_private = session.random_scalar()
    ephemeral = session.scalar_mul_fixed_base(ephemeral_private)
    secret = derive_shared_secret_sender(session, ephemeral_private, recipient.scan_public)
    destination = session.scalar_mul_fixed_base(secret) + recipient.spend_public
    return StealthPayment(ephemeral, destination, amount)


def _coerce_payment(session: GroupSession, payment) -> StealthPayment:
    if isinstance(payment, StealthPayment):
        return payment
    if isinstance(payment, StealthTx):
        return StealthPayment.from_tx(payment)
    if isinstance(payment, (bytes, bytearray, memoryview)):
        return StealthPayment.decode(session.group, bytes(payment))
    raise MalformedTxError("payment", f"unsupported payment type {type(payment).__name__}")


def _purported_destination(session: GroupSession, scan_private: Scalar, spend_public: GroupElement,
                           payment: StealthPayment) -> tuple[Scalar, GroupElement]:
    secret = derive_shared_secret_receiver(session, scan_private, payment.ephemeral)
    return secret, session.scalar_mul_fixed_base(secret) + spend_public


def receiver_scan(session: GroupSession, keys: KeyBundle, payment) -> ReceiverMatch | None:
    """1 RP + 1 FP + 1 H per scanned payment. Malformed input raises, foreign payments return None."""
    payment = _coerce_payment(session, payment)
    secret, destination = _purported_destination(session, keys.scan_private, keys.spend_public, payment)
    if destination != payment.destination:
        return None
    spend_key = secret + keys.spend_private
    if spend_key.is_zero():
        return None
    return ReceiverMatch(spend_key, payment.destination)


def auditor_scan(session: GroupSession, bundle: AuditorBundle, payment) -> AuditorMatch | None:
    payment = _coerce_payment(session, payment)
    _, destination = _purported_destination(session, bundle.scan_private, bundle.spend_public, payment)
    if destination != payment.destination:
        return None
    return AuditorMatch(payment.destination)


class DksapSender:
    """Sending actor with its own counting session."""

    scheme = "dksap"

    def __init__(self, group, entropy=None):
        self.session = group.session(entropy)

    def send(self, recipient: PublicBundle, amount: int) -> StealthTx:
        return sender_build_payment(self.session, recipient, amount).to_tx()


class DksapReceiver:
    scheme = "dksap"
    role = "receiver"

    def __init__(self, group, keys: KeyBundle):
        self.session = group.session()
        self.keys = keys

    def process(self, tx: StealthTx) -> ReceiverMatch | None:
        # Flag-clear records carry no R_A and cannot be baseline payments.
        if tx.ephemeral is None:
            return None
        return receiver_scan(self.session, self.keys, tx)


class DksapAuditor:
    scheme = "dksap"
    role = "auditor"

    def __init__(self, group, bundle: AuditorBundle):
        self.session = group.session()
        self.bundle = bundle

    def process(self, tx: StealthTx) -> AuditorMatch | None:
        if tx.ephemeral is None:
            return None
        return auditor_scan(self.session, self.bundle, tx)
