"""Prime-order group layer: scalars, elements, fixed-base table and op counting.

Byte formats (lengths for the default secp256k1 backend):

  scalar   fixed-length big-endian, 32 bytes
  point    compressed 33 bytes, uncompressed 65, raw 64; the identity encodes
           as all-zero bytes of the same length

Every counted operation goes through a ``GroupSession``. A session owns its
``OpCounters`` tallies, so concurrent protocol actors never share counts.
``h`` counts one per ``hash_to_scalar`` call, however many digest blocks it
takes to cover the order.
"""
from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

from stealthkit.backends import (
    DEFAULT_BACKEND,
    DEFAULT_ENCODING,
    GroupBackend,
    PointDecodeError,
    get_backend,
)


DEFAULT_HASH = "sha256"
DEFAULT_WINDOW = 4
_MAX_ENTROPY_ATTEMPTS = 64

EntropySource = Callable[[int], bytes]


class GroupError(ValueError):
    """Raised on invalid use of scalars or elements (zero scalar, identity input)."""


class DecodeError(GroupError):
    """Raised when scalar or point bytes are malformed or off-curve."""


class EntropyError(RuntimeError):
    """Raised when the entropy source fails or keeps yielding out-of-range values."""


@dataclass(frozen=True)
class OpCounters:
    """Tallies of random-point mults (rp), fixed-base mults (fp) and hashes (h)."""

    rp: int = 0
    fp: int = 0
    h: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        if not isinstance(other, OpCounters):
            return NotImplemented
        return OpCounters(self.rp + other.rp, self.fp + other.fp, self.h + other.h)

    def __sub__(self, other: "OpCounters") -> "OpCounters":
        if not isinstance(other, OpCounters):
            return NotImplemented
        return OpCounters(self.rp - other.rp, self.fp - other.fp, self.h - other.h)

    @property
    def scalar_mults(self) -> int:
        return self.rp + self.fp

    def as_dict(self) -> dict:
        return {"rp": self.rp, "fp": self.fp, "h": self.h}

    @classmethod
    def total(cls, items: Iterable["OpCounters"]) -> "OpCounters":
        result = cls()
        for item in items:
            result = result + item
        return result


@dataclass(frozen=True)
class Scalar:
    """Exponent in [0, order); reduced at construction."""

    value: int
    order: int

    def __post_init__(self):
        if self.order < 2:
            raise GroupError("scalar order must be >= 2")
        object.__setattr__(self, "value", self.value % self.order)

    @property
    def byte_length(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def is_zero(self) -> bool:
        return self.value == 0

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.byte_length, "big")

    def __add__(self, other: "Scalar") -> "Scalar":
        if not isinstance(other, Scalar) or other.order != self.order:
            return NotImplemented
        return Scalar(self.value + other.value, self.order)

    def __sub__(self, other: "Scalar") -> "Scalar":
        if not isinstance(other, Scalar) or other.order != self.order:
            return NotImplemented
        return Scalar(self.value - other.value, self.order)

    def __neg__(self) -> "Scalar":
        return Scalar(-self.value, self.order)

    def __repr__(self) -> str:
        return f"Scalar(0x{self.value:x})"


class GroupElement:
    """Immutable group element; equality and hashing follow the canonical encoding."""

    __slots__ = ("_backend", "_point", "_encoded")

    def __init__(self, backend: GroupBackend, point):
        self._backend = backend
        self._point = point
        self._encoded: bytes | None = None

    @property
    def point(self):
        return self._point

    def is_identity(self) -> bool:
        return self._backend.is_identity(self._point)

    def encode(self) -> bytes:
        if self._encoded is None:
            self._encoded = self._backend.encode(self._point)
        return self._encoded

    def __add__(self, other: "GroupElement") -> "GroupElement":
        if not isinstance(other, GroupElement):
            return NotImplemented
        return GroupElement(self._backend, self._backend.add(self._point, other._point))

    def __neg__(self) -> "GroupElement":
        return GroupElement(self._backend, self._backend.negate(self._point))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self._backend is other._backend and self.encode() == other.encode()

    def __hash__(self) -> int:
        return hash(self.encode())

    def __repr__(self) -> str:
        return f"GroupElement({self.encode().hex()[:18]}...)"


@dataclass(frozen=True)
class GroupParams:
    order: int
    generator: GroupElement
    point_length: int
    scalar_length: int
    backend: str
    encoding: str


class FixedBaseTable:
    """Fixed-window table over the base point: ``rows[i][d] = d * 2^(w*i) * G``.

    A multiplication costs at most one mixed addition per window and no
    doublings. With the default window of 4 a 256-bit order needs 64 rows of
    15 affine points.
    """

    def __init__(self, backend: GroupBackend, window: int = DEFAULT_WINDOW):
        if not 1 <= window <= 8:
            raise GroupError("fixed-base window must be between 1 and 8")
        self._backend = backend
        self.window = window
        self.row_count = -(-backend.order.bit_length() // window)
        rows = []
        base = backend.generator()
        for _ in range(self.row_count):
            row = [None]
            acc = base
            for _digit in range(1, 1 << window):
                row.append(backend.to_affine(acc))
                acc = backend.add(acc, base)
            rows.append(tuple(row))
            base = acc
        self._rows = tuple(rows)

    @property
    def size(self) -> int:
        return self.row_count * ((1 << self.window) - 1)

    def multiply(self, k: int):
        mask = (1 << self.window) - 1
        acc = None
        for row in self._rows:
            digit = k & mask
            k >>= self.window
            if digit:
                acc = row[digit] if acc is None else self._backend.add(acc, row[digit])
        return self._backend.identity() if acc is None else acc


class Group:
    """Immutable group context: backend, parameters, hash choice, fixed-base table."""

    def __init__(self, backend: GroupBackend, *, hash_name: str = DEFAULT_HASH, window: int = DEFAULT_WINDOW):
        try:
            digest_size = hashlib.new(hash_name).digest_size
        except (ValueError, TypeError) as exc:
            raise GroupError(f"Unsupported hash function: {hash_name}") from exc
        if digest_size == 0:
            raise GroupError(f"Hash function needs a fixed digest size: {hash_name}")
        self.backend = backend
        self.hash_name = hash_name
        self.params = GroupParams(
            order=backend.order,
            generator=GroupElement(backend, backend.generator()),
            point_length=backend.point_length,
            scalar_length=backend.scalar_length,
            backend=backend.name,
            encoding=backend.encoding,
        )
        self.table = FixedBaseTable(backend, window)

    def __repr__(self) -> str:
        return f"Group({self.backend.name}, {self.backend.encoding}, {self.hash_name}, w={self.table.window})"

    @property
    def order(self) -> int:
        return self.params.order

    @property
    def generator(self) -> GroupElement:
        return self.params.generator

    @property
    def identity(self) -> GroupElement:
        return GroupElement(self.backend, self.backend.identity())

    def scalar(self, value: int) -> Scalar:
        return Scalar(value, self.order)

    def element(self, point) -> GroupElement:
        return GroupElement(self.backend, point)

    def decode_point(self, data: bytes) -> GroupElement:
        try:
            return GroupElement(self.backend, self.backend.decode(bytes(data)))
        except PointDecodeError as exc:
            raise DecodeError(str(exc)) from exc

    def decode_scalar(self, data: bytes) -> Scalar:
        if len(data) != self.params.scalar_length:
            raise DecodeError(f"expected {self.params.scalar_length} scalar bytes, got {len(data)}")
        value = int.from_bytes(data, "big")
        if value >= self.order:
            raise DecodeError("scalar out of range")
        return Scalar(value, self.order)

    def digest(self, data: bytes) -> bytes:
        return hashlib.new(self.hash_name, data).digest()

    def wide_digest(self, data: bytes) -> bytes:
        """Digest of at least the order's byte length.

        A digest shorter than the order (sha256 on p384) is extended with
        counter-suffixed blocks, so hash outputs span the whole scalar range.
        """
        out = self.digest(data)
        block = 0
        while len(out) < self.params.scalar_length:
            block += 1
            out += self.digest(block.to_bytes(4, "big") + data)
        return out

    def session(self, entropy: EntropySource | None = None) -> "GroupSession":
        return GroupSession(self, entropy)


class GroupSession:
    """Counting scope for one protocol actor. Not shared between threads."""

    def __init__(self, group: Group, entropy: EntropySource | None = None):
        self.group = group
        self._entropy = entropy or secrets.token_bytes
        self._rp = 0
        self._fp = 0
        self._h = 0

    def _check_scalar(self, k: Scalar) -> None:
        if not isinstance(k, Scalar) or k.order != self.group.order:
            raise GroupError("scalar does not belong to this group")
        if k.is_zero():
            raise GroupError("scalar must be in [1, n)")

    def scalar_mul_random_point(self, k: Scalar, point: GroupElement) -> GroupElement:
        self._check_scalar(k)
        if point.is_identity():
            raise GroupError("cannot multiply the identity element")
        self._rp += 1
        return self.group.element(self.group.backend.multiply(point.point, k.value))

    def scalar_mul_fixed_base(self, k: Scalar) -> GroupElement:
        self._check_scalar(k)
        self._fp += 1
        return self.group.element(self.group.table.multiply(k.value))

    def hash_to_scalar(self, data: bytes) -> Scalar:
        if not data:
            raise GroupError("hash input must be non-empty")
        self._h += 1
        digest = self.group.wide_digest(data)
        value = int.from_bytes(digest, "big") % self.group.order
        counter = 0
        while value == 0:
            counter += 1
            digest = self.group.wide_digest(data + bytes([counter & 0xFF]))
            value = int.from_bytes(digest, "big") % self.group.order
        return self.group.scalar(value)

    def random_scalar(self) -> Scalar:
        length = self.group.params.scalar_length
        for _ in range(_MAX_ENTROPY_ATTEMPTS):
            try:
                raw = self._entropy(length)
            except Exception as exc:
                raise EntropyError(f"entropy source failed: {exc}") from exc
            if len(raw) != length:
                raise EntropyError("entropy source returned a short read")
            value = int.from_bytes(raw, "big")
            if 0 < value < self.group.order:
                return self.group.scalar(value)
        raise EntropyError("entropy source kept yielding out-of-range scalars")

    def add(self, p: GroupElement, q: GroupElement) -> GroupElement:
        return p + q

    def counters_snapshot(self) -> OpCounters:
        return OpCounters(self._rp, self._fp, self._h)

    def counters_reset(self) -> OpCounters:
        """Zero the tallies and return the values they held."""
        previous = self.counters_snapshot()
        self._rp = self._fp = self._h = 0
        return previous


def deterministic_entropy(seed: int | str) -> EntropySource:
    """Reproducible byte source for simulations and randomness injection. Not for keys."""
    rng = random.Random(seed)
    return rng.randbytes


@lru_cache(maxsize=None)
def get_group(
    backend: str = DEFAULT_BACKEND,
    encoding: str = DEFAULT_ENCODING,
    hash_name: str = DEFAULT_HASH,
    window: int = DEFAULT_WINDOW,
) -> Group:
    """Build (once) and share the group context for a backend configuration."""
    return Group(get_backend(backend, encoding), hash_name=hash_name, window=window)
