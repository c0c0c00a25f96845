"""Curve backend adapters for the prime-order group layer.

Backends wrap the pure-Python arithmetic of the ``ecdsa`` package. Raw points
handed out by a backend are opaque to callers: either an ``ecdsa`` Jacobian point
or the package's ``INFINITY`` sentinel for the identity.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Any, Protocol

from ecdsa.curves import BRAINPOOLP256r1, NIST256p, NIST384p, SECP256k1, Curve
from ecdsa.ellipticcurve import INFINITY, PointJacobi
from ecdsa.errors import MalformedPointError


POINT_ENCODINGS = ("compressed", "uncompressed", "raw")
DEFAULT_BACKEND = "secp256k1"
DEFAULT_ENCODING = "compressed"


class BackendError(ValueError):
    """Structured validation error for backend selection."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class PointDecodeError(ValueError):
    """Raised when bytes do not encode a point of the backend's group."""


class GroupBackend(Protocol):
    """Adapter contract for curve implementations."""

    name: str
    encoding: str
    order: int
    point_length: int
    scalar_length: int

    def generator(self) -> Any:
        """Return the base point."""

    def identity(self) -> Any:
        """Return the identity element."""

    def is_identity(self, point: Any) -> bool:
        """Tell whether ``point`` is the identity."""

    def add(self, p: Any, q: Any) -> Any:
        """Return p + q."""

    def negate(self, point: Any) -> Any:
        """Return -point."""

    def multiply(self, point: Any, k: int) -> Any:
        """Generic scalar multiplication k * point."""

    def to_affine(self, point: Any) -> Any:
        """Return a copy of ``point`` normalized to z = 1."""

    def encode(self, point: Any) -> bytes:
        """Fixed-length encoding, all-zero bytes for the identity."""

    def decode(self, data: bytes) -> Any:
        """Inverse of ``encode``; rejects off-curve bytes."""


class EcdsaCurveBackend:
    """Short-Weierstrass curve backed by ``ecdsa`` Jacobian arithmetic."""

    def __init__(self, name: str, curve: Curve, encoding: str = DEFAULT_ENCODING):
        if encoding not in POINT_ENCODINGS:
            raise BackendError("encoding", f"Point encoding must be one of {', '.join(POINT_ENCODINGS)}")
        self.name = name
        self.encoding = encoding
        self._curve = curve
        self._fp = curve.curve
        self.order = int(curve.order)
        self.scalar_length = (self.order.bit_length() + 7) // 8
        self.coordinate_length = (self._fp.p().bit_length() + 7) // 8
        self.point_length = {
            "compressed": 1 + self.coordinate_length,
            "uncompressed": 1 + 2 * self.coordinate_length,
            "raw": 2 * self.coordinate_length,
        }[encoding]
        gen = curve.generator
        # A plain copy: the package's own generator carries a precompute flag.
        self._generator = PointJacobi(self._fp, gen.x(), gen.y(), 1, self.order)

    def __repr__(self) -> str:
        return f"EcdsaCurveBackend({self.name!r}, encoding={self.encoding!r})"

    def generator(self) -> PointJacobi:
        return self._generator

    def identity(self):
        return INFINITY

    def is_identity(self, point) -> bool:
        return point is INFINITY or point == INFINITY

    def add(self, p, q):
        if self.is_identity(p):
            return q
        if self.is_identity(q):
            return p
        return p + q

    def negate(self, point):
        if self.is_identity(point):
            return INFINITY
        return PointJacobi(self._fp, point.x(), (-point.y()) % self._fp.p(), 1, self.order)

    def multiply(self, point, k: int):
        if self.is_identity(point) or k % self.order == 0:
            return INFINITY
        return point * (k % self.order)

    def to_affine(self, point) -> PointJacobi:
        if self.is_identity(point):
            raise ValueError("identity has no affine form")
        return PointJacobi(self._fp, point.x(), point.y(), 1, self.order)

    def encode(self, point) -> bytes:
        if self.is_identity(point):
            return bytes(self.point_length)
        return point.to_bytes(self.encoding)

    def decode(self, data: bytes):
        if len(data) != self.point_length:
            raise PointDecodeError(f"expected {self.point_length} point bytes, got {len(data)}")
        if not any(data):
            return INFINITY
        try:
            point = PointJacobi.from_bytes(
                self._fp,
                bytes(data),
                validate_encoding=True,
                valid_encodings=[self.encoding],
                order=self.order,
            )
        except (MalformedPointError, AssertionError, ValueError) as exc:
            raise PointDecodeError(str(exc) or "malformed point encoding") from exc
        if not self._fp.contains_point(point.x(), point.y()):
            raise PointDecodeError("point is not on the curve")
        return point


_CURVES: dict[str, tuple[Curve, str]] = {
    "secp256k1": (SECP256k1, "SECG secp256k1"),
    "p256": (NIST256p, "NIST P-256"),
    "p384": (NIST384p, "NIST P-384"),
    "brainpoolp256r1": (BRAINPOOLP256r1, "Brainpool P256r1"),
}


def available_backends() -> list[dict]:
    """Return backend metadata for CLI discovery."""
    listing = []
    for name, (curve, label) in _CURVES.items():
        backend = get_backend(name, DEFAULT_ENCODING)
        listing.append(
            {
                "backend": name,
                "label": label,
                "order_bits": curve.order.bit_length(),
                "encodings": {
                    encoding: get_backend(name, encoding).point_length for encoding in POINT_ENCODINGS
                },
                "scalar_length": backend.scalar_length,
            }
        )
    return listing


@lru_cache(maxsize=None)
def get_backend(name: str = DEFAULT_BACKEND, encoding: str = DEFAULT_ENCODING) -> GroupBackend:
    """Resolve a backend by name; instances are immutable and shared."""
    key = (name or "").strip().lower()
    if key not in _CURVES:
        raise BackendError("backend", f"Unsupported group backend: {name}")
    curve, _ = _CURVES[key]
    return EcdsaCurveBackend(key, curve, (encoding or DEFAULT_ENCODING).strip().lower())
