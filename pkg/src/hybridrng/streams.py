"""Bit and symbol stream values and the conversions between them.

Streams are immutable: the underlying numpy arrays are flagged read-only on
construction, so a stream can be shared freely between consumers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Union

import numpy as np

from .errors import (
    InsufficientSymbolsError,
    InvalidModulusError,
    NonInvertibleModulusError,
)

MAX_MODULUS = 2**63

Provenance = Union[dict, str, None]


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    if arr.dtype == dtype and not arr.flags.writeable:
        return arr
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


def group_width(q: int) -> int:
    """Bits per group needed to address ``q`` symbols, i.e. ceil(log2 q)."""
    return (int(q) - 1).bit_length()


def is_power_of_two(q: int) -> bool:
    return q >= 1 and (q & (q - 1)) == 0


@dataclass(frozen=True, eq=False)
class BitStream:
    """Finite ordered sequence of bits plus where it came from."""

    bits: np.ndarray
    provenance: Provenance = None
    discarded_bits: int = 0

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if arr.size and (arr.dtype.kind not in "biu" or arr.min() < 0 or arr.max() > 1):
            raise ValueError("bit streams may only contain 0 and 1")
        object.__setattr__(self, "bits", _frozen(arr, np.uint8))

    @classmethod
    def from_iterable(cls, bits: Iterable[int], provenance: Provenance = None) -> "BitStream":
        return cls(np.fromiter(bits, dtype=np.uint8), provenance)

    @classmethod
    def from_bytes(cls, data: bytes, provenance: Provenance = None) -> "BitStream":
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)), provenance)

    @property
    def length(self) -> int:
        return int(self.bits.size)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def to_bytes(self) -> bytes:
        """Pack MSB-first; the last byte is zero-padded."""
        return np.packbits(self.bits).tobytes()

    def ones_fraction(self) -> float:
        return float(self.bits.mean()) if self.length else 0.0

    def __repr__(self):
        head = "".join(map(str, self.bits[:16].tolist()))
        more = "..." if self.length > 16 else ""
        return f"BitStream(length={self.length}, bits={head}{more})"


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """Finite ordered sequence over Z/qZ."""

    q: int
    symbols: np.ndarray
    provenance: Provenance = None
    discarded_bits: int = 0
    rejected_groups: int = 0

    def __post_init__(self):
        q = int(self.q)
        if q < 2 or q > MAX_MODULUS:
            raise InvalidModulusError(f"modulus must satisfy 2 <= q <= 2**63, got {q}")
        arr = np.asarray(self.symbols)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= q):
            raise ValueError(f"symbols must lie in [0, {q})")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "symbols", _frozen(arr, np.int64))

    @property
    def length(self) -> int:
        return int(self.symbols.size)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SymbolStream):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.symbols, other.symbols)

    def __hash__(self):
        return hash((self.q, self.symbols.tobytes()))

    def __repr__(self):
        return f"SymbolStream(q={self.q}, length={self.length}, symbols={self.symbols[:12].tolist()}...)"


@dataclass(frozen=True)
class UnitReal:
    """A point of [0, 1] labelled by a base-q digit prefix 0.m1 m2 ... mn."""

    value: float
    digits_used: int = field(default=0)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"unit real out of range: {self.value}")

    def __float__(self):
        return self.value


def pack_groups(bits: np.ndarray, width: int) -> np.ndarray:
    """Read consecutive ``width``-bit groups MSB-first as unsigned integers.

    A trailing partial group is ignored.
    """
    if not 1 <= width <= 64:
        raise ValueError("group width must be in [1, 64]")
    bits = np.asarray(bits, dtype=np.uint8)
    m = bits.size // width
    if m == 0:
        return np.zeros(0, dtype=np.uint64)
    body = bits[: m * width]
    if width % 8 == 0:
        packed = np.packbits(body)
        return np.frombuffer(packed.tobytes(), dtype=f">u{width // 8}").astype(np.uint64)
    grid = body.reshape(m, width)
    out = np.zeros(m, dtype=np.uint64)
    for col in range(width):
        out <<= np.uint64(1)
        out |= grid[:, col].astype(np.uint64)
    return out


def unpack_groups(values: np.ndarray, width: int) -> np.ndarray:
    """Inverse of :func:`pack_groups`: expand each value into ``width`` bits MSB-first."""
    values = np.asarray(values).astype(np.uint64)
    if values.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if width % 8 == 0 and width <= 64:
        raw = values.astype(f">u{width // 8}").tobytes()
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)


def bits_to_symbols(bits: BitStream, q: int) -> SymbolStream:
    """Convert bits to symbols of Z/qZ without bias.

    Groups of ceil(log2 q) bits are read MSB-first. Groups whose value is at
    least ``q`` are rejected, which keeps every accepted symbol equiprobable
    when the input bits are fair and independent.
    """
    q = int(q)
    if q < 2 or q > MAX_MODULUS:
        raise InvalidModulusError(f"modulus must satisfy 2 <= q <= 2**63, got {q}")
    raw = bits.bits if isinstance(bits, BitStream) else np.asarray(bits, dtype=np.uint8)
    w = group_width(q)
    values = pack_groups(raw, w)
    trailing = raw.size - values.size * w
    if is_power_of_two(q):
        kept = values
    else:
        kept = values[values < np.uint64(q)]
    provenance = bits.provenance if isinstance(bits, BitStream) else None
    return SymbolStream(
        q,
        kept.astype(np.int64),
        provenance=provenance,
        discarded_bits=int(trailing),
        rejected_groups=int(values.size - kept.size),
    )


def symbols_to_bits(s: SymbolStream) -> BitStream:
    if not is_power_of_two(s.q):
        raise NonInvertibleModulusError(
            f"q={s.q} is not a power of two; rejection sampling makes the conversion one-way"
        )
    return BitStream(unpack_groups(s.symbols, group_width(s.q)), s.provenance)


def symbols_to_unit_real(s: SymbolStream, n: int) -> UnitReal:
    """Label the first ``n`` symbols as the base-q fraction 0.m1 m2 ... mn."""
    if n > s.length:
        raise InsufficientSymbolsError(f"need {n} symbols, stream has {s.length}")
    value = 0.0
    for digit in s.symbols[:n][::-1].tolist():
        value = (value + digit) / s.q
    return UnitReal(min(value, 1.0), n)


def unit_reals(digits: np.ndarray, q: int) -> np.ndarray:
    """Vectorised labelling: each row of ``digits`` becomes one value in [0, 1]."""
    digits = np.atleast_2d(np.asarray(digits, dtype=np.float64))
    value = np.zeros(digits.shape[0])
    for col in range(digits.shape[1] - 1, -1, -1):
        value = (value + digits[:, col]) / q
    return np.minimum(value, 1.0)
