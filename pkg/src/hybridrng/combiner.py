"""Hybrid generator: a physical entropy source combined with a PRNG.

Two combiners are available:

``xor``
    PRNG bits are XORed with entropy-source bits.
``digital-dice``
    Each PRNG word is cut into one of q equal segments, and a uniform offset
    drawn from the entropy source shifts the segment index modulo q. For a
    fixed segment the map offset -> result is a bijection of Z/qZ, so a
    uniform offset gives a uniform result whatever the PRNG does.

``mix_rate`` = p/k controls how often fresh entropy is drawn: output i uses
entropy draw floor(i * p / k), so one draw serves at most ceil(k/p)
consecutive outputs. With mix_rate 1 every output gets its own draw.
An exhausted entropy source is always an error; the combiner never falls
back to the PRNG alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError, LengthMismatchError, NonInvertibleModulusError
from .prng import PrngDescriptor, PseudoGenerator
from .sources import EntropySource, EntropySourceDescriptor, open_source
from .streams import (
    BitStream,
    SymbolStream,
    bits_to_symbols,
    group_width,
    is_power_of_two,
    pack_groups,
    unpack_groups,
)

MODES = ("xor", "digital-dice")
MAX_DICE_Q = 2**32


def parse_mix_rate(value: Union[str, int, float, Fraction]) -> Fraction:
    try:
        rate = Fraction(value) if not isinstance(value, float) else Fraction(value).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"invalid mix rate {value!r}") from exc
    if not 0 < rate <= 1:
        raise ConfigurationError(f"mix rate must lie in (0, 1], got {rate}")
    return rate


@dataclass(frozen=True)
class CombinerDescriptor:
    mode: str
    rs: EntropySourceDescriptor
    ss: PrngDescriptor
    q: int = 2
    mix_rate: Fraction = Fraction(1)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown combiner mode {self.mode!r}")
        if self.q < 2:
            raise ConfigurationError(f"q must be at least 2, got {self.q}")
        if self.mode == "digital-dice" and self.q > MAX_DICE_Q:
            raise ConfigurationError(f"digital-dice supports q up to 2**32, got {self.q}")
        object.__setattr__(self, "mix_rate", parse_mix_rate(self.mix_rate))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "q": self.q,
            "mix_rate": str(self.mix_rate),
            "rs": self.rs.to_dict(),
            "ss": self.ss.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CombinerDescriptor":
        try:
            return cls(
                mode=data.get("mode", "digital-dice"),
                rs=EntropySourceDescriptor.from_dict(data["rs"]),
                ss=PrngDescriptor.from_dict(data["ss"]),
                q=int(data.get("q", 2)),
                mix_rate=data.get("mix_rate", "1"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"combiner descriptor missing {exc}") from None


@dataclass(frozen=True)
class DiceOutcome:
    ss_segment: int
    rs_offset: int
    result: int
    draw_index: Optional[int] = None

    def __post_init__(self):
        if self.result < 0:
            raise ValueError("dice result must be non-negative")


def digital_dice_step(u: int, r: int, q: int) -> DiceOutcome:
    if q < 2:
        raise DomainError(f"q must be at least 2, got {q}")
    if not (0 <= u < q and 0 <= r < q):
        raise DomainError(f"segment {u} and offset {r} must both lie in [0, {q})")
    return DiceOutcome(u, r, (u + r) % q)


def xor_combine(a: BitStream, b: BitStream) -> BitStream:
    if a.length != b.length:
        raise LengthMismatchError(f"cannot XOR streams of length {a.length} and {b.length}")
    return BitStream(a.bits ^ b.bits, provenance={"xor": [a.provenance, b.provenance]})


def segment_index(frames: np.ndarray, q: int) -> np.ndarray:
    """floor(q * w / 2**64) for 64-bit left-aligned words ``w``, with q <= 2**32."""
    frames = np.asarray(frames, dtype=np.uint64)
    if is_power_of_two(q):
        return (frames >> np.uint64(64 - group_width(q))).astype(np.int64)
    uq = np.uint64(q)
    hi = frames >> np.uint64(32)
    lo = frames & np.uint64(0xFFFFFFFF)
    # q*w = q*hi*2^32 + q*lo; neither partial product nor the carry sum overflows for q < 2^32
    carry = (uq * lo) >> np.uint64(32)
    return ((uq * hi + carry) >> np.uint64(32)).astype(np.int64)


class HybridGenerator:
    """Single-consumer handle that owns one entropy source and one PRNG."""

    def __init__(
        self,
        descriptor: CombinerDescriptor,
        record_rs: bool = False,
        rs_handle: Optional[EntropySource] = None,
    ):
        self.descriptor = descriptor
        self.rs = rs_handle or open_source(descriptor.rs, record=record_rs)
        self.ss = PseudoGenerator(descriptor.ss)
        self.q = descriptor.q
        self.width = group_width(descriptor.q)
        self._rate = descriptor.mix_rate
        self.emitted = 0  # outputs (dice) or bit groups (xor) produced so far
        self.draws = 0  # fresh entropy draws taken
        self._cached = None  # most recent draw, reusable under mix_rate < 1
        self._bitbuf = np.zeros(0, dtype=np.uint8)

    # -- entropy side -------------------------------------------------------

    def _draw_indices(self, count: int) -> np.ndarray:
        i = np.arange(self.emitted, self.emitted + count, dtype=np.int64)
        return (i * self._rate.numerator) // self._rate.denominator

    def _draw_offsets(self, k: int) -> np.ndarray:
        """k uniform offsets in [0, q) by rejection; asks only for bits it may use."""
        chunks, remaining = [], k
        while remaining:
            raw = self.rs.next_bits(remaining * self.width)
            got = bits_to_symbols(raw, self.q).symbols
            chunks.append(got)
            remaining -= got.size
        return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)

    def _draw_blocks(self, k: int) -> np.ndarray:
        return pack_groups(self.rs.next_bits(k * self.width).bits, self.width)

    def _assign(self, count: int, draw) -> tuple[np.ndarray, np.ndarray]:
        """Entropy value and draw index for the next ``count`` outputs."""
        idx = self._draw_indices(count)
        if count == 0:
            return np.zeros(0, dtype=np.int64), idx
        base = self.draws - 1 if self._cached is not None else self.draws
        fresh = int(idx[-1]) + 1 - self.draws
        parts = [] if self._cached is None else [np.array([self._cached])]
        if fresh > 0:
            parts.append(draw(fresh))
        pool = np.concatenate(parts)
        values = pool[idx - base]
        self.draws += max(fresh, 0)
        self._cached = pool[-1]
        self.emitted += count
        return values, idx

    # -- outputs ------------------------------------------------------------

    def _dice_block(self, n: int):
        u = segment_index(self.ss.next_frames(n), self.q)
        r, idx = self._assign(n, self._draw_offsets)
        r = np.asarray(r, dtype=np.int64)
        return u, r, (u + r) % self.q, idx

    def _xor_groups(self, groups: int) -> np.ndarray:
        ss_bits = self.ss.next_bits(groups * self.width).bits
        blocks, _ = self._assign(groups, self._draw_blocks)
        rs_bits = unpack_groups(np.asarray(blocks, dtype=np.uint64), self.width)
        return ss_bits ^ rs_bits

    def next_outcomes(self, n: int) -> list[DiceOutcome]:
        """Dice outcomes with their entropy draw index (digital-dice mode)."""
        if self.descriptor.mode != "digital-dice":
            raise ConfigurationError("outcome records exist only in digital-dice mode")
        u, r, res, idx = self._dice_block(n)
        return [DiceOutcome(int(a), int(b), int(c), int(d)) for a, b, c, d in zip(u, r, res, idx)]

    def next_symbols(self, n: int) -> SymbolStream:
        if n < 0:
            raise ValueError("count must be non-negative")
        if self.descriptor.mode == "digital-dice":
            _, _, result, _ = self._dice_block(n)
            return SymbolStream(self.q, result, provenance=self.descriptor.to_dict())
        chunks, have = [], 0
        while have < n:
            combined = self._xor_groups(n - have)
            got = bits_to_symbols(combined, self.q).symbols
            chunks.append(got)
            have += got.size
        symbols = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
        return SymbolStream(self.q, symbols, provenance=self.descriptor.to_dict())

    def next_bits(self, n: int) -> BitStream:
        if n < 0:
            raise ValueError("bit count must be non-negative")
        dice = self.descriptor.mode == "digital-dice"
        if dice and not is_power_of_two(self.q):
            raise NonInvertibleModulusError(f"digital-dice bits need a power-of-two q, got {self.q}")
        need = n - self._bitbuf.size
        if need > 0:
            groups = -(-need // self.width)
            if dice:
                _, _, result, _ = self._dice_block(groups)
                fresh = unpack_groups(result, self.width)
            else:
                fresh = self._xor_groups(groups)
            self._bitbuf = np.concatenate([self._bitbuf, fresh])
        out, self._bitbuf = self._bitbuf[:n], self._bitbuf[n:]
        return BitStream(out, provenance=self.descriptor.to_dict())

    def unit_reals(self, n: int) -> np.ndarray:
        """Consecutive 32-bit words of the output bit stream, divided by 2**32."""
        if self.descriptor.mode == "digital-dice" and self.q == 2**32 and self._bitbuf.size == 0:
            _, _, result, _ = self._dice_block(n)
            return result.astype(np.float64) / 2.0**32
        words = pack_groups(self.next_bits(32 * n).bits, 32)
        return words.astype(np.float64) / 2.0**32

    def accounting(self) -> dict:
        """Entropy consumed so far against its expected value under rejection."""
        expected_factor = 2**self.width / self.q if self.descriptor.mode == "digital-dice" else 1.0
        return {
            "outputs": self.emitted,
            "rs_draws": self.draws,
            "rs_bits_consumed": self.rs.bits_consumed,
            "rs_bits_expected": self.draws * self.width * expected_factor,
            "rs_bits_floor": self.draws * self.width,
            "rejection_factor": expected_factor,
            "mix_rate": str(self._rate),
        }


def hybrid_next_symbols(c: CombinerDescriptor, n: int) -> SymbolStream:
    return HybridGenerator(c).next_symbols(n)


def hybrid_next_bits(c: CombinerDescriptor, n: int) -> BitStream:
    return HybridGenerator(c).next_bits(n)
