"""Deterministic pseudo-random generators, including deliberately bad ones.

Three families are provided:

* ``lcg``: x' = (a*x + c) mod m, with the RANDU and MINSTD presets;
* ``xorshift64``: Marsaglia's 64-bit xorshift with shift triple (13, 7, 17);
* ``mix64``: a counter-based generator. The counter advances by the odd
  constant 0x9E3779B97F4A7C15 and each counter value is passed through the
  SplitMix64 finaliser (multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB,
  shifts 30/27/31). The finaliser is a bijection on 64-bit words, so the
  output has period exactly 2**64 and hits every word once per cycle.

Stepping is available both as pure functions on :class:`PrngState` and as
a stateful :class:`PseudoGenerator` handle with vectorised block output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InvalidSeedError
from .streams import BitStream, unpack_groups

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL1 = 0xBF58476D1CE4E5B9
MIX_MUL2 = 0x94D049BB133111EB

FAMILIES = ("lcg", "xorshift64", "mix64")

PRESETS = {
    "randu": {"family": "lcg", "a": 65539, "c": 0, "modulus": 2**31},
    "minstd": {"family": "lcg", "a": 16807, "c": 0, "modulus": 2**31 - 1},
}

# moduli up to this size use the numpy jump-ahead path
_VECTOR_MODULUS_LIMIT = 2**32


@dataclass(frozen=True)
class PrngDescriptor:
    family: str
    seed: int = 1
    a: Optional[int] = None
    c: Optional[int] = None
    modulus: Optional[int] = None
    preset: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown generator family {self.family!r}")
        if not 0 <= self.seed <= MASK64:
            raise InvalidSeedError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.family == "lcg":
            a, c, m = self.a, self.c, self.modulus
            if a is None or c is None or m is None:
                raise ConfigurationError("lcg needs a, c and modulus")
            if not 2 <= m <= 2**63:
                raise ConfigurationError(f"lcg modulus must be in [2, 2**63], got {m}")
            if not (0 <= a < m and 0 <= c < m):
                raise ConfigurationError("lcg parameters must satisfy 0 <= a, c < modulus")
            if not 0 <= self.seed < m:
                raise InvalidSeedError(f"lcg seed must be below the modulus {m}")
            if c == 0 and self.seed == 0:
                raise InvalidSeedError("multiplicative lcg (c=0) cannot start from 0")
        elif self.family == "xorshift64" and self.seed == 0:
            raise InvalidSeedError("xorshift64 seed must be nonzero")

    @classmethod
    def from_preset(cls, name: str, seed: int = 1) -> "PrngDescriptor":
        try:
            params = PRESETS[name]
        except KeyError:
            raise ConfigurationError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
        return cls(seed=seed, preset=name, **params)

    @classmethod
    def lcg(cls, a: int, c: int, modulus: int, seed: int) -> "PrngDescriptor":
        return cls("lcg", seed=seed, a=a, c=c, modulus=modulus)

    @property
    def word_bits(self) -> int:
        """Usable bits per output word.

        For an LCG only the top floor(log2 m) bits are used: the low bits of a
        power-of-two-modulus LCG have short periods of their own.
        """
        if self.family == "lcg":
            return self.modulus.bit_length() - 1
        return 64

    @property
    def raw_bits(self) -> int:
        if self.family == "lcg":
            return (self.modulus - 1).bit_length()
        return 64

    def to_dict(self) -> dict:
        out = {"family": self.family, "seed": self.seed}
        if self.family == "lcg":
            out.update(a=self.a, c=self.c, modulus=self.modulus)
        if self.preset:
            out["preset"] = self.preset
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PrngDescriptor":
        data = dict(data)
        if "preset" in data:
            base = cls.from_preset(data.pop("preset"), seed=int(data.pop("seed", 1)))
            for key in ("family", "a", "c", "modulus"):
                if key in data and data[key] != getattr(base, key):
                    raise ConfigurationError(f"preset {base.preset!r} conflicts with explicit {key}")
            return base
        try:
            return cls(
                family=data["family"],
                seed=int(data.get("seed", 1)),
                a=data.get("a"),
                c=data.get("c"),
                modulus=data.get("modulus"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"generator descriptor missing {exc}") from None


@dataclass(frozen=True)
class PrngState:
    descriptor: PrngDescriptor
    state: int
    emitted: int = 0

    @classmethod
    def initial(cls, descriptor: PrngDescriptor) -> "PrngState":
        return cls(descriptor, descriptor.seed, 0)


def _xorshift_step(x: int) -> int:
    x ^= (x << 13) & MASK64
    x ^= x >> 7
    x ^= (x << 17) & MASK64
    return x


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL2) & MASK64
    return z ^ (z >> 31)


def lcg_next(s: PrngState) -> tuple[PrngState, int]:
    d = s.descriptor
    if d.family != "lcg":
        raise ConfigurationError(f"lcg_next called on a {d.family} state")
    # Python ints never overflow, so a*x + c is exact for any 63-bit modulus
    x = (d.a * s.state + d.c) % d.modulus
    return PrngState(d, x, s.emitted + 1), x


def xorshift64_next(s: PrngState) -> tuple[PrngState, int]:
    if s.descriptor.family != "xorshift64":
        raise ConfigurationError(f"xorshift64_next called on a {s.descriptor.family} state")
    if s.state == 0:
        raise InvalidSeedError("xorshift64 state must be nonzero")
    x = _xorshift_step(s.state)
    return PrngState(s.descriptor, x, s.emitted + 1), x


def mix64_next(s: PrngState) -> tuple[PrngState, int]:
    if s.descriptor.family != "mix64":
        raise ConfigurationError(f"mix64_next called on a {s.descriptor.family} state")
    counter = (s.state + GOLDEN_GAMMA) & MASK64
    return PrngState(s.descriptor, counter, s.emitted + 1), _mix(counter)


_STEPPERS = {"lcg": lcg_next, "xorshift64": xorshift64_next, "mix64": mix64_next}


def next_output(s: PrngState) -> tuple[PrngState, int]:
    return _STEPPERS[s.descriptor.family](s)


def _transition(d: PrngDescriptor):
    """Raw state map used by cycle detection (no PrngState allocation)."""
    if d.family == "lcg":
        a, c, m = d.a, d.c, d.modulus
        return lambda x: (a * x + c) % m
    if d.family == "xorshift64":
        return _xorshift_step
    return lambda x: (x + GOLDEN_GAMMA) & MASK64


def _lcg_serial(a: int, c: int, m: int, x: int, n: int) -> tuple[np.ndarray, int]:
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        x = (a * x + c) % m
        out[i] = x
    return out, x


def _lcg_block(a: int, c: int, m: int, x: int, n: int) -> tuple[np.ndarray, int]:
    """Next ``n`` LCG states after ``x`` and the final state."""
    if n == 0:
        return np.zeros(0, dtype=np.uint64), x
    block = max(256, math.isqrt(n))
    if m > _VECTOR_MODULUS_LIMIT or n <= block:
        return _lcg_serial(a, c, m, x, n)
    # jump-ahead: block j+1 = (A * block j + C) mod m with (A, C) the B-fold composition
    head, _ = _lcg_serial(a, c, m, x, block)
    big_a, big_c = 1, 0
    for _ in range(block):
        big_a, big_c = (a * big_a) % m, (a * big_c + c) % m
    nblocks = -(-n // block)
    out = np.empty(nblocks * block, dtype=np.uint64)
    out[:block] = head
    ua, uc, um = np.uint64(big_a), np.uint64(big_c), np.uint64(m)
    for j in range(1, nblocks):
        prev = out[(j - 1) * block : j * block]
        out[j * block : (j + 1) * block] = (prev * ua + uc) % um
    out = out[:n]
    return out, int(out[-1])


def _mix64_block(counter: int, n: int) -> tuple[np.ndarray, int]:
    steps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(counter) + steps * np.uint64(GOLDEN_GAMMA)
        final = int(z[-1]) if n else counter
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MUL2)
        z ^= z >> np.uint64(31)
    return z, final


def _xorshift_block(x: int, n: int) -> tuple[np.ndarray, int]:
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        x ^= (x << 13) & MASK64
        x ^= x >> 7
        x ^= (x << 17) & MASK64
        out[i] = x
    return out, x


class PseudoGenerator:
    """Stateful handle over a :class:`PrngState` with block output.

    Single consumer: bits requested through :meth:`next_bits` are buffered so
    that consecutive calls concatenate into one stream.
    """

    def __init__(self, descriptor: PrngDescriptor, state: Optional[PrngState] = None):
        self.descriptor = descriptor
        self.state = state or PrngState.initial(descriptor)
        self._bitbuf = np.zeros(0, dtype=np.uint8)

    @classmethod
    def from_state(cls, state: PrngState) -> "PseudoGenerator":
        return cls(state.descriptor, state)

    @property
    def word_bits(self) -> int:
        return self.descriptor.word_bits

    def next_outputs(self, n: int) -> np.ndarray:
        """Raw generator outputs as uint64."""
        d, x = self.descriptor, self.state.state
        if d.family == "lcg":
            out, x = _lcg_block(d.a, d.c, d.modulus, x, n)
        elif d.family == "mix64":
            out, x = _mix64_block(x, n)
        else:
            out, x = _xorshift_block(x, n)
        self.state = PrngState(d, x, self.state.emitted + n)
        return out

    def next_words(self, n: int) -> np.ndarray:
        """Usable ``word_bits``-bit words (top bits of each output)."""
        out = self.next_outputs(n)
        drop = self.descriptor.raw_bits - self.descriptor.word_bits
        return out >> np.uint64(drop) if drop else out

    def next_frames(self, n: int) -> np.ndarray:
        """Words left-aligned in a 64-bit frame, so ``frame / 2**64`` lies in [0, 1)."""
        words = self.next_words(n)
        shift = 64 - self.word_bits
        return words << np.uint64(shift) if shift else words

    def unit_reals(self, n: int) -> np.ndarray:
        """Top 32 bits of each word divided by 2**32."""
        return (self.next_frames(n) >> np.uint64(32)).astype(np.float64) / 2.0**32

    def next_bits(self, n: int) -> BitStream:
        need = n - self._bitbuf.size
        if need > 0:
            nwords = -(-need // self.word_bits)
            fresh = unpack_groups(self.next_words(nwords), self.word_bits)
            self._bitbuf = np.concatenate([self._bitbuf, fresh])
        out, self._bitbuf = self._bitbuf[:n], self._bitbuf[n:]
        return BitStream(out, provenance=self.descriptor.to_dict())


def prng_bits(s: PrngState, n: int) -> BitStream:
    """First ``n`` bits produced from state ``s``, MSB-first per word."""
    if n < 0:
        raise ValueError("bit count must be non-negative")
    return PseudoGenerator.from_state(s).next_bits(n)


def detect_period(d: PrngDescriptor, cap: int) -> Optional[int]:
    """Cycle length of the state sequence from ``d.seed``, or None past ``cap``.

    Floyd's tortoise-and-hare. The meeting phase is allowed 2*cap steps, so
    the exact period is found whenever tail + period <= 2*cap; LCG tails are
    at most log2(modulus) steps long.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    f = _transition(d)
    x0 = d.seed
    tortoise, hare = f(x0), f(f(x0))
    steps = 1
    while tortoise != hare:
        steps += 1
        if steps > 2 * cap:
            return None
        tortoise, hare = f(tortoise), f(f(hare))
    period, hare = 1, f(tortoise)
    while hare != tortoise:
        period += 1
        if period > cap:
            return None
        hare = f(hare)
    return period


def _prime_factors(n: int) -> set[int]:
    factors, p = set(), 2
    while p * p <= n:
        while n % p == 0:
            factors.add(p)
            n //= p
        p += 1
    if n > 1:
        factors.add(n)
    return factors


def hull_dobell(a: int, c: int, m: int) -> bool:
    """True iff the LCG (a, c, m) has full period m from every seed."""
    if math.gcd(c, m) != 1:
        return False
    if any((a - 1) % p for p in _prime_factors(m)):
        return False
    return m % 4 != 0 or (a - 1) % 4 == 0
