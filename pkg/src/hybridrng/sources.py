"""Physical and recorded entropy sources.

Every source hands out bits through :meth:`EntropySource.next_bits`. Live
timing measurements are always conditioned before they leave the module;
OS entropy is trusted as already conditioned by the kernel.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ExhaustedSourceError, SourceUnavailableError
from .fileio import read_bitstream
from .streams import BitStream

KINDS = ("os-entropy", "timing-jitter", "file-replay", "deterministic-test")


@dataclass(frozen=True)
class EntropySourceDescriptor:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown entropy source kind {self.kind!r}")
        if self.kind == "file-replay" and "path" not in self.params:
            raise ConfigurationError("file-replay needs a 'path' parameter")
        if self.kind == "deterministic-test" and not self.params.get("pattern") and "seed" not in self.params:
            raise ConfigurationError("deterministic-test needs a non-empty 'pattern' or a 'seed'")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "EntropySourceDescriptor":
        if "kind" not in data:
            raise ConfigurationError("entropy source descriptor missing 'kind'")
        return cls(data["kind"], dict(data.get("params", {})))

    @property
    def reproducible(self) -> bool:
        return self.kind in ("file-replay", "deterministic-test")


@dataclass(frozen=True)
class RawSampleBlock:
    samples: np.ndarray
    width: int

    def __post_init__(self):
        if self.samples.size and int(self.samples.max()) >> self.width:
            raise ValueError(f"sample does not fit in {self.width} bits")


def von_neumann_debias(raw: BitStream) -> BitStream:
    """Pairwise extractor: 01 -> 1, 10 -> 0, equal pairs dropped.

    For independent bits with a common bias the output is exactly fair.
    """
    bits = raw.bits
    pairs = bits[: bits.size // 2 * 2].reshape(-1, 2)
    keep = pairs[:, 0] != pairs[:, 1]
    return BitStream(pairs[keep, 1], provenance=raw.provenance)


class EntropySource:
    """Single-consumer handle yielding bits on demand."""

    def __init__(self, descriptor: EntropySourceDescriptor, record: bool = False):
        self.descriptor = descriptor
        self.bits_consumed = 0
        self._record = [] if record else None

    def _produce(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def next_bits(self, n: int) -> BitStream:
        if n < 0:
            raise ValueError("bit count must be non-negative")
        bits = self._produce(n) if n else np.zeros(0, dtype=np.uint8)
        self.bits_consumed += n
        if self._record is not None and n:
            self._record.append(bits)
        return BitStream(bits, provenance=self.descriptor.to_dict())

    def read_bytes(self, n: int) -> bytes:
        return self.next_bits(8 * n).to_bytes()

    def recorded(self) -> BitStream:
        """Every bit handed out so far (only when opened with ``record=True``)."""
        if self._record is None:
            raise RuntimeError("source was not opened with recording enabled")
        chunks = self._record or [np.zeros(0, dtype=np.uint8)]
        return BitStream(np.concatenate(chunks), provenance=self.descriptor.to_dict())


class OsEntropySource(EntropySource):
    def _produce(self, n):
        try:
            data = os.urandom(-(-n // 8))
        except NotImplementedError as exc:
            raise SourceUnavailableError("operating system entropy is unavailable") from exc
        return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:n]


class PatternSource(EntropySource):
    """Repeats a fixed byte pattern forever.

    With a ``seed`` parameter instead of a pattern, bits come from numpy's
    PCG64 seeded with it. That is a reproducible stand-in for a physical
    source, used by the demos so their tables can be quoted verbatim.
    """

    def __init__(self, descriptor, record=False):
        super().__init__(descriptor, record)
        if not descriptor.params.get("pattern"):
            self._rng = np.random.Generator(np.random.PCG64(int(descriptor.params["seed"])))
            return
        self._rng = None
        pattern = descriptor.params["pattern"]
        if isinstance(pattern, str):
            pattern = bytes.fromhex(pattern)
        self._pattern = np.unpackbits(np.frombuffer(bytes(pattern), dtype=np.uint8))
        self._pos = 0

    def _produce(self, n):
        if self._rng is not None:
            return self._rng.integers(0, 2, size=n, dtype=np.uint8)
        idx = (self._pos + np.arange(n)) % self._pattern.size
        self._pos = (self._pos + n) % self._pattern.size
        return self._pattern[idx]


class FileReplaySource(EntropySource):
    def __init__(self, descriptor, record=False):
        super().__init__(descriptor, record)
        path = Path(descriptor.params["path"])
        if not path.is_file():
            raise SourceUnavailableError(f"replay file not found: {path}")
        try:
            self._bits = read_bitstream(path, descriptor.params.get("mode")).bits
        except OSError as exc:
            raise SourceUnavailableError(f"cannot read replay file {path}: {exc}") from exc
        self._pos = 0

    @property
    def remaining(self) -> int:
        return self._bits.size - self._pos

    def _produce(self, n):
        if n > self.remaining:
            raise ExhaustedSourceError(
                f"replay file has {self.remaining} bits left, {n} requested"
            )
        out = self._bits[self._pos : self._pos + n]
        self._pos += n
        return out


class TimingJitterSource(EntropySource):
    """Least significant bit of clock deltas, then von Neumann debiasing.

    Parameters: ``probes`` timing samples per batch (default 4096) and
    ``resolution_ns`` clock quantum the deltas are divided by (default 1).
    """

    max_empty_batches = 64

    def __init__(self, descriptor, record=False):
        super().__init__(descriptor, record)
        self.probes = int(descriptor.params.get("probes", 4096))
        self.resolution_ns = int(descriptor.params.get("resolution_ns", 1))
        if self.probes < 2 or self.resolution_ns < 1:
            raise ConfigurationError("timing-jitter needs probes >= 2 and resolution_ns >= 1")
        self._buf = np.zeros(0, dtype=np.uint8)

    def sample(self) -> RawSampleBlock:
        clock = time.perf_counter_ns
        stamps = np.empty(self.probes + 1, dtype=np.int64)
        for i in range(self.probes + 1):
            stamps[i] = clock()
        deltas = np.diff(stamps) // self.resolution_ns
        return RawSampleBlock(deltas.astype(np.uint64), 64)

    def _produce(self, n):
        empty = 0
        while self._buf.size < n:
            block = self.sample()
            lsb = (block.samples & np.uint64(1)).astype(np.uint8)
            fresh = von_neumann_debias(BitStream(lsb)).bits
            if fresh.size == 0:
                empty += 1
                if empty >= self.max_empty_batches:
                    raise SourceUnavailableError("clock shows no jitter at this resolution")
                continue
            self._buf = np.concatenate([self._buf, fresh])
        out, self._buf = self._buf[:n], self._buf[n:]
        return out


_KIND_CLASSES = {
    "os-entropy": OsEntropySource,
    "timing-jitter": TimingJitterSource,
    "file-replay": FileReplaySource,
    "deterministic-test": PatternSource,
}


def open_source(d: EntropySourceDescriptor, record: bool = False) -> EntropySource:
    return _KIND_CLASSES[d.kind](d, record=record)


def next_bits(handle: EntropySource, n: int) -> BitStream:
    return handle.next_bits(n)


def os_entropy() -> EntropySourceDescriptor:
    return EntropySourceDescriptor("os-entropy")


def replay(path, mode: Optional[str] = None) -> EntropySourceDescriptor:
    params = {"path": str(path)}
    if mode:
        params["mode"] = mode
    return EntropySourceDescriptor("file-replay", params)
