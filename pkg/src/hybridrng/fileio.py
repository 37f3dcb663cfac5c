"""Bitstream file format and JSON sidecar metadata.

Raw mode packs bits MSB-first into bytes; the final byte is zero-padded and
the true bit count lives in the sidecar. ASCII mode is one '0'/'1' character
per bit with whitespace ignored on read, for interchange with external suites.
"""
from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError
from .streams import BitStream

SIDECAR_SUFFIX = ".meta.json"
_ASCII_WHITESPACE = b" \t\r\n"


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


@contextmanager
def atomic_output(path, mode: str = "wb"):
    """Write to ``path.partial`` and rename on success.

    On failure the partial file is left in place for inspection; the
    requested name is never created with truncated content.
    """
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    with open(partial, mode) as fh:
        yield fh
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(partial, path)


def write_json(path, payload: dict) -> None:
    with atomic_output(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def encode_bits(stream: BitStream, mode: str = "raw") -> bytes:
    if mode == "raw":
        return stream.to_bytes()
    if mode == "ascii":
        return (stream.bits + ord("0")).astype(np.uint8).tobytes()
    raise ValueError(f"unknown bitstream mode {mode!r}")


def decode_ascii(data: bytes) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8)
    is_bit = (raw == ord("0")) | (raw == ord("1"))
    is_space = np.isin(raw, np.frombuffer(_ASCII_WHITESPACE, dtype=np.uint8))
    bad = np.flatnonzero(~(is_bit | is_space))
    if bad.size:
        offset = int(bad[0])
        raise ParseError(f"unexpected byte {data[offset:offset + 1]!r} in ASCII bitstream", offset)
    return (raw[is_bit] - ord("0")).astype(np.uint8)


def write_bitstream(path, stream: BitStream, mode: str = "raw", metadata: Optional[dict] = None) -> Path:
    """Write ``stream`` to ``path`` and a sidecar next to it. Returns the sidecar path."""
    with atomic_output(path) as fh:
        fh.write(encode_bits(stream, mode))
    meta = {
        "mode": mode,
        "bits": stream.length,
        "discarded_bits": stream.discarded_bits,
        "provenance": stream.provenance,
    }
    if metadata:
        meta.update(metadata)
    side = sidecar_path(path)
    write_json(side, meta)
    return side


def read_bitstream(path, mode: Optional[str] = None) -> BitStream:
    """Load a bitstream file, honouring its sidecar when one exists.

    Without a sidecar or explicit ``mode`` the file is treated as ASCII when
    every byte is '0', '1' or whitespace, else as raw.
    """
    path = Path(path)
    data = path.read_bytes()
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = read_json(side)
    mode = mode or meta.get("mode")
    if mode is None:
        mode = "ascii" if data and not data.strip(b"01" + _ASCII_WHITESPACE) else "raw"
    if mode == "ascii":
        bits = decode_ascii(data)
    elif mode == "raw":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if "bits" in meta:
            bits = bits[: int(meta["bits"])]
    else:
        raise ValueError(f"unknown bitstream mode {mode!r}")
    return BitStream(bits, provenance=meta.get("provenance", "file"))
