"""Statistical randomness tests and the battery that runs them.

Each test is a pure function of its input stream and parameters and returns
a :class:`TestResult`. Raw p-values are always reported; a result below the
significance level is recorded as a failure, never dropped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    BlockLengthError,
    CellBudgetExceededError,
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    NotApplicableError,
    RandomnessError,
)
from .special import chi2_sf, erfc, normal_two_sided
from .streams import (
    BitStream,
    SymbolStream,
    UnitReal,
    bits_to_symbols,
    is_power_of_two,
    symbols_to_bits,
)

DEFAULT_SIGNIFICANCE = 1e-4
MIN_BITS = 100
SERIAL_CELL_BUDGET = 4096
COVERAGE_CELL_BUDGET = 10**7


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: Optional[float]
    p_value: Optional[float]
    n: int
    passed: Optional[bool]
    parameters: dict = field(default_factory=dict)
    status: str = "ok"
    note: str = ""

    __test__ = False  # not a pytest class

    @property
    def applicable(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "name": self.test_name,
            "parameters": self.parameters,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "pass": self.passed,
            "status": self.status,
            "note": self.note,
        }


def _result(name, statistic, p_value, n, significance, **parameters) -> TestResult:
    p_value = min(1.0, max(0.0, float(p_value)))
    return TestResult(name, float(statistic), p_value, int(n), p_value >= significance, parameters)


def _bits(stream) -> np.ndarray:
    return stream.bits if isinstance(stream, BitStream) else np.asarray(stream, dtype=np.uint8)


def _require_bits(bits: np.ndarray, minimum: int = MIN_BITS) -> None:
    if bits.size < minimum:
        raise InsufficientDataError(f"need at least {minimum} bits, got {bits.size}")


def monobit(bits: BitStream, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    """Frequency test: are ones and zeros balanced overall?"""
    b = _bits(bits)
    _require_bits(b)
    n = b.size
    s = 2 * int(b.sum(dtype=np.int64)) - n
    stat = abs(s) / math.sqrt(n)
    return _result("monobit", stat, erfc(stat / math.sqrt(2.0)), n, significance)


def runs_test(bits: BitStream, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    """Number of maximal runs against its expectation given the ones-proportion.

    Not applicable when the ones-proportion is 2/sqrt(n) or more away from 1/2.
    """
    b = _bits(bits)
    _require_bits(b)
    n = b.size
    pi = float(b.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        raise NotApplicableError(f"ones-proportion {pi:.4f} fails the frequency prerequisite")
    runs = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    spread = pi * (1.0 - pi)
    p = erfc(abs(runs - 2.0 * n * spread) / (2.0 * math.sqrt(2.0 * n) * spread))
    return _result("runs", runs, p, n, significance, ones_fraction=pi)


def _chi_square(counts: np.ndarray, expected: float) -> float:
    counts = counts.astype(np.float64)
    return float(((counts - expected) ** 2).sum() / expected)


def chi_square_uniformity(s: SymbolStream, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    q, n = s.q, s.length
    if n < 5 * q:
        raise InsufficientDataError(f"need at least {5 * q} symbols for q={q}, got {n}")
    counts = np.bincount(s.symbols, minlength=q)
    stat = _chi_square(counts, n / q)
    return _result("chi_square", stat, chi2_sf(stat, q - 1), n, significance, q=q)


def serial_test(s: SymbolStream, dim: int, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    """Occupancy of non-overlapping ``dim``-tuples over the q**dim cells."""
    if dim not in (2, 3):
        raise DomainError(f"serial test dimension must be 2 or 3, got {dim}")
    q, n = s.q, s.length
    cells = q**dim
    if cells > SERIAL_CELL_BUDGET:
        raise CellBudgetExceededError(f"q**dim = {cells} exceeds {SERIAL_CELL_BUDGET} cells")
    if n < 5 * cells:
        raise InsufficientDataError(f"need at least {5 * cells} symbols, got {n}")
    m = n // dim
    tuples = s.symbols[: m * dim].reshape(m, dim)
    codes = np.zeros(m, dtype=np.int64)
    for col in range(dim):
        codes = codes * q + tuples[:, col]
    counts = np.bincount(codes, minlength=cells)
    stat = _chi_square(counts, m / cells)
    return _result("serial", stat, chi2_sf(stat, cells - 1), n, significance, q=q, dim=dim)


def autocorrelation(bits: BitStream, lag: int, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    b = _bits(bits)
    _require_bits(b)
    n = b.size
    if lag < 1:
        raise DomainError(f"lag must be positive, got {lag}")
    if lag > n // 2:
        raise InsufficientDataError(f"lag {lag} exceeds half the stream length {n}")
    pairs = n - lag
    agree = int(np.count_nonzero(b[:-lag] == b[lag:]))
    z = (agree - pairs / 2.0) / math.sqrt(pairs / 4.0)
    return _result("autocorrelation", z, normal_two_sided(z), n, significance, lag=lag)


def _phi(b: np.ndarray, m: int) -> float:
    n = b.size
    ext = np.concatenate([b, b[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | ext[j : j + n]
    counts = np.bincount(codes, minlength=1 << m)
    freq = counts[counts > 0] / n
    return float((freq * np.log(freq)).sum())


def approx_entropy(bits: BitStream, m: int, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    """Approximate entropy with cyclic extension of the stream."""
    b = _bits(bits)
    _require_bits(b)
    n = b.size
    if m < 1:
        raise DomainError(f"block length must be at least 1, got {m}")
    if m > math.log2(n) - 5:
        raise BlockLengthError(f"block length {m} too large for n={n}")
    apen = _phi(b, m) - _phi(b, m + 1)
    stat = max(0.0, 2.0 * n * (math.log(2.0) - apen))
    return _result("approx_entropy", stat, chi2_sf(stat, 2**m), n, significance, m=m, apen=apen)


def _as_floats(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.astype(np.float64).reshape(-1)
    return np.array([float(p) for p in points], dtype=np.float64)


def star_discrepancy(points: Union[Sequence[UnitReal], np.ndarray]) -> float:
    """Exact one-dimensional star discrepancy of a finite point set."""
    x = np.sort(_as_floats(points))
    n = x.size
    if n == 0:
        raise InsufficientDataError("star discrepancy needs at least one point")
    if x[0] < 0.0 or x[-1] > 1.0:
        raise DomainError("points must lie in [0, 1]")
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(np.maximum(i / n - x, x - (i - 1) / n).max())


@dataclass(frozen=True)
class CoverageCurve:
    depth: int
    q: int
    points: tuple  # ((n, covered_fraction), ...)

    @property
    def final_fraction(self) -> float:
        return self.points[-1][1] if self.points else 0.0

    def fraction_at(self, n: int) -> float:
        best = 0.0
        for count, frac in self.points:
            if count <= n:
                best = frac
        return best


def _log_points(total: int, per_decade: int = 12) -> np.ndarray:
    if total <= 0:
        return np.zeros(0, dtype=np.int64)
    grid = np.logspace(0, math.log10(total), num=max(2, int(per_decade * math.log10(total + 1)) + 1))
    return np.unique(np.concatenate([np.round(grid).astype(np.int64), [total]]))


def prefix_coverage(streams, d: int, q: Optional[int] = None) -> CoverageCurve:
    """Fraction of the q**d length-d prefixes seen among the first n sequences.

    ``streams`` is a list of :class:`SymbolStream` sharing one q, or a 2-D
    integer array with one measurement sequence per row (``q`` required).
    """
    if isinstance(streams, np.ndarray):
        if q is None:
            raise ConfigurationError("q is required when sequences are given as an array")
        digits = np.atleast_2d(streams)
    else:
        streams = list(streams)
        qs = {s.q for s in streams}
        if len(qs) > 1:
            raise ConfigurationError(f"streams disagree on q: {sorted(qs)}")
        q = q or (qs.pop() if qs else None)
        if q is None:
            raise ConfigurationError("cannot infer q from an empty stream list")
        if any(s.length < d for s in streams):
            raise InsufficientDataError(f"every sequence needs at least {d} symbols")
        digits = np.array([s.symbols[:d] for s in streams], dtype=np.int64).reshape(len(streams), d)
    cells = q**d
    if cells > COVERAGE_CELL_BUDGET:
        raise CellBudgetExceededError(f"q**d = {cells} exceeds {COVERAGE_CELL_BUDGET} prefixes")
    if digits.shape[1] < d:
        raise InsufficientDataError(f"every sequence needs at least {d} symbols")
    codes = np.zeros(digits.shape[0], dtype=np.int64)
    for col in range(d):
        codes = codes * q + digits[:, col]
    _, first = np.unique(codes, return_index=True)
    first = np.sort(first)
    counts = _log_points(codes.size)
    covered = np.searchsorted(first, counts, side="left")
    points = tuple((int(n), float(c) / cells) for n, c in zip(counts, covered))
    return CoverageCurve(d, q, points)


# --- battery -----------------------------------------------------------------

DEFAULT_SUITE = (
    {"name": "monobit"},
    {"name": "runs"},
    {"name": "chi_square", "q": 16},
    {"name": "serial", "q": 16, "dim": 2},
    {"name": "serial", "q": 16, "dim": 3},
    {"name": "autocorrelation", "lag": 1},
    {"name": "autocorrelation", "lag": 2},
    {"name": "autocorrelation", "lag": 8},
    {"name": "autocorrelation", "lag": 64},
    {"name": "autocorrelation", "lag": 1024},
    {"name": "approx_entropy", "m": 2},
)


def _stream_bits(stream) -> BitStream:
    if isinstance(stream, BitStream):
        return stream
    if isinstance(stream, SymbolStream):
        return symbols_to_bits(stream)
    raise TypeError(f"cannot run bit tests on {type(stream).__name__}")


def _stream_symbols(stream, q: Optional[int]) -> SymbolStream:
    if isinstance(stream, SymbolStream):
        if q is None or q == stream.q:
            return stream
        if not is_power_of_two(stream.q):
            raise NotApplicableError(f"cannot re-encode q={stream.q} symbols as q={q}")
        stream = symbols_to_bits(stream)
    return bits_to_symbols(stream, q or 2)


_BIT_TESTS = {
    "monobit": lambda b, p, a: monobit(b, a),
    "runs": lambda b, p, a: runs_test(b, a),
    "autocorrelation": lambda b, p, a: autocorrelation(b, int(p.get("lag", 1)), a),
    "approx_entropy": lambda b, p, a: approx_entropy(b, int(p.get("m", 2)), a),
}
_SYMBOL_TESTS = {
    "chi_square": lambda s, p, a: chi_square_uniformity(s, a),
    "serial": lambda s, p, a: serial_test(s, int(p.get("dim", 2)), a),
}
TEST_NAMES = tuple(_BIT_TESTS) + tuple(_SYMBOL_TESTS)


def run_test(stream, spec: dict, significance: float = DEFAULT_SIGNIFICANCE) -> TestResult:
    """Run one configured test; errors become not-applicable results."""
    name = spec.get("name")
    params = {k: v for k, v in spec.items() if k != "name"}
    if name not in TEST_NAMES:
        raise ConfigurationError(f"unknown test {name!r}; known: {list(TEST_NAMES)}")
    n = stream.length if hasattr(stream, "length") else 0
    try:
        if name in _BIT_TESTS:
            return _BIT_TESTS[name](_stream_bits(stream), params, significance)
        q = params.get("q")
        return _SYMBOL_TESTS[name](_stream_symbols(stream, q), params, significance)
    except RandomnessError as exc:
        return TestResult(name, None, None, n, None, params, "not-applicable", str(exc))


@dataclass(frozen=True)
class BatteryReport:
    results: tuple
    significance: float
    provenance: object = None
    bit_count: int = 0

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.passed is True)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if r.passed is False)

    @property
    def not_applicable(self) -> int:
        return sum(1 for r in self.results if not r.applicable)

    @property
    def summary(self) -> tuple:
        return (self.passed, self.failed)

    @property
    def exit_status(self) -> int:
        if self.failed:
            return 1
        return 2 if self.not_applicable else 0

    def to_dict(self) -> dict:
        return {
            "significance": self.significance,
            "provenance": self.provenance,
            "bit_count": self.bit_count,
            "summary": {
                "pass": self.passed,
                "fail": self.failed,
                "not_applicable": self.not_applicable,
            },
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "parameters", "statistic", "p_value", "pass"])
        for r in self.results:
            writer.writerow([
                r.test_name,
                json.dumps(r.parameters, sort_keys=True),
                "" if r.statistic is None else repr(r.statistic),
                "" if r.p_value is None else repr(r.p_value),
                "n/a" if r.passed is None else str(r.passed).lower(),
            ])
        return buf.getvalue()


def run_battery(
    stream,
    tests: Optional[Iterable[dict]] = None,
    significance: float = DEFAULT_SIGNIFICANCE,
) -> BatteryReport:
    """Run each selected test in order; ``tests=None`` selects the default suite."""
    if not 0.0 < significance < 1.0:
        raise ConfigurationError(f"significance must lie in (0, 1), got {significance}")
    selection = DEFAULT_SUITE if tests is None else tuple(tests)
    results = tuple(run_test(stream, spec, significance) for spec in selection)
    bit_count = stream.length if isinstance(stream, BitStream) else 0
    if isinstance(stream, SymbolStream) and is_power_of_two(stream.q):
        bit_count = stream.length * (stream.q.bit_length() - 1)
    return BatteryReport(results, significance, getattr(stream, "provenance", None), bit_count)
