"""Monte Carlo tasks with closed-form answers, for exposing generator defects.

A generator here is anything with a ``unit_reals(n)`` method returning
floats in [0, 1) and a ``descriptor`` attribute. PRNGs map the top 32 bits of
each word to [0, 1); hybrid generators use consecutive 32-bit words of their
output stream.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .combiner import CombinerDescriptor, HybridGenerator
from .errors import ConfigurationError, RandomnessError
from .prng import PrngDescriptor, PseudoGenerator

INTEGRANDS = {
    "x2": (lambda x: x * x, 1.0 / 3.0),
    "sin_pi": (lambda x: np.sin(np.pi * x), 2.0 / math.pi),
    "step": (lambda x: (x >= 0.5).astype(np.float64), 0.5),
}
TASK_KINDS = ("pi-estimate", "integrate-1d", "walk-return")


@dataclass(frozen=True)
class McTask:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigurationError(f"unknown Monte Carlo task {self.kind!r}")
        if self.kind == "integrate-1d" and self.params.get("integrand") not in INTEGRANDS:
            raise ConfigurationError(
                f"integrate-1d needs an integrand from {sorted(INTEGRANDS)}"
            )
        if self.kind == "walk-return":
            steps = int(self.params.get("steps", 0))
            if steps < 2 or steps % 2:
                raise ConfigurationError(f"walk length must be even and positive, got {steps}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "McTask":
        return cls(data["kind"], dict(data.get("params", {})))


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    truth: float
    abs_error: float
    n: int
    std_error: float
    generator: Any = None

    @property
    def z_score(self) -> float:
        if self.std_error > 0:
            return self.abs_error / self.std_error
        return math.inf if self.abs_error > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "truth": self.truth,
            "abs_error": self.abs_error,
            "n": self.n,
            "std_error": self.std_error,
            "z": self.z_score,
            "generator": self.generator,
        }


def _estimate(value: float, truth: float, n: int, std_error: float, gen) -> McEstimate:
    descriptor = getattr(gen, "descriptor", None)
    if hasattr(descriptor, "to_dict"):
        descriptor = descriptor.to_dict()
    return McEstimate(float(value), float(truth), abs(float(value) - float(truth)), int(n), float(std_error), descriptor)


class ReplayGenerator:
    """Cycles through a fixed list of unit reals; for hand-checkable runs."""

    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.size == 0 or self.values.min() < 0 or self.values.max() >= 1:
            raise ConfigurationError("replay values must be non-empty and lie in [0, 1)")
        self.descriptor = {"kind": "replay", "values": self.values.tolist()}
        self._pos = 0

    def unit_reals(self, n: int) -> np.ndarray:
        idx = (self._pos + np.arange(n)) % self.values.size
        self._pos = (self._pos + n) % self.values.size
        return self.values[idx]


def estimate_pi(gen, n: int) -> McEstimate:
    if n < 1:
        raise ConfigurationError("need at least one sample pair")
    u = gen.unit_reals(2 * n)
    x, y = u[0::2], u[1::2]
    p_hat = float(np.count_nonzero(x * x + y * y < 1.0)) / n
    return _estimate(4.0 * p_hat, math.pi, n, 4.0 * math.sqrt(p_hat * (1.0 - p_hat) / n), gen)


def integrate_1d(gen, f: str, n: int) -> McEstimate:
    if f not in INTEGRANDS:
        raise ConfigurationError(f"unknown integrand {f!r}; choose from {sorted(INTEGRANDS)}")
    if n < 1:
        raise ConfigurationError("need at least one sample")
    func, truth = INTEGRANDS[f]
    values = func(gen.unit_reals(n))
    std_error = float(values.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return _estimate(float(values.mean()), truth, n, std_error, gen)


def walk_truth(steps: int) -> float:
    return math.comb(steps, steps // 2) / 2.0**steps


def walk_return(gen, steps: int, trials: int) -> McEstimate:
    """Probability that a +-1 symmetric walk sits at the origin after ``steps``.

    A step is +1 when its unit real is at least 1/2, else -1.
    """
    if steps < 2 or steps % 2:
        raise ConfigurationError(f"walk length must be even and positive, got {steps}")
    if trials < 1:
        raise ConfigurationError("need at least one trial")
    u = gen.unit_reals(steps * trials).reshape(trials, steps)
    ups = np.count_nonzero(u >= 0.5, axis=1)
    p_hat = float(np.count_nonzero(2 * ups == steps)) / trials
    return _estimate(p_hat, walk_truth(steps), trials, math.sqrt(p_hat * (1.0 - p_hat) / trials), gen)


def run_task(task: McTask, gen, n: int) -> McEstimate:
    if task.kind == "pi-estimate":
        return estimate_pi(gen, n)
    if task.kind == "integrate-1d":
        return integrate_1d(gen, task.params["integrand"], n)
    return walk_return(gen, int(task.params["steps"]), n)


def make_generator(descriptor):
    """Build a fresh generator handle from a descriptor object or dict."""
    if isinstance(descriptor, (PseudoGenerator, HybridGenerator, ReplayGenerator)):
        return descriptor
    if isinstance(descriptor, PrngDescriptor):
        return PseudoGenerator(descriptor)
    if isinstance(descriptor, CombinerDescriptor):
        return HybridGenerator(descriptor)
    if isinstance(descriptor, dict):
        if "mode" in descriptor:
            return HybridGenerator(CombinerDescriptor.from_dict(descriptor))
        if descriptor.get("kind") == "replay":
            return ReplayGenerator(descriptor["values"])
        return PseudoGenerator(PrngDescriptor.from_dict(descriptor))
    raise ConfigurationError(f"cannot build a generator from {descriptor!r}")


def describe(spec) -> dict:
    if isinstance(spec, dict):
        return spec
    d = spec if hasattr(spec, "to_dict") else spec.descriptor
    return d.to_dict() if hasattr(d, "to_dict") else d


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    generator: dict
    estimate: Optional[McEstimate] = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.estimate is None


@dataclass(frozen=True)
class ComparisonTable:
    task: McTask
    n: int
    rows: tuple

    def to_dict(self) -> dict:
        rows = []
        for row in self.rows:
            entry = {"label": row.label, "generator": row.generator, "status": "failed" if row.failed else "ok"}
            if row.failed:
                entry["error"] = row.error
            else:
                entry.update({k: v for k, v in row.estimate.to_dict().items() if k != "generator"})
            rows.append(entry)
        return {"task": self.task.to_dict(), "n": self.n, "rows": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", "estimate", "truth", "abs_error", "std_error", "z", "n", "status", "generator"])
        for row in self.rows:
            gen = json.dumps(row.generator, sort_keys=True)
            if row.failed:
                writer.writerow([row.label, "", "", "", "", "", self.n, "failed: " + row.error, gen])
                continue
            e = row.estimate
            writer.writerow([
                row.label, repr(e.estimate), repr(e.truth), repr(e.abs_error),
                repr(e.std_error), repr(e.z_score), e.n, "ok", gen,
            ])
        return buf.getvalue()


def generator_label(descriptor: dict) -> str:
    if "mode" in descriptor:
        return f"hybrid({descriptor['rs']['kind']} o {generator_label(descriptor['ss'])})"
    if descriptor.get("kind") == "replay":
        return "replay"
    if descriptor.get("preset"):
        return descriptor["preset"]
    if descriptor.get("family") == "lcg":
        return f"lcg(a={descriptor['a']},c={descriptor['c']},m={descriptor['modulus']})"
    return descriptor.get("family", "generator")


def compare_generators(task: McTask, gens: Sequence, n: int) -> ComparisonTable:
    """Run ``task`` with identical ``n`` on every generator.

    A generator that errors gets a failed row; the others still run.
    """
    if len(gens) < 2:
        raise ConfigurationError("a comparison needs at least two generators")
    rows = []
    for spec in gens:
        info = describe(spec)
        label = generator_label(info)
        try:
            rows.append(ComparisonRow(label, info, run_task(task, make_generator(spec), n)))
        except (RandomnessError, OSError) as exc:
            rows.append(ComparisonRow(label, info, None, f"{type(exc).__name__}: {exc}"))
    return ComparisonTable(task, n, tuple(rows))
