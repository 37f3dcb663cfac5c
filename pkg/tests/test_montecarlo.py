import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridrng.combiner import CombinerDescriptor, HybridGenerator
from hybridrng.errors import ConfigurationError
from hybridrng.montecarlo import (
    McTask,
    ReplayGenerator,
    compare_generators,
    estimate_pi,
    integrate_1d,
    make_generator,
    run_task,
    walk_return,
    walk_truth,
)
from hybridrng.prng import PrngDescriptor, PseudoGenerator
from hybridrng.sources import os_entropy

LCG16 = {"family": "lcg", "a": 5, "c": 1, "modulus": 16, "seed": 0}
TASKS = [
    McTask("pi-estimate"),
    McTask("integrate-1d", {"integrand": "x2"}),
    McTask("integrate-1d", {"integrand": "sin_pi"}),
    McTask("integrate-1d", {"integrand": "step"}),
    McTask("walk-return", {"steps": 6}),
]


def mix(seed):
    return PseudoGenerator(PrngDescriptor("mix64", seed))


def test_pi_all_inside():
    assert estimate_pi(ReplayGenerator([0.0]), 100).estimate == 4.0


def test_pi_all_outside():
    assert estimate_pi(ReplayGenerator([1 - 1e-12]), 100).estimate == 0.0


def test_pi_mix64():
    e = estimate_pi(mix(42), 10**6)
    assert e.abs_error < 0.01
    assert e.std_error == pytest.approx(4 * math.sqrt(math.pi / 4 * (1 - math.pi / 4) / 10**6), rel=0.01)


def test_integrate_constant():
    assert integrate_1d(ReplayGenerator([0.5]), "x2", 10).estimate == 0.25


def test_integrate_step_alternating():
    assert integrate_1d(ReplayGenerator([0.25, 0.75]), "step", 1000).estimate == 0.5


def test_integrate_x2_mix64():
    e = integrate_1d(mix(7), "x2", 10**6)
    assert e.truth == pytest.approx(1 / 3) and e.abs_error < 0.002


def test_unknown_integrand():
    with pytest.raises(ConfigurationError):
        integrate_1d(mix(1), "exp", 10)
    with pytest.raises(ConfigurationError):
        McTask("integrate-1d", {"integrand": "exp"})


def test_walk_forced_path():
    e = walk_return(ReplayGenerator([0.9, 0.1]), 2, 1)
    assert e.truth == 0.5 and e.estimate == 1.0


def test_walk_truth_values():
    assert walk_truth(10) == 252 / 1024


def test_walk_mix64():
    assert walk_return(mix(3), 2, 10**5).abs_error < 0.01


@pytest.mark.parametrize("steps", [3, 0])
def test_walk_needs_even_steps(steps):
    with pytest.raises(ConfigurationError):
        walk_return(mix(1), steps, 10)


def test_compare_needs_two():
    with pytest.raises(ConfigurationError):
        compare_generators(McTask("pi-estimate"), [{"family": "mix64", "seed": 1}], 100)


def test_compare_identical_descriptors():
    d = {"family": "mix64", "seed": 9}
    table = compare_generators(McTask("pi-estimate"), [d, dict(d)], 10**4)
    assert table.rows[0] == table.rows[1]


def test_tiny_lcg_has_large_z():
    table = compare_generators(McTask("pi-estimate"), [LCG16, {"family": "mix64", "seed": 1}], 10**4)
    assert abs(table.rows[0].estimate.z_score) > 6


def test_walk_hybrid_vs_randu():
    hybrid = HybridGenerator(
        CombinerDescriptor("digital-dice", os_entropy(), PrngDescriptor.from_preset("randu", 1), q=2**32)
    )
    randu = {"preset": "randu", "seed": 1}
    table = compare_generators(McTask("walk-return", {"steps": 64}), [hybrid, randu], 10**5)
    assert abs(table.rows[0].estimate.z_score) <= 4
    assert math.isfinite(table.rows[1].estimate.z_score)


def test_failed_generator_gets_failed_row(tmp_path):
    broken = {"mode": "digital-dice", "q": 4, "rs": {"kind": "file-replay", "params": {"path": str(tmp_path / "x")}},
              "ss": {"family": "mix64", "seed": 1}}
    table = compare_generators(McTask("pi-estimate"), [broken, {"family": "mix64", "seed": 1}], 100)
    assert table.rows[0].failed and not table.rows[1].failed
    assert "failed" in table.to_csv()


def test_table_serialises():
    table = compare_generators(McTask("pi-estimate"), [LCG16, {"preset": "randu", "seed": 1}], 1000)
    assert table.to_dict()["rows"][0]["generator"] == LCG16
    assert table.to_csv().splitlines()[0].startswith("label,estimate")


@pytest.mark.parametrize("task", TASKS, ids=lambda t: t.to_dict()["params"].get("integrand", t.kind))
def test_estimates_converge(task):
    wins = sum(
        run_task(task, mix(seed), 10**6).abs_error < run_task(task, mix(seed), 10**3).abs_error
        for seed in range(100)
    )
    assert wins >= 95


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(2, 2000), k=st.integers(0, 4))
def test_estimate_invariants(seed, n, k):
    task = TASKS[k]
    a = run_task(task, make_generator({"family": "mix64", "seed": seed}), n)
    b = run_task(task, make_generator({"family": "mix64", "seed": seed}), n)
    assert a == b
    assert a.abs_error == abs(a.estimate - a.truth)
    if task.kind != "integrate-1d" and 0 < a.estimate < (4 if task.kind == "pi-estimate" else 1):
        assert a.std_error > 0 and math.isfinite(a.z_score)


def test_step_tie_rate_matches_binomial_atom():
    # an n=1000 step estimate is exact (zero error) with probability C(1000,500)/2**1000,
    # which bounds how often the convergence comparison above can succeed for this integrand
    atom = math.comb(1000, 500) / 2.0**1000
    seeds = 4000
    ties = sum(
        int(np.count_nonzero(mix(s).unit_reals(1000) >= 0.5) == 500) for s in range(seeds)
    )
    sd = math.sqrt(seeds * atom * (1 - atom))
    assert abs(ties - seeds * atom) < 5 * sd
