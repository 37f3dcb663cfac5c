import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridrng.battery import chi_square_uniformity, monobit, runs_test
from hybridrng.combiner import (
    CombinerDescriptor,
    HybridGenerator,
    digital_dice_step,
    hybrid_next_bits,
    hybrid_next_symbols,
    parse_mix_rate,
    segment_index,
    xor_combine,
)
from hybridrng.errors import (
    ConfigurationError,
    DomainError,
    ExhaustedSourceError,
    LengthMismatchError,
    NonInvertibleModulusError,
)
from hybridrng.fileio import write_bitstream
from hybridrng.prng import PrngDescriptor, PseudoGenerator
from hybridrng.sources import EntropySourceDescriptor, os_entropy, replay
from hybridrng.streams import BitStream

ZEROS = EntropySourceDescriptor("deterministic-test", {"pattern": [0]})
RANDU = PrngDescriptor.from_preset("randu", 1)


def test_dice_examples():
    assert digital_dice_step(3, 0, 10).result == 3
    assert digital_dice_step(3, 9, 10).result == 2


@pytest.mark.parametrize("u, r, q", [(10, 0, 10), (0, -1, 10), (0, 0, 1)])
def test_dice_domain(u, r, q):
    with pytest.raises(DomainError):
        digital_dice_step(u, r, q)


def test_dice_bijection_in_offset_q6():
    for u in range(6):
        assert sorted(digital_dice_step(u, r, 6).result for r in range(6)) == list(range(6))


def test_xor_truth_table_and_identity():
    a = BitStream.from_iterable([0, 0, 1, 1])
    b = BitStream.from_iterable([0, 1, 0, 1])
    assert xor_combine(a, b).bits.tolist() == [0, 1, 1, 0]
    assert xor_combine(a, BitStream(np.zeros(4, dtype=np.uint8))) == a


def test_xor_length_mismatch():
    with pytest.raises(LengthMismatchError):
        xor_combine(BitStream.from_iterable([1]), BitStream.from_iterable([1, 0]))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_xor_involution(data):
    n = data.draw(st.integers(0, 300))
    x = BitStream.from_iterable(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    k = BitStream.from_iterable(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    assert xor_combine(xor_combine(x, k), k) == x


@settings(max_examples=100, deadline=None)
@given(q=st.integers(2, 2**32), words=st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=20))
def test_segment_index_matches_exact_integer_formula(q, words):
    got = segment_index(np.array(words, dtype=np.uint64), q).tolist()
    assert got == [(q * w) >> 64 for w in words]


@pytest.mark.parametrize("q", [6, 10, 16])
def test_zero_offsets_reproduce_ss_segments(q):
    d = CombinerDescriptor("digital-dice", ZEROS, RANDU, q=q)
    out = hybrid_next_symbols(d, 500)
    expected = segment_index(PseudoGenerator(RANDU).next_frames(500), q)
    assert out.symbols.tolist() == expected.tolist()


def test_q2_zero_offsets_give_ss_top_bits():
    d = CombinerDescriptor("digital-dice", ZEROS, RANDU, q=2)
    words = PseudoGenerator(RANDU).next_outputs(200)
    assert hybrid_next_bits(d, 200).bits.tolist() == (words >> np.uint64(30)).tolist()


def test_xor_with_complement_is_all_ones(tmp_path):
    ss = PrngDescriptor("mix64", 5)
    comp = BitStream(1 - PseudoGenerator(ss).next_bits(1000).bits)
    path = tmp_path / "comp.bin"
    write_bitstream(path, comp)
    out = hybrid_next_symbols(CombinerDescriptor("xor", replay(path), ss, q=2), 1000)
    assert out.symbols.min() == 1


def test_exhausted_rs_is_an_error(tmp_path):
    path = tmp_path / "short.bin"
    write_bitstream(path, BitStream(np.ones(10, dtype=np.uint8)))
    gen = HybridGenerator(CombinerDescriptor("digital-dice", replay(path), RANDU, q=4))
    gen.next_symbols(5)
    with pytest.raises(ExhaustedSourceError):
        gen.next_symbols(1)


def test_dice_bits_need_power_of_two():
    with pytest.raises(NonInvertibleModulusError):
        hybrid_next_bits(CombinerDescriptor("digital-dice", ZEROS, RANDU, q=6), 8)


def test_empty_requests():
    d = CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=8)
    assert hybrid_next_bits(d, 0).length == 0
    assert hybrid_next_symbols(d, 0).length == 0


@pytest.mark.parametrize("rate", ["0", "3/2", "x", -1])
def test_bad_mix_rate(rate):
    with pytest.raises(ConfigurationError):
        parse_mix_rate(rate)


def test_descriptor_round_trip():
    d = CombinerDescriptor("xor", os_entropy(), RANDU, q=4, mix_rate=Fraction(1, 3))
    assert CombinerDescriptor.from_dict(d.to_dict()) == d


def test_dice_q_limit():
    with pytest.raises(ConfigurationError):
        CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=2**32 + 1)


def test_mix_rate_one_never_reuses_a_draw():
    gen = HybridGenerator(CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=6))
    outcomes = gen.next_outcomes(300) + gen.next_outcomes(200)
    idx = [o.draw_index for o in outcomes]
    assert idx == list(range(500))


@pytest.mark.parametrize("rate", ["1/3", "2/5", "1/1"])
def test_mix_rate_draw_schedule(rate):
    r = Fraction(rate)
    gen = HybridGenerator(CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=6, mix_rate=r))
    outcomes = []
    for chunk in (7, 1, 50, 42):
        outcomes += gen.next_outcomes(chunk)
    assert [o.draw_index for o in outcomes] == [math.floor(i * r) for i in range(100)]
    by_draw = {}
    for o in outcomes:
        by_draw.setdefault(o.draw_index, set()).add(o.rs_offset)
    assert all(len(v) == 1 for v in by_draw.values())
    assert gen.accounting()["rs_draws"] == math.floor(99 * r) + 1


def test_consumption_bound_power_of_two():
    gen = HybridGenerator(CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=8, mix_rate="1/2"))
    gen.next_symbols(10001)
    acc = gen.accounting()
    assert acc["rs_bits_consumed"] == math.ceil(10001 / 2) * 3


def test_consumption_tracks_rejection_factor():
    n = 200000
    gen = HybridGenerator(CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=5))
    gen.next_symbols(n)
    acc = gen.accounting()
    assert acc["rejection_factor"] == pytest.approx(8 / 5)
    # accepted-group count is binomial; 6 sigma around the expected bit count
    sigma = 3 * math.sqrt(n * (3 / 8)) / (5 / 8)
    assert abs(acc["rs_bits_consumed"] - n * 3 * 8 / 5) < 6 * sigma


def test_hybrid_repairs_randu_uniformity():
    out = hybrid_next_symbols(CombinerDescriptor("digital-dice", os_entropy(), RANDU, q=10), 10**6)
    assert chi_square_uniformity(out).p_value > 1e-4


def test_xor_mode_battery_on_randu():
    bits = hybrid_next_bits(CombinerDescriptor("xor", os_entropy(), RANDU, q=2), 10**6)
    assert monobit(bits).p_value > 1e-4
    assert runs_test(bits).p_value > 1e-4


def test_file_replay_hybrid_is_reproducible(tmp_path):
    path = tmp_path / "rs.bin"
    write_bitstream(path, BitStream(np.random.default_rng(3).integers(0, 2, 50000, dtype=np.uint8)))
    d = CombinerDescriptor("digital-dice", replay(path), RANDU, q=6, mix_rate="1/2")
    assert hybrid_next_symbols(d, 5000).symbols.tolist() == hybrid_next_symbols(d, 5000).symbols.tolist()


def test_unit_reals_fast_path_matches_symbols():
    d = CombinerDescriptor("digital-dice", EntropySourceDescriptor("deterministic-test", {"seed": 4}), RANDU, q=2**32)
    fast = HybridGenerator(d).unit_reals(100)
    words = HybridGenerator(d).next_symbols(100).symbols
    assert fast.tolist() == (words / 2.0**32).tolist()


def test_xor_of_biased_streams():
    # P(x ^ y = 1) = p(1-q) + q(1-p); with p = q = 0.6 that is 0.48
    n = 10**6
    a = BitStream((PseudoGenerator(PrngDescriptor("mix64", 101)).unit_reals(n) < 0.6).astype(np.uint8))
    b = BitStream((PseudoGenerator(PrngDescriptor("mix64", 202)).unit_reals(n) < 0.6).astype(np.uint8))
    assert xor_combine(a, b).ones_fraction() == pytest.approx(0.48, abs=0.005)
