import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridrng.errors import InsufficientSymbolsError, InvalidModulusError, NonInvertibleModulusError
from hybridrng.streams import (
    BitStream,
    SymbolStream,
    UnitReal,
    bits_to_symbols,
    pack_groups,
    symbols_to_bits,
    symbols_to_unit_real,
    unit_reals,
    unpack_groups,
)


def bs(*bits):
    return BitStream.from_iterable(bits)


def test_power_of_two_reads_groups_directly():
    out = bits_to_symbols(bs(0, 0, 0, 1, 1, 0, 1, 1), 4)
    assert out.symbols.tolist() == [0, 1, 2, 3]
    assert out.q == 4


def test_rejection_drops_out_of_range_groups():
    out = bits_to_symbols(bs(1, 1, 0, 1, 0, 0), 3)
    assert out.symbols.tolist() == [1, 0]
    assert out.rejected_groups == 1


def test_trailing_partial_group_is_discarded_and_reported():
    out = bits_to_symbols(bs(1, 0, 1, 1, 1), 4)
    assert out.symbols.tolist() == [2, 3]
    assert out.discarded_bits == 1


def test_empty_output_is_allowed():
    assert bits_to_symbols(bs(1), 4).length == 0


@pytest.mark.parametrize("q", [0, 1, -3])
def test_modulus_below_two_rejected(q):
    with pytest.raises(InvalidModulusError):
        bits_to_symbols(bs(0, 1), q)


@pytest.mark.parametrize("q", [2, 3, 5, 6, 10])
def test_enumeration_of_all_groups_hits_each_symbol_once(q):
    width = (q - 1).bit_length()
    groups = list(itertools.product([0, 1], repeat=width))
    stream = BitStream.from_iterable([b for g in groups for b in g])
    symbols = bits_to_symbols(stream, q).symbols
    assert sorted(symbols.tolist()) == list(range(q))


def test_q10_accepts_ten_of_sixteen_groups():
    groups = [b for v in range(16) for b in format(v, "04b")]
    out = bits_to_symbols(BitStream.from_iterable(int(c) for c in groups), 10)
    assert out.length == 10
    assert out.rejected_groups == 6
    assert np.bincount(out.symbols, minlength=10).tolist() == [1] * 10


@pytest.mark.parametrize(
    "q, digits, expected",
    [(10, [1, 2, 3], 0.123), (10, [0, 0, 0], 0.0), (2, [1, 1], 0.75)],
)
def test_unit_real_labelling(q, digits, expected):
    real = symbols_to_unit_real(SymbolStream(q, digits), len(digits))
    assert real.value == pytest.approx(expected, abs=1e-15)
    assert real.digits_used == len(digits)


def test_unit_real_prefix_longer_than_stream():
    with pytest.raises(InsufficientSymbolsError):
        symbols_to_unit_real(SymbolStream(10, [1, 2]), 3)


def test_unit_real_rejects_out_of_range():
    with pytest.raises(ValueError):
        UnitReal(1.5, 1)


@pytest.mark.parametrize("q, symbols, bits", [(4, [3, 0], [1, 1, 0, 0]), (2, [0, 1, 1], [0, 1, 1])])
def test_symbols_to_bits_expands_msb_first(q, symbols, bits):
    assert symbols_to_bits(SymbolStream(q, symbols)).bits.tolist() == bits


def test_symbols_to_bits_refuses_non_power_of_two():
    with pytest.raises(NonInvertibleModulusError):
        symbols_to_bits(SymbolStream(10, [1, 2]))


def test_symbol_range_is_validated():
    with pytest.raises(ValueError):
        SymbolStream(4, [4])


def test_streams_are_read_only():
    s = bs(0, 1)
    with pytest.raises(ValueError):
        s.bits[0] = 1


def test_bytes_round_trip_msb_first():
    s = BitStream.from_bytes(b"\x80\x01")
    assert s.bits[0] == 1 and s.bits[15] == 1 and s.ones_fraction() == pytest.approx(2 / 16)
    assert s.to_bytes() == b"\x80\x01"


@pytest.mark.parametrize("width", [1, 3, 8, 13, 16, 32, 64])
def test_pack_unpack_inverse(width, rng):
    bits = rng.integers(0, 2, size=width * 50, dtype=np.uint8)
    assert np.array_equal(unpack_groups(pack_groups(bits, width), width), bits)


def test_vector_unit_reals_match_scalar():
    digits = np.array([[1, 2, 3], [9, 9, 9]])
    assert unit_reals(digits, 10).tolist() == pytest.approx([0.123, 0.999])


# --- properties ------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(k=st.integers(1, 16), data=st.data())
def test_round_trip_power_of_two(k, data):
    q = 2**k
    symbols = data.draw(st.lists(st.integers(0, q - 1), max_size=64))
    s = SymbolStream(q, symbols)
    back = bits_to_symbols(symbols_to_bits(s), q)
    assert back.symbols.tolist() == symbols


@settings(max_examples=200, deadline=None)
@given(q=st.integers(2, 36), data=st.data())
def test_unit_real_monotone_and_bounded(q, data):
    n = data.draw(st.integers(1, 8))
    a = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    b = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    ra = symbols_to_unit_real(SymbolStream(q, a), n).value
    rb = symbols_to_unit_real(SymbolStream(q, b), n).value
    assert 0.0 <= ra <= 1.0 and 0.0 <= rb <= 1.0
    if a < b:
        assert ra <= rb
    elif b < a:
        assert rb <= ra
