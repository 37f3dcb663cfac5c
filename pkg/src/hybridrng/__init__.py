"""Hybrid random generation: an entropy source combined with a PRNG, plus
a statistical test battery and a Monte Carlo harness for checking the result.

Typical use::

    from hybridrng import CombinerDescriptor, HybridGenerator, os_entropy, PrngDescriptor

    desc = CombinerDescriptor("digital-dice", os_entropy(), PrngDescriptor.from_preset("randu"), q=6)
    rolls = HybridGenerator(desc).next_symbols(10)
"""
from .battery import (
    BatteryReport,
    CoverageCurve,
    TestResult,
    approx_entropy,
    autocorrelation,
    chi_square_uniformity,
    monobit,
    prefix_coverage,
    run_battery,
    runs_test,
    serial_test,
    star_discrepancy,
)
from .combiner import (
    CombinerDescriptor,
    DiceOutcome,
    HybridGenerator,
    digital_dice_step,
    hybrid_next_bits,
    hybrid_next_symbols,
    xor_combine,
)
from .errors import (
    ConfigurationError,
    DomainError,
    ExhaustedSourceError,
    InsufficientDataError,
    NonInvertibleModulusError,
    NotApplicableError,
    ParseError,
    RandomnessError,
    SourceUnavailableError,
)
from .fileio import read_bitstream, write_bitstream
from .montecarlo import McEstimate, McTask, compare_generators, estimate_pi, integrate_1d, walk_return
from .prng import PrngDescriptor, PrngState, PseudoGenerator, detect_period, hull_dobell, next_output, prng_bits
from .sources import (
    EntropySourceDescriptor,
    RawSampleBlock,
    next_bits,
    open_source,
    os_entropy,
    replay,
    von_neumann_debias,
)
from .special import chi2_sf, erfc, gammainc, gammaincc
from .streams import BitStream, SymbolStream, UnitReal, bits_to_symbols, symbols_to_bits, symbols_to_unit_real

__version__ = "0.1.0"
