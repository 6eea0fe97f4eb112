"""Fixed-point arithmetic tests.

The oracles here are deliberately independent of the implementation: exact
rational arithmetic via ``fractions.Fraction`` for quantization and the
multiply-shift path, and unbounded Python integers for saturation behaviour.
"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikebp.fixedpoint import (
    Q1_9,
    Q4_8,
    Q5_7,
    FixedPoint,
    QFormat,
    add_sat,
    add_sat_array,
    audit_counts,
    count_float_mul,
    dequantize_array,
    from_real,
    mul_count_audit,
    quantize_array,
    reset_audit,
    saturating_cumsum,
    scalar_mul_shift,
    to_real,
)

# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def oracle_round_half_even(fr: Fraction) -> int:
    """Round an exact rational to the nearest integer, ties to even."""
    floor = fr.numerator // fr.denominator
    rem = fr - floor
    if rem > Fraction(1, 2):
        return floor + 1
    if rem < Fraction(1, 2):
        return floor
    return floor if floor % 2 == 0 else floor + 1


def oracle_quantize(x: float, fmt: QFormat, rounding: str = "nearest-even") -> int:
    """Exact-rational quantization oracle: scale, round, saturate."""
    scaled = Fraction(x) * (1 << fmt.frac_bits)
    if rounding == "nearest-even":
        raw = oracle_round_half_even(scaled)
    else:
        raw = scaled.numerator // scaled.denominator  # floor
    return max(fmt.raw_min, min(fmt.raw_max, raw))


def oracle_mul_shift(d_raw: int, d_fmt: QFormat, lr_raw: int, lr_fmt: QFormat,
                     out_fmt: QFormat) -> int:
    """Exact-rational oracle for the single hardware multiply.

    The product of two fixed-point values re-quantized by an arithmetic right
    shift is exactly ``floor(value_product * 2**out_frac)``, saturated.
    """
    value = Fraction(d_raw, 1 << d_fmt.frac_bits) * Fraction(lr_raw, 1 << lr_fmt.frac_bits)
    scaled = value * (1 << out_fmt.frac_bits)
    raw = scaled.numerator // scaled.denominator  # floor, exact
    return max(out_fmt.raw_min, min(out_fmt.raw_max, raw))


def oracle_add_sat(a: int, b: int, fmt: QFormat) -> int:
    total = a + b  # unbounded Python int, cannot overflow
    return max(fmt.raw_min, min(fmt.raw_max, total))


# ---------------------------------------------------------------------------
# QFormat / FixedPoint basics
# ---------------------------------------------------------------------------


def test_qformat_constants():
    assert Q5_7.int_bits == 5 and Q5_7.frac_bits == 7 and Q5_7.width == 12
    assert Q1_9.int_bits == 1 and Q1_9.frac_bits == 9 and Q1_9.width == 10
    assert Q4_8.width == 12
    assert str(Q5_7) == "Q5.7"
    assert Q5_7.raw_max == 2047 and Q5_7.raw_min == -2048
    assert Q1_9.raw_max == 511 and Q1_9.raw_min == -512
    assert Q5_7.scale == 128 and Q1_9.scale == 512


def test_qformat_validation():
    with pytest.raises(ValueError):
        QFormat(0, 3)  # no sign/integer bit
    with pytest.raises(ValueError):
        QFormat(2, -1)
    with pytest.raises(ValueError):
        QFormat(2, 1)  # width 3 < 4
    with pytest.raises(ValueError):
        QFormat(30, 10)  # width 40 > 32
    QFormat(1, 3)  # width 4, smallest allowed
    QFormat(16, 16)  # width 32, largest allowed


def test_fixedpoint_value_and_range():
    assert FixedPoint(128, Q5_7).value == 1.0
    assert FixedPoint(-2048, Q5_7).value == -16.0
    assert FixedPoint(1, Q1_9).value == pytest.approx(1 / 512)
    with pytest.raises(ValueError):
        FixedPoint(2048, Q5_7)
    with pytest.raises(ValueError):
        FixedPoint(-2049, Q5_7)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------


def test_from_real_examples():
    assert from_real(0.0, Q5_7).raw == 0
    assert from_real(1.0, Q5_7).raw == 128
    assert from_real(-1.0, Q5_7).raw == -128
    # saturation at the positive rail
    assert from_real(1e9, Q5_7).raw == 2047
    assert from_real(-1e9, Q5_7).raw == -2048
    assert from_real(15.9921875, Q5_7).raw == 2047  # largest representable
    # truncate mode floors toward -inf
    assert from_real(0.999, Q5_7, rounding="truncate").raw == 127
    assert from_real(-0.001, Q5_7, rounding="truncate").raw == -1


def test_from_real_half_even():
    # 0.5 * 512 = 256 exactly; 1/1024 steps land on .5 boundaries
    fmt = QFormat(2, 2)  # scale 4: x*4 ties at multiples of 0.125
    assert from_real(0.125, fmt).raw == 0   # 0.5 -> even 0
    assert from_real(0.375, fmt).raw == 2   # 1.5 -> even 2
    assert from_real(-0.125, fmt).raw == 0  # -0.5 -> even 0


@given(
    st.floats(min_value=-40.0, max_value=40.0, allow_nan=False),
    st.sampled_from([Q5_7, Q1_9, Q4_8]),
    st.sampled_from(["nearest-even", "truncate"]),
)
def test_from_real_matches_rational_oracle(x, fmt, rounding):
    assert from_real(x, fmt, rounding=rounding).raw == oracle_quantize(x, fmt, rounding)


@given(st.integers(min_value=-2048, max_value=2047))
def test_round_trip_representable(raw):
    """Values on the Q5.7 grid survive a dequantize/quantize round trip."""
    x = raw / Q5_7.scale
    assert from_real(x, Q5_7).raw == raw
    assert to_real(FixedPoint(raw, Q5_7)) == x


def test_quantize_array_matches_scalar(rng):
    xs = rng.uniform(-20, 20, size=257)
    for rounding in ("nearest-even", "truncate"):
        raws = quantize_array(xs, Q5_7, rounding=rounding)
        assert raws.dtype == np.int64
        for x, r in zip(xs, raws):
            assert r == from_real(float(x), Q5_7, rounding=rounding).raw
    back = dequantize_array(raws, Q5_7)
    assert np.allclose(back, raws / 128.0)


def test_quantization_error_bound(rng):
    """Nearest rounding is within half an LSB for in-range values."""
    xs = rng.uniform(-15.9, 15.9, size=1000)
    raws = quantize_array(xs, Q5_7)
    assert np.max(np.abs(raws / 128.0 - xs)) <= 0.5 / 128 + 1e-12


# ---------------------------------------------------------------------------
# saturating addition
# ---------------------------------------------------------------------------


def test_add_sat_examples():
    a = FixedPoint(100, Q5_7)
    b = FixedPoint(28, Q5_7)
    assert add_sat(a, b).raw == 128
    assert add_sat(FixedPoint(2047, Q5_7), FixedPoint(1, Q5_7)).raw == 2047
    assert add_sat(FixedPoint(-2048, Q5_7), FixedPoint(-1, Q5_7)).raw == -2048
    with pytest.raises(ValueError):
        add_sat(FixedPoint(0, Q5_7), FixedPoint(0, Q1_9))


@given(
    st.integers(min_value=-2048, max_value=2047),
    st.integers(min_value=-2048, max_value=2047),
)
def test_add_sat_matches_wide_integer_oracle(a, b):
    got = add_sat(FixedPoint(a, Q5_7), FixedPoint(b, Q5_7)).raw
    assert got == oracle_add_sat(a, b, Q5_7)
    # commutativity and closure
    assert got == add_sat(FixedPoint(b, Q5_7), FixedPoint(a, Q5_7)).raw
    assert Q5_7.raw_min <= got <= Q5_7.raw_max


def test_add_sat_array_matches_scalar(rng):
    a = rng.integers(-2048, 2048, size=300)
    b = rng.integers(-2048, 2048, size=300)
    got = add_sat_array(a, b, Q5_7)
    want = [oracle_add_sat(int(x), int(y), Q5_7) for x, y in zip(a, b)]
    assert got.tolist() == want


# ---------------------------------------------------------------------------
# the single multiply: scalar_mul_shift
# ---------------------------------------------------------------------------


def test_scalar_mul_shift_examples():
    # 0.5 (Q1.9) * 0.125 (Q1.9) = 0.0625 -> Q5.7 raw 8
    assert scalar_mul_shift(FixedPoint(256, Q1_9), FixedPoint(64, Q1_9), Q5_7).raw == 8
    # -0.25 * 0.5 = -0.125 -> Q5.7 raw -16
    assert scalar_mul_shift(FixedPoint(-128, Q1_9), FixedPoint(256, Q1_9), Q5_7).raw == -16
    # tiny negative products floor away from zero (arithmetic shift semantics)
    # -1/512 * 1/512 scaled to Q5.7 floors to -1, not 0
    assert scalar_mul_shift(FixedPoint(-1, Q1_9), FixedPoint(1, Q1_9), Q5_7).raw == -1
    assert scalar_mul_shift(FixedPoint(1, Q1_9), FixedPoint(1, Q1_9), Q5_7).raw == 0


def test_scalar_mul_shift_bulk_against_oracle():
    """1e5 random raw pairs agree exactly with the exact-rational oracle."""
    rng = np.random.default_rng(7)
    d = rng.integers(Q1_9.raw_min, Q1_9.raw_max + 1, size=100_000)
    lr = rng.integers(Q1_9.raw_min, Q1_9.raw_max + 1, size=100_000)
    for i in range(100_000):
        di, li = int(d[i]), int(lr[i])
        got = scalar_mul_shift(FixedPoint(di, Q1_9), FixedPoint(li, Q1_9), Q5_7).raw
        want = oracle_mul_shift(di, Q1_9, li, Q1_9, Q5_7)
        assert got == want, (di, li, got, want)


@given(
    st.integers(min_value=-512, max_value=511),
    st.integers(min_value=-512, max_value=511),
    st.sampled_from([Q5_7, Q1_9, Q4_8]),
)
def test_scalar_mul_shift_property(d_raw, lr_raw, out_fmt):
    got = scalar_mul_shift(FixedPoint(d_raw, Q1_9), FixedPoint(lr_raw, Q1_9), out_fmt)
    assert got.raw == oracle_mul_shift(d_raw, Q1_9, lr_raw, Q1_9, out_fmt)
    assert got.format == out_fmt


def test_scalar_mul_shift_widening_out_format():
    """Output format with more fractional bits than the product is a left shift."""
    fmt_wide = QFormat(2, 22)
    got = scalar_mul_shift(FixedPoint(3, Q1_9), FixedPoint(5, Q1_9), fmt_wide)
    assert got.raw == oracle_mul_shift(3, Q1_9, 5, Q1_9, fmt_wide)
    # 3/512 * 5/512 = 15 / 2^18; at 22 frac bits the raw is exactly 15 << 4
    assert got.raw == 15 << 4


# ---------------------------------------------------------------------------
# multiplication audit
# ---------------------------------------------------------------------------


def test_audit_counts_int_and_float():
    reset_audit()
    assert mul_count_audit() == 0
    scalar_mul_shift(FixedPoint(10, Q1_9), FixedPoint(20, Q1_9), Q5_7)
    scalar_mul_shift(FixedPoint(1, Q1_9), FixedPoint(2, Q1_9), Q5_7)
    counts = audit_counts()
    assert counts["int_mul"] == 2
    assert counts["float_mul"] == 0
    count_float_mul(5)
    assert audit_counts()["float_mul"] == 5
    assert mul_count_audit() == 7
    reset_audit()
    assert audit_counts() == {"int_mul": 0, "float_mul": 0}


# ---------------------------------------------------------------------------
# saturating cumulative sums (vectorized kernel used by the simulators)
# ---------------------------------------------------------------------------


def oracle_sat_cumsum_row(row, fmt):
    acc = 0
    out = []
    for v in row:
        acc = max(fmt.raw_min, min(fmt.raw_max, acc + int(v)))
        out.append(acc)
    return out


@settings(max_examples=200)
@given(
    st.lists(
        st.lists(st.integers(min_value=-2048, max_value=2047), min_size=1, max_size=12),
        min_size=1,
        max_size=6,
    ).filter(lambda rows: len({len(r) for r in rows}) == 1)
)
def test_saturating_cumsum_matches_sequential(rows):
    mat = np.array(rows, dtype=np.int64)
    got = saturating_cumsum(mat, Q5_7)
    want = [oracle_sat_cumsum_row(r, Q5_7) for r in rows]
    assert got.tolist() == want


def test_saturating_cumsum_forced_overflow():
    # a row that pins to +max then swings to the floor; plain cumsum would differ
    row = np.array([[2000, 2000, -4000, -4000, 3000]], dtype=np.int64)
    got = saturating_cumsum(row, Q5_7)
    assert got.tolist() == [oracle_sat_cumsum_row(row[0], Q5_7)]
    plain = np.cumsum(row[0])
    assert got[0].tolist() != np.clip(plain, -2048, 2047).tolist()


def test_saturating_cumsum_no_overflow_equals_plain(rng):
    mat = rng.integers(-5, 6, size=(8, 20))
    got = saturating_cumsum(mat, Q5_7)
    assert np.array_equal(got, np.cumsum(mat, axis=1))
