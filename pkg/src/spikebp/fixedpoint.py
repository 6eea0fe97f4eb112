"""Two's-complement Q-format fixed-point arithmetic for the hardware execution mode.

All hardware-mode numerics run through this module so that the multiplication
audit can certify the training pipeline: the only multiply anywhere is the raw
integer product inside :func:`scalar_mul_shift` (delta x learning rate), which
is immediately downscaled by an arithmetic right shift. Everything else is
addition, comparison, or shifting on raw integers.

Values are stored as plain Python/numpy integers (``raw``) scaled by
``2**frac_bits``. Out-of-range results saturate to the format limits rather
than wrapping.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QFormat",
    "FixedPoint",
    "Q5_7",
    "Q1_9",
    "Q4_8",
    "from_real",
    "to_real",
    "add_sat",
    "scalar_mul_shift",
    "quantize_array",
    "dequantize_array",
    "add_sat_array",
    "saturating_cumsum",
    "reset_audit",
    "mul_count_audit",
    "audit_counts",
    "count_float_mul",
]


@dataclass(frozen=True)
class QFormat:
    """Qm.f format descriptor: ``int_bits`` integer bits (sign included) and
    ``frac_bits`` fraction bits, total width ``int_bits + frac_bits``."""

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1 or self.frac_bits < 0:
            raise ValueError(f"invalid Q format Q{self.int_bits}.{self.frac_bits}")
        if not 4 <= self.width <= 32:
            raise ValueError(f"Q{self.int_bits}.{self.frac_bits}: width {self.width} outside [4, 32]")

    @property
    def width(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    def __str__(self):
        return f"Q{self.int_bits}.{self.frac_bits}"


# The three formats used by the hardware design: 12-bit weights (two variants)
# and 10-bit deltas / learning rate.
Q5_7 = QFormat(5, 7)
Q1_9 = QFormat(1, 9)
Q4_8 = QFormat(4, 8)


@dataclass(frozen=True)
class FixedPoint:
    """A single fixed-point scalar: two's-complement ``raw`` in ``format``."""

    raw: int
    format: QFormat

    def __post_init__(self):
        if not self.format.raw_min <= self.raw <= self.format.raw_max:
            raise ValueError(f"raw {self.raw} outside {self.format} range")

    @property
    def value(self) -> float:
        return self.raw / self.format.scale

    def __str__(self):
        return f"{self.value}({self.format})"


class _AuditCounter:
    """Process-wide multiplication tally. Thread-safe; adds are not counted,
    only multiplies (split by integer vs floating-point operand type)."""

    def __init__(self):
        self._lock = threading.Lock()
        self.int_mul = 0
        self.float_mul = 0

    def reset(self):
        with self._lock:
            self.int_mul = 0
            self.float_mul = 0

    def add_int(self, n=1):
        with self._lock:
            self.int_mul += n

    def add_float(self, n=1):
        with self._lock:
            self.float_mul += n


_AUDIT = _AuditCounter()


def reset_audit():
    """Zero the multiplication counters."""
    _AUDIT.reset()


def mul_count_audit() -> int:
    """Total multiply operations (integer + floating point) since last reset."""
    return _AUDIT.int_mul + _AUDIT.float_mul


def audit_counts() -> dict:
    """Split counts: ``{"int_mul": ..., "float_mul": ...}``."""
    return {"int_mul": _AUDIT.int_mul, "float_mul": _AUDIT.float_mul}


def count_float_mul(n=1):
    """Record floating-point multiplies performed outside this module.

    The real-valued reference mode calls this on its delta x learning-rate
    products so the metrics report comparable counts across modes.
    """
    _AUDIT.add_float(n)


def _saturate(raw: int, fmt: QFormat) -> int:
    if raw > fmt.raw_max:
        return fmt.raw_max
    if raw < fmt.raw_min:
        return fmt.raw_min
    return raw


def from_real(x: float, fmt: QFormat, rounding: str = "nearest-even") -> FixedPoint:
    """Quantize a real value into ``fmt``, saturating out-of-range inputs.

    ``rounding`` is ``"nearest-even"`` (default) or ``"truncate"`` (toward
    minus infinity on the scaled value).
    """
    scaled = x * fmt.scale
    if rounding == "nearest-even":
        raw = int(np.rint(scaled))
    elif rounding == "truncate":
        raw = int(np.floor(scaled))
    else:
        raise ValueError(f"unknown rounding mode {rounding!r}")
    return FixedPoint(_saturate(raw, fmt), fmt)


def to_real(a: FixedPoint) -> float:
    return a.value


def add_sat(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    """Saturating two's-complement addition. Formats must match."""
    if a.format != b.format:
        raise ValueError(f"format mismatch: {a.format} vs {b.format}")
    return FixedPoint(_saturate(a.raw + b.raw, a.format), a.format)


def scalar_mul_shift(delta: FixedPoint, lr: FixedPoint, out_fmt: QFormat) -> FixedPoint:
    """The single permitted multiplication: raw product of ``delta`` and ``lr``
    downscaled to ``out_fmt`` by an arithmetic right shift (floor), saturated.

    The shift amount is ``delta.frac + lr.frac - out_fmt.frac``; a negative
    amount becomes a left shift (exact).
    """
    prod = delta.raw * lr.raw
    _AUDIT.add_int()
    shift = delta.format.frac_bits + lr.format.frac_bits - out_fmt.frac_bits
    if shift >= 0:
        raw = prod >> shift
    else:
        raw = prod << -shift
    return FixedPoint(_saturate(raw, out_fmt), out_fmt)


# ---------------------------------------------------------------------------
# Array helpers: raw int64 vectors/matrices carrying the same semantics as the
# scalar ops above. Used by the fixed-mode network kernels, where per-element
# FixedPoint objects would be too slow.
# ---------------------------------------------------------------------------

def quantize_array(x: np.ndarray, fmt: QFormat, rounding: str = "nearest-even") -> np.ndarray:
    """Elementwise :func:`from_real` returning an int64 raw array."""
    scaled = np.asarray(x, dtype=np.float64) * fmt.scale
    if rounding == "nearest-even":
        raw = np.rint(scaled)
    elif rounding == "truncate":
        raw = np.floor(scaled)
    else:
        raise ValueError(f"unknown rounding mode {rounding!r}")
    return np.clip(raw, fmt.raw_min, fmt.raw_max).astype(np.int64)


def dequantize_array(raw: np.ndarray, fmt: QFormat) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / fmt.scale


def add_sat_array(a: np.ndarray, b, fmt: QFormat) -> np.ndarray:
    """Elementwise saturating add on raw arrays (no overflow at int64)."""
    return np.clip(a + b, fmt.raw_min, fmt.raw_max)


def saturating_cumsum(rows: np.ndarray, fmt: QFormat) -> np.ndarray:
    """Sequential saturating accumulation along axis 1 of a raw int64 matrix.

    Equivalent to folding :func:`add_sat` left-to-right over each row starting
    from zero. The plain cumulative sum is used wherever no intermediate value
    leaves the representable range (there it is bit-identical); rows that do
    saturate are recomputed element by element.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cum = np.cumsum(rows, axis=1)
    if cum.size == 0:
        return cum
    overflow = (cum.max(axis=1) > fmt.raw_max) | (cum.min(axis=1) < fmt.raw_min)
    for r in np.nonzero(overflow)[0]:
        acc = 0
        row = rows[r]
        out = cum[r]
        for k in range(row.shape[0]):
            acc = _saturate(acc + int(row[k]), fmt)
            out[k] = acc
    return cum
