"""Analytical cost model of the accelerator: per-layer cycle counts at a
given input parallelism, throughput arithmetic at a given clock, real-to-
fixed network quantization, and bit-exact BRAM weight-image export.

Weights are stored four to a 48-bit memory word so one address fetch feeds
four synapse lanes; cycle counts follow directly as ``ceil(fan_in / 4)``.
Clock frequencies are configuration inputs echoed into reports — nothing
here estimates timing closure, resources, or power. The throughput report
prints its formulas next to the numbers so a reader can re-derive or
re-parameterize them.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fixedpoint import Q1_9, Q5_7, QFormat, quantize_array
from .network import Network

__all__ = [
    "HwConfig",
    "layer_cycles",
    "network_cycles",
    "backward_layer_cycles",
    "ThroughputReport",
    "throughput_report",
    "QuantizationReport",
    "quantize_network",
    "BramImage",
    "pack_weight_words",
    "unpack_weight_words",
    "export_bram",
    "write_bram_binary",
    "read_bram_binary",
    "write_bram_hex",
    "read_bram_hex",
    "export_bram_files",
    "import_bram_dir",
    "BramFormatError",
]

WINDOW_STEPS = 16  # 4-bit forward timestamps: steps 0..15

BRAM_MAGIC = b"SNNBRAM1"
_BRAM_HEADER = struct.Struct("<8sHHI")  # magic, layer, neuron, word count
_WEIGHT_BITS = 12
_WEIGHTS_PER_WORD = 4


class BramFormatError(Exception):
    """A BRAM image file is malformed."""


@dataclass(frozen=True)
class HwConfig:
    """Accelerator parameters: synapse lanes per cycle, clock, timestamp
    widths (4-bit forward, 5-bit signed backward), and the weight format."""

    parallelism: int = 4
    fmax_hz: float = 142.45e6
    forward_ts_bits: int = 4
    backward_ts_bits: int = 5
    weight_format: QFormat = Q5_7
    delta_format: QFormat = Q1_9

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not self.fmax_hz > 0:
            raise ValueError("fmax_hz must be positive")


def layer_cycles(fan_in: int, parallelism: int = 4) -> int:
    """Forward cycles for one layer: ``ceil(fan_in / parallelism)``."""
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    return -(-fan_in // parallelism)


def network_cycles(layer_sizes, parallelism: int = 4) -> int:
    """Total forward cycles per time step: sum over non-input layers."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output layers")
    return sum(layer_cycles(fan_in, parallelism) for fan_in in layer_sizes[:-1])


def backward_layer_cycles(fan_in: int, parallelism: int = 4):
    """Backward update cycles for one layer, modeled as ``ceil(fan_in/p)``
    clamped to the 3-5 range; returns ``(low, modeled, high)``."""
    modeled = min(max(layer_cycles(fan_in, parallelism), 3), 5)
    return 3, modeled, 5


@dataclass
class ThroughputReport:
    layer_sizes: list
    parallelism: int
    fmax_hz: float
    per_layer_cycles: list
    cycles_per_sample: int
    window_steps: int
    samples_per_sec: float
    feaps: float

    def __str__(self):
        lines = [
            f"architecture {'-'.join(map(str, self.layer_sizes))}, "
            f"parallelism {self.parallelism}, fmax {self.fmax_hz / 1e6:.2f} MHz",
        ]
        for l, cyc in enumerate(self.per_layer_cycles, start=1):
            fan_in = self.layer_sizes[l - 1]
            lo, mid, hi = backward_layer_cycles(fan_in, self.parallelism)
            lines.append(
                f"  layer {l}: fan-in {fan_in:4d} -> {cyc:3d} forward cycles"
                f" (backward update {lo}-{hi}, modeled {mid})"
            )
        lines += [
            f"forward cycles/sample = sum ceil(fan_in/parallelism) = {self.cycles_per_sample}",
            f"samples/s = fmax / (cycles x window) = {self.fmax_hz:.0f} / "
            f"({self.cycles_per_sample} x {self.window_steps}) = {self.samples_per_sec:.1f}",
            f"FeaPS = samples/s x input features = {self.samples_per_sec:.1f} x "
            f"{self.layer_sizes[0]} = {self.feaps:.3e}",
        ]
        return "\n".join(lines)


def throughput_report(layer_sizes, hw: HwConfig, window_steps: int = WINDOW_STEPS) -> ThroughputReport:
    """Cycle and rate arithmetic for an architecture under ``hw``. Each
    sample occupies the pipeline for ``network_cycles x window_steps``
    clocks; features/s is derived as samples/s times the input width."""
    per_layer = [layer_cycles(f, hw.parallelism) for f in layer_sizes[:-1]]
    total = sum(per_layer)
    sps = hw.fmax_hz / (total * window_steps)
    return ThroughputReport(
        layer_sizes=list(layer_sizes),
        parallelism=hw.parallelism,
        fmax_hz=hw.fmax_hz,
        per_layer_cycles=per_layer,
        cycles_per_sample=total,
        window_steps=window_steps,
        samples_per_sec=sps,
        feaps=sps * layer_sizes[0],
    )


@dataclass
class QuantizationReport:
    max_abs_error: float
    mean_abs_error: float
    saturated: int

    def __str__(self):
        return (
            f"quantization error: max {self.max_abs_error:.3e}, "
            f"mean {self.mean_abs_error:.3e}, saturated values {self.saturated}"
        )


def quantize_network(
    net: Network,
    weight_format: QFormat = Q5_7,
    delta_format: QFormat = Q1_9,
    rounding: str = "nearest-even",
):
    """Convert a real-mode network to fixed mode; returns
    ``(fixed net, QuantizationReport)`` where the report covers weights and
    thresholds together."""
    if net.mode != "real":
        raise ValueError("quantize_network expects a real-mode network")
    errs = []
    saturated = 0
    raw_ws = []
    raw_ths = []
    for w in net.weights:
        raw = quantize_array(w, weight_format, rounding)
        raw_ws.append(raw)
        errs.append(np.abs(w - raw / weight_format.scale).ravel())
        saturated += int((w > weight_format.raw_max / weight_format.scale).sum())
        saturated += int((w < weight_format.raw_min / weight_format.scale).sum())
    for th in net.thresholds:
        raw = quantize_array(th, weight_format, rounding)
        raw_ths.append(raw)
        errs.append(np.abs(th - raw / weight_format.scale).ravel())
        saturated += int((th > weight_format.raw_max / weight_format.scale).sum())
        saturated += int((th < weight_format.raw_min / weight_format.scale).sum())
    all_errs = np.concatenate(errs)
    fixed = Network(
        layer_sizes=list(net.layer_sizes),
        weights=raw_ws,
        thresholds=raw_ths,
        t_max=net.t_max,
        mode="fixed",
        weight_format=weight_format,
        delta_format=delta_format,
    )
    report = QuantizationReport(float(all_errs.max()), float(all_errs.mean()), saturated)
    return fixed, report


@dataclass
class BramImage:
    """One neuron's weight words: 48-bit values packing four 12-bit raws,
    lowest presynaptic index in the least significant 12 bits."""

    layer: int
    neuron: int
    words: np.ndarray
    fan_in: int = None

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.uint64)


def pack_weight_words(raws: np.ndarray) -> np.ndarray:
    """Pack a neuron's raw 12-bit weights into 48-bit words, zero-padding the
    tail slot(s) of the final word."""
    raws = np.asarray(raws, dtype=np.int64)
    n_words = -(-raws.shape[0] // _WEIGHTS_PER_WORD)
    padded = np.zeros(n_words * _WEIGHTS_PER_WORD, dtype=np.int64)
    padded[: raws.shape[0]] = raws
    fields = (padded & 0xFFF).astype(np.uint64).reshape(n_words, _WEIGHTS_PER_WORD)
    words = np.zeros(n_words, dtype=np.uint64)
    for slot in range(_WEIGHTS_PER_WORD):
        words |= fields[:, slot] << np.uint64(_WEIGHT_BITS * slot)
    return words


def unpack_weight_words(words: np.ndarray, fan_in: int) -> np.ndarray:
    """Inverse of :func:`pack_weight_words`: sign-extend each 12-bit field
    and drop the padding beyond ``fan_in``."""
    words = np.asarray(words, dtype=np.uint64)
    fields = np.empty((words.shape[0], _WEIGHTS_PER_WORD), dtype=np.int64)
    for slot in range(_WEIGHTS_PER_WORD):
        fields[:, slot] = ((words >> np.uint64(_WEIGHT_BITS * slot)) & np.uint64(0xFFF)).astype(np.int64)
    flat = fields.reshape(-1)[:fan_in]
    return np.where(flat >= 2048, flat - 4096, flat)


def export_bram(net: Network):
    """Per-neuron weight images for a fixed-mode network, layer index 1-based
    over non-input layers."""
    if net.mode != "fixed":
        raise ValueError("export_bram expects a fixed-mode network (quantize first)")
    images = []
    for l, w in enumerate(net.weights, start=1):
        for j in range(w.shape[0]):
            images.append(BramImage(l, j, pack_weight_words(w[j]), fan_in=w.shape[1]))
    return images


def write_bram_binary(image: BramImage, path):
    """Binary image: 16-byte header (magic, layer, neuron, word count) then
    each 48-bit word as 6 little-endian bytes."""
    payload = b"".join(int(w).to_bytes(6, "little") for w in image.words)
    header = _BRAM_HEADER.pack(BRAM_MAGIC, image.layer, image.neuron, image.words.shape[0])
    Path(path).write_bytes(header + payload)


def read_bram_binary(path) -> BramImage:
    data = Path(path).read_bytes()
    if len(data) < _BRAM_HEADER.size:
        raise BramFormatError(f"{path}: truncated header")
    magic, layer, neuron, count = _BRAM_HEADER.unpack_from(data)
    if magic != BRAM_MAGIC:
        raise BramFormatError(f"{path}: bad magic {magic!r}")
    expected = _BRAM_HEADER.size + 6 * count
    if len(data) != expected:
        raise BramFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    words = [int.from_bytes(data[_BRAM_HEADER.size + 6 * k :][:6], "little") for k in range(count)]
    return BramImage(layer, neuron, np.array(words, dtype=np.uint64))


def write_bram_hex(image: BramImage, path):
    """Memory-init text: one 12-hex-digit word per line, word 0 first."""
    with open(path, "w") as f:
        for w in image.words:
            f.write(f"{int(w):012x}\n")


def read_bram_hex(path) -> np.ndarray:
    words = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if len(line) != 12:
                raise BramFormatError(f"{path}:{lineno}: expected 12 hex digits, got {line!r}")
            words.append(int(line, 16))
    return np.array(words, dtype=np.uint64)


def export_bram_files(net: Network, out_dir):
    """Write binary + hex images for every neuron under ``out_dir``; returns
    the binary paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for image in export_bram(net):
        stem = f"layer{image.layer}_neuron{image.neuron:04d}"
        bin_path = out / f"{stem}.bram"
        write_bram_binary(image, bin_path)
        write_bram_hex(image, out / f"{stem}.hex")
        paths.append(bin_path)
    return paths


def import_bram_dir(out_dir, layer_sizes):
    """Rebuild per-layer raw weight matrices from a directory written by
    :func:`export_bram_files`."""
    out = Path(out_dir)
    images = [read_bram_binary(p) for p in sorted(out.glob("layer*_neuron*.bram"))]
    matrices = []
    for l in range(1, len(layer_sizes)):
        rows = sorted((im for im in images if im.layer == l), key=lambda im: im.neuron)
        if len(rows) != layer_sizes[l]:
            raise BramFormatError(f"layer {l}: expected {layer_sizes[l]} neuron images, found {len(rows)}")
        fan_in = layer_sizes[l - 1]
        matrices.append(np.stack([unpack_weight_words(im.words, fan_in) for im in rows]))
    return matrices
