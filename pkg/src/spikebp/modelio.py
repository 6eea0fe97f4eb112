"""Self-describing binary model files.

Layout: a fixed header (magic ``SNNMODEL``, version, mode, t_max, layer
count), the two Q-format descriptors (zeroed in real mode), the layer sizes,
then per non-input layer its weight matrix followed by its threshold vector
— float64 little-endian in real mode, int32 raw values in fixed mode. The
encoding is canonical, so save -> load -> save reproduces the file byte for
byte.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .fixedpoint import QFormat
from .network import Network

__all__ = ["ModelFormatError", "save_model", "load_model", "MODEL_MAGIC", "MODEL_VERSION"]

MODEL_MAGIC = b"SNNMODEL"
MODEL_VERSION = 1
_HEADER = struct.Struct("<8sHBBHH")  # magic, version, mode, reserved, t_max, n_layers
_FORMATS = struct.Struct("<BBBB")  # weight int/frac bits, delta int/frac bits
_MODE_CODE = {"real": 0, "fixed": 1}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}


class ModelFormatError(Exception):
    """A model file is malformed or from an unsupported version."""


def save_model(net: Network, path):
    """Serialize ``net`` to ``path`` atomically (temp file + rename)."""
    fixed = net.mode == "fixed"
    parts = [_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, _MODE_CODE[net.mode], 0, net.t_max, len(net.layer_sizes))]
    if fixed:
        parts.append(
            _FORMATS.pack(
                net.weight_format.int_bits,
                net.weight_format.frac_bits,
                net.delta_format.int_bits,
                net.delta_format.frac_bits,
            )
        )
    else:
        parts.append(_FORMATS.pack(0, 0, 0, 0))
    parts.append(np.asarray(net.layer_sizes, dtype="<u4").tobytes())
    dtype = "<i4" if fixed else "<f8"
    for w, th in zip(net.weights, net.thresholds):
        parts.append(np.ascontiguousarray(w).astype(dtype).tobytes())
        parts.append(np.ascontiguousarray(th).astype(dtype).tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def load_model(path) -> Network:
    """Parse a model file back into a :class:`Network`."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + _FORMATS.size:
        raise ModelFormatError(f"{path}: truncated header")
    magic, version, mode_code, _, t_max, n_layers = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    if mode_code not in _MODE_NAME:
        raise ModelFormatError(f"{path}: unknown mode code {mode_code}")
    mode = _MODE_NAME[mode_code]
    off = _HEADER.size
    w_int, w_frac, d_int, d_frac = _FORMATS.unpack_from(data, off)
    off += _FORMATS.size
    if len(data) < off + 4 * n_layers:
        raise ModelFormatError(f"{path}: truncated layer sizes")
    sizes = np.frombuffer(data, dtype="<u4", count=n_layers, offset=off).astype(int).tolist()
    off += 4 * n_layers

    fixed = mode == "fixed"
    dtype = np.dtype("<i4") if fixed else np.dtype("<f8")
    weights = []
    thresholds = []
    for l in range(1, n_layers):
        n_post, n_pre = sizes[l], sizes[l - 1]
        need = (n_post * n_pre + n_post) * dtype.itemsize
        if len(data) < off + need:
            raise ModelFormatError(f"{path}: truncated layer {l} payload")
        w = np.frombuffer(data, dtype=dtype, count=n_post * n_pre, offset=off).reshape(n_post, n_pre)
        off += n_post * n_pre * dtype.itemsize
        th = np.frombuffer(data, dtype=dtype, count=n_post, offset=off)
        off += n_post * dtype.itemsize
        if fixed:
            weights.append(w.astype(np.int64))
            thresholds.append(th.astype(np.int64))
        else:
            weights.append(w.astype(np.float64))
            thresholds.append(th.astype(np.float64))
    if off != len(data):
        raise ModelFormatError(f"{path}: {len(data) - off} trailing bytes")

    kwargs = {}
    if fixed:
        kwargs = {
            "weight_format": QFormat(w_int, w_frac),
            "delta_format": QFormat(d_int, d_frac),
        }
    return Network(
        layer_sizes=sizes,
        weights=weights,
        thresholds=thresholds,
        t_max=t_max,
        mode=mode,
        **kwargs,
    )
