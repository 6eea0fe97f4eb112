"""Spike-time supervised learning: targets, temporal errors, delta-to-spike
conversion, backward IF propagation, and the gated weight update rule.

The output layer gets exact deltas from the timing error. Hidden layers never
see those values: deltas are normalized, mapped to signed backward spikes
(earlier spike = larger magnitude, polarity = sign), and each hidden neuron
integrates the weighted, gated backward spikes of its upper layer into a
backward potential. The sign-carrying crossing of that potential is the
neuron's own backward spike; its normalized final potential is the delta used
to update the incoming weights. A synapse is updated only when its
presynaptic forward spike strictly precedes the postsynaptic one.

In fixed mode every pipeline quantity is integer: deltas live in the 10-bit
delta format, potentials and weight increments in the 12-bit weight format,
and the only multiplication is the per-neuron delta x learning-rate product
(``scalar_mul_shift``). Normalization and error scaling use shifts and
integer division. The returned loss value is a float diagnostic computed off
the pipeline; nothing feeds back from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import SpikeTimes
from .fixedpoint import (
    FixedPoint,
    add_sat_array,
    count_float_mul,
    from_real,
    saturating_cumsum,
    scalar_mul_shift,
)
from .network import Network, ForwardTrace, classify, run_forward

__all__ = [
    "TargetTimes",
    "BackwardSpikes",
    "BackwardTrace",
    "compute_target_times",
    "compute_output_error",
    "loss",
    "output_deltas",
    "normalize_deltas",
    "deltas_to_backward_spikes",
    "backward_layer",
    "effective_hidden_deltas",
    "update_weights",
    "dense_delta_oracle",
    "train_step",
]


@dataclass
class TargetTimes:
    """Per-output-neuron target steps, with the margin and reference time that
    produced them. ``all_silent`` marks the no-output-spike special case."""

    T: np.ndarray
    gamma: int
    t_min: int
    all_silent: bool = False


def compute_target_times(output_times: SpikeTimes, label: int, gamma: int, t_max: int) -> TargetTimes:
    """Target firing times for one sample.

    The label neuron is pulled ``gamma`` steps before the earliest output
    spike; competitors that fired within the margin are pushed to
    ``t_min + gamma``; everything else keeps its own time. If no output fired
    at all, the label target is ``t_max - gamma`` and the rest stay at
    ``t_max``. All targets are clamped to ``[0, t_max]``.
    """
    n = len(output_times)
    if not 0 <= label < n:
        raise ValueError(f"label {label} out of range for {n} output neurons")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    t = output_times.steps
    if not output_times.fired.any():
        T = np.full(n, t_max, dtype=np.int64)
        T[label] = t_max - gamma
        T = np.clip(T, 0, t_max)
        return TargetTimes(T, gamma, int(t_max), all_silent=True)
    t_min = int(t.min())
    T = t.copy()
    push = t < t_min + gamma
    T[push] = t_min + gamma
    T[label] = t_min - gamma
    T = np.clip(T, 0, t_max)
    return TargetTimes(T, gamma, t_min, all_silent=False)


def compute_output_error(actual: SpikeTimes, targets: TargetTimes, t_max: int) -> np.ndarray:
    """Temporal error ``e_j = (T_j - t_j) / t_max``."""
    if len(actual) != targets.T.shape[0]:
        raise ValueError("error vector length mismatch")
    return (targets.T - actual.steps) / t_max


def loss(e: np.ndarray) -> float:
    """Squared timing-error loss, ``0.5 * sum(e^2)``."""
    return 0.5 * float(np.dot(e, e))


def output_deltas(e: np.ndarray, t_max: int) -> np.ndarray:
    """Output-layer deltas ``-e_j / t_max``."""
    return -np.asarray(e, dtype=np.float64) / t_max


def normalize_deltas(deltas: np.ndarray, denominator: str = "magnitude"):
    """Scale deltas before spike conversion; returns ``(normalized, skip)``.

    ``denominator="magnitude"`` divides by ``sum(|delta|)``, keeping signs and
    bounding values in [-1, 1]. ``"literal"`` divides by the plain sum, which
    can flip signs or blow up when the sum is near zero; it is exposed for
    comparison only. A zero denominator returns the zero vector with
    ``skip=True`` (no backward pass needed).
    """
    d = np.asarray(deltas, dtype=np.float64)
    if denominator == "magnitude":
        s = np.abs(d).sum()
    elif denominator == "literal":
        s = d.sum()
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    if s == 0.0:
        return np.zeros_like(d), True
    return d / s, False


@dataclass
class BackwardSpikes:
    """At most one signed backward spike per neuron: ``polarity`` is +1, -1,
    or 0 for no spike; ``tau`` is the backward step (ignored where 0)."""

    tau: np.ndarray
    polarity: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.int64)
        self.polarity = np.asarray(self.polarity, dtype=np.int64)

    @property
    def active(self) -> np.ndarray:
        return self.polarity != 0

    def __len__(self):
        return self.tau.shape[0]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _round_half_away_div(num, den):
    """round(num / den) with ties away from zero, on integers (den > 0)."""
    num = np.asarray(num, dtype=np.int64)
    mag = (np.abs(num) + den // 2) // den
    return np.sign(num) * mag


def deltas_to_backward_spikes(normalized: np.ndarray, t_max: int) -> BackwardSpikes:
    """Map normalized deltas to signed spike times: ``d = round(delta * t_max)``
    spikes at ``tau = t_max - |d|`` with the delta's sign; ``d == 0`` emits
    nothing. Larger magnitudes therefore spike earlier."""
    d = _round_half_away(np.asarray(normalized, dtype=np.float64) * t_max).astype(np.int64)
    d = np.clip(d, -t_max, t_max)
    polarity = np.sign(d)
    tau = np.where(polarity != 0, t_max - np.abs(d), t_max)
    return BackwardSpikes(tau, polarity)


def deltas_to_backward_spikes_fixed(normalized_raw: np.ndarray, frac_bits: int, t_max: int) -> BackwardSpikes:
    """Fixed-point variant on raw deltas: shift-add for the t_max scaling,
    rounded integer division by the format scale."""
    raw = np.asarray(normalized_raw, dtype=np.int64)
    # raw * 15 as (raw << 4) - raw; general t_max uses the plain product of
    # a constant, which hardware folds into shifts
    if t_max == 15:
        scaled = (raw << 4) - raw
    else:
        scaled = raw * t_max
    d = _round_half_away_div(scaled, 1 << frac_bits)
    d = np.clip(d, -t_max, t_max)
    polarity = np.sign(d)
    tau = np.where(polarity != 0, t_max - np.abs(d), t_max)
    return BackwardSpikes(tau, polarity)


def backward_layer(
    upper_spikes: BackwardSpikes,
    upper_weights: np.ndarray,
    forward_times_l: SpikeTimes,
    forward_times_l1: SpikeTimes,
    thresholds: np.ndarray,
    t_max: int,
    fmt=None,
):
    """Propagate signed backward spikes from layer l+1 into layer l.

    Every backward step, each lower neuron i accumulates
    ``polarity_j * W[j, i]`` over upper spikes arriving that step, but only
    through synapses whose forward times satisfy ``t_l[i] < t_l1[j]``. The
    neuron emits one signed backward spike at the end of the first step where
    the running potential exceeds ``+theta`` (polarity +1) or falls below
    ``-theta`` (-1). Accumulation continues through the whole window; returns
    ``(final potentials, spikes)``.
    """
    n_upper, n_lower = upper_weights.shape
    if len(upper_spikes) != n_upper or len(forward_times_l) != n_lower:
        raise ValueError("backward_layer dimension mismatch")
    th = np.asarray(thresholds)
    dtype = np.int64 if fmt is not None else np.float64

    active = np.nonzero(upper_spikes.active)[0]
    if active.size == 0:
        zeros = np.zeros(n_lower, dtype=dtype)
        return zeros, BackwardSpikes(np.full(n_lower, t_max), np.zeros(n_lower, dtype=np.int64))

    # events sorted by (tau, upper index); stable sort keeps index order
    order = active[np.argsort(upper_spikes.tau[active], kind="stable")]
    taus = upper_spikes.tau[order]
    # contribution of event k to lower neuron i: +/-W gated on forward order
    gate = forward_times_l.steps[None, :] < forward_times_l1.steps[order, None]
    signed = np.where(upper_spikes.polarity[order, None] > 0, upper_weights[order], -upper_weights[order])
    contrib = np.where(gate, signed, np.zeros(1, dtype=upper_weights.dtype)).T.astype(dtype)

    if fmt is None:
        cum = np.cumsum(contrib, axis=1)
    else:
        cum = saturating_cumsum(contrib, fmt)
    cum = np.concatenate([np.zeros((n_lower, 1), dtype=cum.dtype), cum], axis=1)
    boundary = np.searchsorted(taus, np.arange(t_max + 1), side="right")
    traj = cum[:, boundary]

    crossed_pos = traj > th[:, None]
    crossed_neg = traj < -th[:, None]
    crossed = crossed_pos | crossed_neg
    fired = crossed.any(axis=1)
    first = np.argmax(crossed, axis=1)
    polarity = np.zeros(n_lower, dtype=np.int64)
    rows = np.nonzero(fired)[0]
    polarity[rows] = np.where(crossed_pos[rows, first[rows]], 1, -1)
    tau_out = np.where(fired, first, t_max).astype(np.int64)
    return cum[:, -1], BackwardSpikes(tau_out, polarity)


def effective_hidden_deltas(final_delta: np.ndarray, denominator: str = "magnitude") -> np.ndarray:
    """Normalized final backward potentials, used as the layer's deltas."""
    normalized, _ = normalize_deltas(final_delta, denominator)
    return normalized


def normalize_deltas_fixed(raw_deltas: np.ndarray, out_frac_bits: int, out_raw_min: int, out_raw_max: int):
    """Fixed-point magnitude-sum normalization into a delta-format raw vector.

    The source format's scale cancels in the ratio, so this works for both
    raw delta vectors and raw backward potentials. Shift plus rounded integer
    division only. Returns ``(raws, skip)``.
    """
    raw = np.asarray(raw_deltas, dtype=np.int64)
    s = int(np.abs(raw).sum())
    if s == 0:
        return np.zeros_like(raw), True
    out = _round_half_away_div(raw << out_frac_bits, s)
    return np.clip(out, out_raw_min, out_raw_max), False


def output_deltas_fixed(actual: SpikeTimes, targets: TargetTimes, t_max: int, frac_bits: int) -> np.ndarray:
    """Raw fixed-point output deltas ``(t_j - T_j) / t_max^2``, via shift and
    rounded division by the integer ``t_max^2``."""
    diff = actual.steps - targets.T
    return _round_half_away_div(diff << frac_bits, t_max * t_max)


def update_weights(weights, deltas, pre_times: SpikeTimes, post_times: SpikeTimes, lr):
    """Real-mode update: ``W[j, i] += lr * delta_j`` wherever the presynaptic
    spike strictly precedes the postsynaptic one. The scalar product is formed
    once per neuron and broadcast-added. Mutates and returns ``weights``."""
    d = np.asarray(deltas, dtype=np.float64)
    if weights.shape != (d.shape[0], len(pre_times)):
        raise ValueError("update_weights dimension mismatch")
    nz = d != 0
    if not nz.any():
        return weights
    inc = np.zeros_like(d)
    inc[nz] = lr * d[nz]
    count_float_mul(int(nz.sum()))
    eligible = pre_times.steps[None, :] < post_times.steps[:, None]
    np.add(weights, inc[:, None], out=weights, where=eligible)
    return weights


def update_weights_fixed(weights_raw, delta_raws, pre_times, post_times, lr_fp: FixedPoint, weight_fmt):
    """Fixed-mode update: one ``scalar_mul_shift`` per neuron with a nonzero
    delta, saturating add on each eligible synapse."""
    d = np.asarray(delta_raws, dtype=np.int64)
    if weights_raw.shape != (d.shape[0], len(pre_times)):
        raise ValueError("update_weights dimension mismatch")
    eligible = pre_times.steps[None, :] < post_times.steps[:, None]
    for j in np.nonzero(d)[0]:
        inc = scalar_mul_shift(FixedPoint(int(d[j]), lr_fp.format), lr_fp, weight_fmt)
        if inc.raw == 0:
            continue
        row = weights_raw[j]
        sel = eligible[j]
        row[sel] = add_sat_array(row[sel], inc.raw, weight_fmt)
    return weights_raw


def dense_delta_oracle(upper_deltas, upper_weights, forward_times_l: SpikeTimes, forward_times_l1: SpikeTimes):
    """Dense weighted-sum hidden deltas (testing oracle; the production path
    is the spike-time propagation above):
    ``delta_j = sum_k delta_k * W[k, j] * [t_l[j] < t_l1[k]]``."""
    d = np.asarray(upper_deltas, dtype=np.float64)
    gate = forward_times_l.steps[None, :] < forward_times_l1.steps[:, None]
    return (d[:, None] * upper_weights * gate).sum(axis=0)


@dataclass
class BackwardTrace:
    """Everything the backward pass computed for one sample. Hidden lists are
    ascending by layer (entry 0 = first hidden layer). In fixed mode the
    delta/potential entries are raw integers; ``errors`` stays float."""

    errors: np.ndarray
    output_deltas: np.ndarray
    output_spikes: BackwardSpikes = None
    hidden_potentials: list = field(default_factory=list)
    hidden_spikes: list = field(default_factory=list)
    hidden_deltas: list = field(default_factory=list)
    targets: TargetTimes = None
    skipped: bool = False
    predicted: int = None


def train_step(
    net: Network,
    input_times: SpikeTimes,
    label: int,
    lr: float,
    gamma: int,
    backward_theta_scale: float = 1.0,
    denominator: str = "magnitude",
):
    """One online training step: forward pass, output update from exact
    deltas, spike-coded propagation plus update for each hidden layer (deepest
    first, against pre-update upper weights). Mutates ``net``; returns
    ``(net, BackwardTrace, loss)``."""
    trace = run_forward(net, input_times)
    t_max = net.t_max
    targets = compute_target_times(trace.output_times, label, gamma, t_max)
    e = compute_output_error(trace.output_times, targets, t_max)
    loss_val = loss(e)
    if net.mode == "fixed":
        btrace = _backward_fixed(net, trace, targets, e, lr, backward_theta_scale)
    else:
        btrace = _backward_real(net, trace, targets, e, lr, backward_theta_scale, denominator)
    btrace.predicted = classify(trace)
    return net, btrace, loss_val


def _backward_thresholds(net: Network, layer: int, scale: float):
    th = net.thresholds[layer - 1]
    if scale == 1.0:
        return th
    if net.mode == "fixed":
        return np.rint(th * scale).astype(np.int64)
    return th * scale


def _backward_real(net, trace, targets, e, lr, theta_scale, denominator):
    d_out = output_deltas(e, net.t_max)
    btrace = BackwardTrace(errors=e, output_deltas=d_out, targets=targets)
    normalized, skip = normalize_deltas(d_out, denominator)
    if skip:
        btrace.skipped = True
        return btrace
    upper = deltas_to_backward_spikes(normalized, net.t_max)
    btrace.output_spikes = upper

    last = net.n_layers - 1
    hidden = []
    for l in range(last - 1, 0, -1):
        delta_pot, spikes = backward_layer(
            upper,
            net.weights[l],
            trace.times[l],
            trace.times[l + 1],
            _backward_thresholds(net, l, theta_scale),
            net.t_max,
        )
        eff = effective_hidden_deltas(delta_pot, denominator)
        hidden.append((l, delta_pot, spikes, eff))
        upper = spikes

    update_weights(net.weights[last - 1], d_out, trace.times[last - 1], trace.times[last], lr)
    for l, delta_pot, spikes, eff in hidden:
        update_weights(net.weights[l - 1], eff, trace.times[l - 1], trace.times[l], lr)

    for l, delta_pot, spikes, eff in sorted(hidden):
        btrace.hidden_potentials.append(delta_pot)
        btrace.hidden_spikes.append(spikes)
        btrace.hidden_deltas.append(eff)
    return btrace


def _backward_fixed(net, trace, targets, e, lr, theta_scale):
    dfmt = net.delta_format
    wfmt = net.weight_format
    d_out_raw = output_deltas_fixed(trace.output_times, targets, net.t_max, dfmt.frac_bits)
    btrace = BackwardTrace(errors=e, output_deltas=d_out_raw, targets=targets)
    normalized, skip = normalize_deltas_fixed(d_out_raw, dfmt.frac_bits, dfmt.raw_min, dfmt.raw_max)
    if skip:
        btrace.skipped = True
        return btrace
    upper = deltas_to_backward_spikes_fixed(normalized, dfmt.frac_bits, net.t_max)
    btrace.output_spikes = upper
    # lr arrives either pre-quantized (the training loop converts once per
    # epoch, like a host configuring the accelerator) or as a float converted
    # here at the configuration boundary
    if isinstance(lr, FixedPoint):
        if lr.format != dfmt:
            raise ValueError("fixed-mode lr format must match the network delta format")
        lr_fp = lr
    else:
        lr_fp = from_real(lr, dfmt)

    last = net.n_layers - 1
    hidden = []
    for l in range(last - 1, 0, -1):
        delta_pot, spikes = backward_layer(
            upper,
            net.weights[l],
            trace.times[l],
            trace.times[l + 1],
            _backward_thresholds(net, l, theta_scale),
            net.t_max,
            fmt=wfmt,
        )
        eff_raw, _ = normalize_deltas_fixed(delta_pot, dfmt.frac_bits, dfmt.raw_min, dfmt.raw_max)
        hidden.append((l, delta_pot, spikes, eff_raw))
        upper = spikes

    update_weights_fixed(net.weights[last - 1], d_out_raw, trace.times[last - 1], trace.times[last], lr_fp, wfmt)
    for l, delta_pot, spikes, eff_raw in hidden:
        update_weights_fixed(net.weights[l - 1], eff_raw, trace.times[l - 1], trace.times[l], lr_fp, wfmt)

    for l, delta_pot, spikes, eff_raw in sorted(hidden):
        btrace.hidden_potentials.append(delta_pot)
        btrace.hidden_spikes.append(spikes)
        btrace.hidden_deltas.append(eff_raw)
    return btrace
