"""Event-driven forward pass of non-leaky integrate-and-fire layers.

A layer accumulates presynaptic weights as their spikes arrive and fires each
neuron once, at the end of the first step where its potential reaches the
threshold. Potentials are never reset within a sample; silent neurons get a
placeholder spike at ``t_max``. Classification takes the earliest output
spike, falling back to the largest final potential if nothing fired.

The forward pass performs no multiplications in either numeric mode: it is
sums of selected weights, comparisons, and index arithmetic only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import SpikeTimes
from .fixedpoint import QFormat, Q5_7, Q1_9, quantize_array, saturating_cumsum

__all__ = [
    "Network",
    "ForwardTrace",
    "init_network",
    "simulate_layer",
    "run_forward",
    "classify",
    "count_active_synapses",
    "ActiveSynapses",
]


@dataclass
class Network:
    """Feedforward stack of IF layers.

    ``weights[l]`` is the ``[post, pre]`` matrix into layer ``l+1`` of the
    ``layer_sizes`` list. In real mode weights and thresholds are float64; in
    fixed mode they are raw int64 arrays in ``weight_format`` and every
    delta/learning-rate quantity uses ``delta_format``.
    """

    layer_sizes: list
    weights: list
    thresholds: list
    t_max: int
    mode: str = "real"
    weight_format: QFormat = None
    delta_format: QFormat = None

    def __post_init__(self):
        if self.mode not in ("real", "fixed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ValueError("need one weight matrix per non-input layer")
        if len(self.thresholds) != len(self.weights):
            raise ValueError("need one threshold vector per non-input layer")
        for l, w in enumerate(self.weights):
            expect = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if w.shape != expect:
                raise ValueError(f"weight matrix {l} has shape {w.shape}, expected {expect}")
            if self.thresholds[l].shape != (self.layer_sizes[l + 1],):
                raise ValueError(f"threshold vector {l} has wrong shape")
        if self.mode == "fixed":
            if self.weight_format is None:
                self.weight_format = Q5_7
            if self.delta_format is None:
                self.delta_format = Q1_9
        for th in self.thresholds:
            if np.any(np.asarray(th) <= 0):
                raise ValueError("thresholds must be positive")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    def copy(self) -> "Network":
        return Network(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [t.copy() for t in self.thresholds],
            self.t_max,
            self.mode,
            self.weight_format,
            self.delta_format,
        )


def init_network(layer_sizes, thresholds, t_max, w0=1.0, seed=0) -> Network:
    """Fresh real-mode network with weights uniform in ``[-w0, +w0]``.

    ``thresholds`` is a scalar (shared by all layers) or a sequence with one
    scalar per non-input layer.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least input and output layers")
    rng = np.random.default_rng(seed)
    if np.isscalar(thresholds):
        thresholds = [float(thresholds)] * (len(sizes) - 1)
    if len(thresholds) != len(sizes) - 1:
        raise ValueError("need one threshold per non-input layer")
    weights = [rng.uniform(-w0, w0, size=(sizes[l + 1], sizes[l])) for l in range(len(sizes) - 1)]
    theta = [np.full(sizes[l + 1], float(thresholds[l])) for l in range(len(sizes) - 1)]
    return Network(sizes, weights, theta, int(t_max), "real")


@dataclass
class ForwardTrace:
    """Spike times for every layer (index 0 = input) and final potentials for
    every non-input layer (``potentials[0]`` is ``None``)."""

    times: list
    potentials: list

    @property
    def output_times(self) -> SpikeTimes:
        return self.times[-1]

    @property
    def output_potentials(self) -> np.ndarray:
        return self.potentials[-1]


def _first_crossing(values_per_step: np.ndarray, limits: np.ndarray, t_max: int):
    """First step where each row of ``values_per_step`` reaches its limit."""
    crossed = values_per_step >= limits[:, None]
    fired = crossed.any(axis=1)
    first = np.argmax(crossed, axis=1)
    steps = np.where(fired, first, t_max)
    return steps.astype(np.int64), fired


def step_potentials(weights, input_times: SpikeTimes, t_max: int, fmt: QFormat = None):
    """End-of-step membrane potentials ``[n_post, t_max + 1]``.

    Events are applied in (step, presynaptic index) order; in fixed mode
    (``fmt`` given) accumulation saturates to the format after every addition,
    which makes that ordering observable.
    """
    n_post, n_pre = weights.shape
    if len(input_times) != n_pre:
        raise ValueError(f"{len(input_times)} input spikes for fan-in {n_pre}")
    order = np.argsort(input_times.steps, kind="stable")
    contrib = weights[:, order]
    if fmt is None:
        cum = np.cumsum(contrib, axis=1, dtype=np.float64)
    else:
        cum = saturating_cumsum(contrib, fmt)
    zero_col = np.zeros((n_post, 1), dtype=cum.dtype)
    cum = np.concatenate([zero_col, cum], axis=1)
    boundary = np.searchsorted(input_times.steps[order], np.arange(t_max + 1), side="right")
    return cum[:, boundary]


def simulate_layer(weights, thresholds, input_times: SpikeTimes, t_max: int, fmt: QFormat = None):
    """One IF layer: returns (spike times, final potentials).

    Real mode when ``fmt`` is None, saturating fixed-point raws otherwise.
    """
    if input_times.steps.size and input_times.steps.max() > t_max:
        raise ValueError("input spike time beyond t_max")
    v = step_potentials(weights, input_times, t_max, fmt)
    steps, fired = _first_crossing(v, np.asarray(thresholds), t_max)
    return SpikeTimes(steps, fired), v[:, -1]


def run_forward(net: Network, input_times: SpikeTimes) -> ForwardTrace:
    """Chain every layer; potentials start from zero for each sample."""
    if len(input_times) != net.layer_sizes[0]:
        raise ValueError(
            f"input has {len(input_times)} neurons, network expects {net.layer_sizes[0]}"
        )
    fmt = net.weight_format if net.mode == "fixed" else None
    times = [input_times]
    potentials = [None]
    for w, th in zip(net.weights, net.thresholds):
        st, v = simulate_layer(w, th, times[-1], net.t_max, fmt)
        times.append(st)
        potentials.append(v)
    return ForwardTrace(times, potentials)


def classify(trace: ForwardTrace) -> int:
    """Earliest output spike wins; ties break to the lowest index. If no
    output fired, the neuron with the highest final potential wins."""
    out = trace.output_times
    if out.fired.any():
        masked = np.where(out.fired, out.steps, np.iinfo(np.int64).max)
        return int(np.argmin(masked))
    return int(np.argmax(trace.output_potentials))


@dataclass
class ActiveSynapses:
    per_layer: list
    total: int


def count_active_synapses(trace: ForwardTrace, net: Network) -> ActiveSynapses:
    """Synapses whose presynaptic spike strictly precedes the postsynaptic
    spike (placeholders count with their pinned time)."""
    per_layer = []
    for l in range(1, net.n_layers):
        pre = np.sort(trace.times[l - 1].steps)
        post = trace.times[l].steps
        # number of pre spikes strictly before each post spike
        counts = np.searchsorted(pre, post, side="left")
        per_layer.append(int(counts.sum()))
    return ActiveSynapses(per_layer, int(sum(per_layer)))
