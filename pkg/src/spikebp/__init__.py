"""Multiplication-free single-spike SNN training.

Feedforward integrate-and-fire networks with time-to-first-spike coding,
trained by a spike-time-encoded backward pass whose only multiplication is
the per-neuron delta x learning-rate product. Runs either in float (``real``
mode) or bit-exact Q-format integer arithmetic (``fixed`` mode, matching a
4-lane accelerator whose cost model and BRAM weight images live in
:mod:`spikebp.hwmodel`).
"""

from .encoding import EncodingConfig, SpikeTimes, encode_batch, encode_image
from .fixedpoint import Q1_9, Q4_8, Q5_7, FixedPoint, QFormat
from .network import Network, classify, count_active_synapses, init_network, run_forward
from .backward import train_step
from .training import TrainConfig, evaluate, sparsity_report, train
from .hwmodel import HwConfig, quantize_network, throughput_report
from .modelio import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "EncodingConfig",
    "SpikeTimes",
    "encode_batch",
    "encode_image",
    "QFormat",
    "FixedPoint",
    "Q5_7",
    "Q1_9",
    "Q4_8",
    "Network",
    "init_network",
    "run_forward",
    "classify",
    "count_active_synapses",
    "train_step",
    "TrainConfig",
    "train",
    "evaluate",
    "sparsity_report",
    "HwConfig",
    "quantize_network",
    "throughput_report",
    "save_model",
    "load_model",
]
