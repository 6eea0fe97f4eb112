"""Epoch-level training loop, evaluation, metrics, and sparsity reporting.

Training is online: one weight update per sample, samples optionally
reshuffled every epoch from a seeded generator, so a (seed, config) pair
fully determines the final weights — bit-exact in fixed mode. Evaluation
never mutates the network. Dataset arguments are any object with ``pixels``
(``[N, P]`` integer intensities), ``labels`` (``[N]``), and ``i_max``
attributes; encoding to spike times happens once up front.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .backward import compute_output_error, compute_target_times, loss, train_step
from .encoding import EncodingConfig, SpikeTimes, encode_batch
from .fixedpoint import from_real, mul_count_audit
from .network import Network, classify, count_active_synapses, run_forward

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "EvalResult",
    "SparsityReport",
    "TrainingDiverged",
    "train",
    "evaluate",
    "sparsity_report",
    "write_metrics_csv",
    "METRICS_COLUMNS",
]

METRICS_COLUMNS = ["epoch", "loss", "train_acc", "test_acc", "sparsity", "mul_count"]


class TrainingDiverged(RuntimeError):
    """Raised when real-mode training produces non-finite loss or weights."""


@dataclass
class TrainConfig:
    """Run-scope hyperparameters. ``mode`` must match the network's mode.

    ``lr_decay`` multiplies the learning rate once per epoch (1.0 = constant).
    ``eval_every`` controls how often the test set is scored; skipped epochs
    carry NaN in their test columns.
    """

    epochs: int = 100
    lr: float = 0.01
    gamma: int = 1
    seed: int = 0
    shuffle: bool = True
    mode: str = "real"
    eval_every: int = 1
    lr_decay: float = 1.0
    backward_theta_scale: float = 1.0
    denominator: str = "magnitude"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.mode not in ("real", "fixed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.denominator not in ("magnitude", "literal"):
            raise ValueError(f"unknown denominator {self.denominator!r}")


@dataclass
class EpochMetrics:
    """One epoch of training telemetry. ``sparsity`` is the mean fraction of
    active synapses over the test set (NaN when the epoch was not evaluated);
    ``mul_count`` is the audit-counter increment across the epoch's updates."""

    epoch: int
    loss: float
    train_acc: float
    test_acc: float
    sparsity: float
    mul_count: int
    seconds: float


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray
    mean_loss: float


def _check_dataset(net: Network, samples):
    labels = np.asarray(samples.labels)
    if labels.size == 0:
        raise ValueError("dataset is empty")
    if samples.pixels.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"dataset has {samples.pixels.shape[1]} pixels but the network "
            f"expects {net.layer_sizes[0]} inputs"
        )
    n_out = net.layer_sizes[-1]
    if labels.min() < 0 or labels.max() >= n_out:
        raise ValueError(f"labels outside [0, {n_out})")


def _encode(net: Network, samples) -> np.ndarray:
    cfg = EncodingConfig(i_max=samples.i_max, t_max=net.t_max)
    return encode_batch(samples.pixels, cfg)


def _scan(net: Network, steps, labels, gamma, want_active):
    """One read-only pass: confusion matrix, mean loss, and (optionally) the
    mean active-synapse fraction, all from a single forward pass per sample."""
    n_out = net.layer_sizes[-1]
    conf = np.zeros((n_out, n_out), dtype=np.int64)
    total_syn = sum(w.size for w in net.weights)
    loss_sum = 0.0
    active_sum = 0
    n = len(labels)
    for i in range(n):
        trace = run_forward(net, SpikeTimes(steps[i]))
        conf[labels[i], classify(trace)] += 1
        targets = compute_target_times(trace.output_times, int(labels[i]), gamma, net.t_max)
        loss_sum += loss(compute_output_error(trace.output_times, targets, net.t_max))
        if want_active:
            active_sum += count_active_synapses(trace, net).total
    acc = float(np.trace(conf)) / n
    frac = active_sum / (n * total_syn) if want_active else math.nan
    return acc, conf, loss_sum / n, frac


def evaluate(net: Network, samples, gamma: int = 1) -> EvalResult:
    """Score a dataset without touching the network: accuracy, a
    true-by-predicted confusion matrix, and the mean timing loss (which needs
    the same margin ``gamma`` used in training)."""
    _check_dataset(net, samples)
    steps = _encode(net, samples)
    labels = np.asarray(samples.labels, dtype=np.int64)
    acc, conf, mean_loss, _ = _scan(net, steps, labels, gamma, want_active=False)
    return EvalResult(acc, conf, mean_loss)


def train(net: Network, train_set, cfg: TrainConfig, test_set=None, on_epoch=None):
    """Train ``net`` in place; returns ``(net, history)`` with one
    :class:`EpochMetrics` per epoch. Deterministic given seed and config.
    ``on_epoch``, if given, is called with each EpochMetrics as it is
    produced (progress reporting)."""
    if cfg.mode != net.mode:
        raise ValueError(f"TrainConfig.mode {cfg.mode!r} does not match net.mode {net.mode!r}")
    _check_dataset(net, train_set)
    steps = _encode(net, train_set)
    labels = np.asarray(train_set.labels, dtype=np.int64)
    if test_set is not None:
        _check_dataset(net, test_set)
        test_steps = _encode(net, test_set)
        test_labels = np.asarray(test_set.labels, dtype=np.int64)

    n = len(labels)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        mul0 = mul_count_audit()
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        lr_epoch = cfg.lr * cfg.lr_decay**epoch
        # fixed mode: quantize the rate once per epoch, like a host writing
        # the accelerator's lr register
        lr_arg = from_real(lr_epoch, net.delta_format) if net.mode == "fixed" else lr_epoch
        loss_sum = 0.0
        correct = 0
        for idx in order:
            _, btrace, loss_val = train_step(
                net,
                SpikeTimes(steps[idx]),
                int(labels[idx]),
                lr_arg,
                cfg.gamma,
                cfg.backward_theta_scale,
                cfg.denominator,
            )
            loss_sum += loss_val
            correct += btrace.predicted == labels[idx]
        mean_loss = loss_sum / n
        if net.mode == "real":
            if not math.isfinite(mean_loss) or not all(np.isfinite(w).all() for w in net.weights):
                raise TrainingDiverged(f"non-finite loss or weights at epoch {epoch}")

        test_acc = math.nan
        sparsity = math.nan
        if test_set is not None and ((epoch + 1) % cfg.eval_every == 0 or epoch == cfg.epochs - 1):
            test_acc, _, _, sparsity = _scan(net, test_steps, test_labels, cfg.gamma, want_active=True)
        metrics = EpochMetrics(
            epoch=epoch,
            loss=mean_loss,
            train_acc=correct / n,
            test_acc=test_acc,
            sparsity=sparsity,
            mul_count=mul_count_audit() - mul0,
            seconds=time.perf_counter() - t0,
        )
        history.append(metrics)
        if on_epoch is not None:
            on_epoch(metrics)
    return net, history


@dataclass
class ClassActivity:
    label: int
    n_samples: int
    mean_active: float
    pct: float


@dataclass
class SparsityReport:
    """Mean active-synapse counts per class and overall, as fractions of the
    network's total synapse count."""

    per_class: list
    overall_mean_active: float
    overall_pct: float
    total_synapses: int

    @property
    def min_activity_class(self) -> int:
        return min(self.per_class, key=lambda c: (c.pct, c.label)).label


def sparsity_report(net: Network, samples) -> SparsityReport:
    """Forward the dataset and tabulate active synapses (presynaptic spike
    strictly before postsynaptic) per class."""
    _check_dataset(net, samples)
    steps = _encode(net, samples)
    labels = np.asarray(samples.labels, dtype=np.int64)
    total_syn = sum(w.size for w in net.weights)
    sums = {}
    counts = {}
    for i in range(len(labels)):
        trace = run_forward(net, SpikeTimes(steps[i]))
        active = count_active_synapses(trace, net).total
        lab = int(labels[i])
        sums[lab] = sums.get(lab, 0) + active
        counts[lab] = counts.get(lab, 0) + 1
    per_class = [
        ClassActivity(lab, counts[lab], sums[lab] / counts[lab], 100.0 * sums[lab] / (counts[lab] * total_syn))
        for lab in sorted(sums)
    ]
    overall = sum(sums.values()) / len(labels)
    return SparsityReport(per_class, overall, 100.0 * overall / total_syn, total_syn)


def write_metrics_csv(history, path):
    """Fixed-schema CSV (``epoch,loss,train_acc,test_acc,sparsity,mul_count``)
    for downstream plotting; unevaluated epochs serialize as ``nan``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for m in history:
            writer.writerow([m.epoch, m.loss, m.train_acc, m.test_acc, m.sparsity, m.mul_count])
