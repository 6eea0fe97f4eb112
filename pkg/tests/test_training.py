"""Training-loop, evaluation, metrics, and sparsity-report tests."""
import csv
import math

import numpy as np
import pytest

from spikebp.datasets import SampleSet
from spikebp.fixedpoint import Q1_9, Q5_7
from spikebp.hwmodel import quantize_network
from spikebp.network import init_network
from spikebp.training import (
    METRICS_COLUMNS,
    EpochMetrics,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    sparsity_report,
    train,
    write_metrics_csv,
)


def _tiny_digits(digits_sets, n=120):
    train_set, test_set = digits_sets
    return train_set.subset(np.arange(n)), test_set.subset(np.arange(60))


def _net(seed=0, sizes=(64, 20, 10), th=(1.0, 8.0), mode="real"):
    net = init_network(list(sizes), thresholds=list(th), t_max=15, w0=1.0,
                       seed=seed)
    if mode == "fixed":
        net, _ = quantize_network(net)
    return net


# ---------------------------------------------------------------------------
# TrainConfig validation
# ---------------------------------------------------------------------------


def test_train_config_validation():
    TrainConfig()  # defaults valid
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(gamma=0)
    with pytest.raises(ValueError):
        TrainConfig(mode="analog")
    with pytest.raises(ValueError):
        TrainConfig(eval_every=0)
    with pytest.raises(ValueError):
        TrainConfig(lr_decay=0.0)
    with pytest.raises(ValueError):
        TrainConfig(denominator="other")


# ---------------------------------------------------------------------------
# train() behaviour
# ---------------------------------------------------------------------------


def test_train_determinism_real(digits_sets):
    tr, te = _tiny_digits(digits_sets)
    runs = []
    for _ in range(2):
        net, hist = train(_net(seed=5), tr,
                          TrainConfig(epochs=3, lr=0.05, gamma=3, seed=9),
                          test_set=te)
        runs.append((net, hist))
    for a, b in zip(runs[0][0].weights, runs[1][0].weights):
        assert np.array_equal(a, b)
    assert [m.loss for m in runs[0][1]] == [m.loss for m in runs[1][1]]


def test_train_determinism_fixed_bit_exact(digits_sets):
    tr, te = _tiny_digits(digits_sets)
    finals = []
    for _ in range(2):
        net = _net(seed=5, mode="fixed")
        cfg = TrainConfig(epochs=3, lr=0.05, gamma=3, seed=9, mode="fixed")
        net, _ = train(net, tr, cfg)
        finals.append([w.copy() for w in net.weights])
    for a, b in zip(*finals):
        assert a.dtype.kind == "i"  # raw integer weights
        assert np.array_equal(a, b)


def test_train_history_length_and_metrics_fields(digits_sets):
    tr, te = _tiny_digits(digits_sets)
    net, hist = train(_net(), tr, TrainConfig(epochs=4, lr=0.01, gamma=3,
                                              eval_every=2), test_set=te)
    assert len(hist) == 4
    for i, m in enumerate(hist):
        assert m.epoch == i
        assert 0.0 <= m.train_acc <= 1.0
        assert m.loss >= 0 and m.seconds >= 0
    # eval_every=2: epochs 1 and 3 (cadence) have test numbers, 0 and 2 NaN
    evaluated = [not math.isnan(m.test_acc) for m in hist]
    assert evaluated[-1]  # final epoch always evaluated
    assert any(evaluated) and not all(evaluated)


def test_train_without_test_set_has_nan_test_acc(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    _, hist = train(_net(), tr, TrainConfig(epochs=2, lr=0.01, gamma=3))
    assert all(math.isnan(m.test_acc) for m in hist)


def test_train_tiny_lr_is_noop_bound(digits_sets):
    """With a vanishing lr one epoch leaves accuracy at the untrained level."""
    tr, te = _tiny_digits(digits_sets)
    net0 = _net(seed=2)
    base = evaluate(net0, te, gamma=3).accuracy
    net, hist = train(_net(seed=2), tr,
                      TrainConfig(epochs=1, lr=1e-12, gamma=3), test_set=te)
    assert hist[-1].test_acc == pytest.approx(base, abs=1e-9)


def test_train_mode_mismatch_rejected(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    with pytest.raises(ValueError):
        train(_net(mode="fixed"), tr, TrainConfig(epochs=1, lr=0.01))


def test_train_label_range_checked(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    bad = _net(sizes=(64, 20, 5), th=(1.0, 8.0))  # labels 0..9 vs 5 outputs
    with pytest.raises(ValueError):
        train(bad, tr, TrainConfig(epochs=1, lr=0.01))


def test_train_input_size_checked(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    bad = _net(sizes=(32, 20, 10))
    with pytest.raises(ValueError):
        train(bad, tr, TrainConfig(epochs=1, lr=0.01))


def test_train_divergence_detected(digits_sets):
    """NaN weights (injected between epochs) raise TrainingDiverged."""
    tr, _ = _tiny_digits(digits_sets)
    net = _net()

    def sabotage(metrics):
        net.weights[0][0, 0] = math.nan

    with pytest.raises(TrainingDiverged):
        train(net, tr, TrainConfig(epochs=3, lr=0.01, gamma=3),
              on_epoch=sabotage)


def test_train_mul_count_recorded(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    _, hist = train(_net(), tr, TrainConfig(epochs=2, lr=0.05, gamma=3))
    assert all(m.mul_count >= 0 for m in hist)
    net = _net(mode="fixed")
    _, hist = train(net, tr, TrainConfig(epochs=1, lr=0.05, gamma=3,
                                         mode="fixed"))
    # fixed mode performs integer scalar products only
    assert hist[0].mul_count <= 2 * len(tr) * sum(net.layer_sizes[1:])


# ---------------------------------------------------------------------------
# evaluate()
# ---------------------------------------------------------------------------


def test_evaluate_side_effect_free(digits_sets):
    _, te = _tiny_digits(digits_sets)
    net = _net(seed=1)
    before = [w.tobytes() for w in net.weights]
    res = evaluate(net, te, gamma=3)
    after = [w.tobytes() for w in net.weights]
    assert before == after
    assert 0.0 <= res.accuracy <= 1.0
    assert res.confusion.shape == (10, 10)
    assert res.confusion.sum() == len(te)
    assert res.mean_loss >= 0


def test_evaluate_single_sample_correct(digits_sets):
    tr, _ = digits_sets
    net = _net(seed=0)
    one = tr.subset(np.arange(1))
    res = evaluate(net, one, gamma=3)
    pred = int(np.argmax(res.confusion.sum(axis=0)))
    want = 1.0 if pred == one.labels[0] else 0.0
    assert res.accuracy == want


def test_evaluate_zero_weight_net_is_chance(digits_sets):
    """All-zero weights: nothing fires, potential fallback ties to class 0."""
    _, te = _tiny_digits(digits_sets)
    net = _net()
    for w in net.weights:
        w[:] = 0.0
    res = evaluate(net, te, gamma=3)
    # every prediction collapses to index 0 -> accuracy = class-0 frequency
    freq0 = float(np.mean(te.labels == 0))
    assert res.accuracy == pytest.approx(freq0)
    assert res.confusion[:, 0].sum() == len(te)


# ---------------------------------------------------------------------------
# sparsity report
# ---------------------------------------------------------------------------


def test_sparsity_report_degenerate_zero(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    net = _net()
    for w in net.weights:
        w[:] = 0.0
    # all-black images spike at t_max; posts are placeholders at t_max too,
    # so no strict precedence anywhere
    pixels = np.zeros((10, 64), dtype=np.int64)
    labels = np.arange(10) % 10
    black = SampleSet(pixels, labels, i_max=15, name="black")
    rep = sparsity_report(net, black)
    assert rep.overall_pct == 0.0
    assert all(c.mean_active == 0 for c in rep.per_class)


def test_sparsity_report_fields(digits_sets):
    tr, _ = _tiny_digits(digits_sets)
    net = _net(seed=4)
    rep = sparsity_report(net, tr)
    assert rep.total_synapses == 64 * 20 + 20 * 10
    assert 0 <= rep.overall_pct <= 100
    labels = sorted(c.label for c in rep.per_class)
    assert labels == sorted(set(int(v) for v in tr.labels))
    assert 0 <= rep.min_activity_class < 10
    mn = min(rep.per_class, key=lambda c: (c.pct, c.label))
    assert rep.min_activity_class == mn.label


# ---------------------------------------------------------------------------
# metrics CSV
# ---------------------------------------------------------------------------


def test_metrics_csv_schema(tmp_path):
    rows = [
        EpochMetrics(epoch=0, loss=0.5, train_acc=0.3, test_acc=float("nan"),
                     sparsity=42.0, mul_count=0, seconds=0.1),
        EpochMetrics(epoch=1, loss=0.4, train_acc=0.5, test_acc=0.55,
                     sparsity=41.0, mul_count=7, seconds=0.1),
    ]
    path = tmp_path / "metrics.csv"
    write_metrics_csv(rows, str(path))
    with open(path, newline="") as fh:
        got = list(csv.reader(fh))
    assert got[0] == list(METRICS_COLUMNS)
    assert got[0][:6] == ["epoch", "loss", "train_acc", "test_acc", "sparsity",
                          "mul_count"]
    assert len(got) == 3
    assert got[1][0] == "0" and got[2][0] == "1"
    assert math.isnan(float(got[1][3]))  # unevaluated epoch
    assert float(got[2][3]) == 0.55
