"""Parity check: real-valued training vs the 12-bit fixed-point pipeline.

Trains the same architecture twice from the same initial weights -- once in
float64 and once in Q5.7 weights / Q1.9 deltas with shift-based learning-rate
scaling -- on identical data, split, and hyperparameters, then reports both
test accuracies and the gap. The fixed run also reports its multiplication
audit: the forward pass must count zero, and training must count only the
integer delta-times-lr scalings.

    python scripts/real_vs_fixed.py --hidden 20,20 --epochs 300
"""

import argparse
import time

from spikebp.config import default_run_config
from spikebp.datasets import load_dataset
from spikebp.fixedpoint import audit_counts, reset_audit
from spikebp.hwmodel import quantize_network
from spikebp.network import init_network
from spikebp.training import TrainConfig, train, evaluate


def run(net, mode, train_set, test_set, args):
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, gamma=args.gamma,
                      seed=args.seed, lr_decay=args.lr_decay, mode=mode,
                      eval_every=args.epochs)
    t0 = time.time()
    reset_audit()
    net, hist = train(net, train_set, cfg, test_set=test_set)
    counts = audit_counts()
    acc = evaluate(net, test_set, gamma=args.gamma).accuracy
    print(f"{mode:5s}: test {acc:.4f}  train {hist[-1].train_acc:.4f}  "
          f"int muls {counts['int_mul']}  float muls {counts['float_mul']}  "
          f"({time.time() - t0:.1f}s)")
    return acc


def main():
    defaults = default_run_config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", default="20,20")
    ap.add_argument("--epochs", type=int, default=defaults.train.epochs)
    ap.add_argument("--lr", type=float, default=defaults.train.lr)
    ap.add_argument("--gamma", type=int, default=defaults.train.gamma)
    ap.add_argument("--lr-decay", type=float, default=defaults.train.lr_decay)
    ap.add_argument("--seed", type=int, default=defaults.network.seed)
    args = ap.parse_args()

    hidden = [int(s) for s in args.hidden.split(",")]
    arch = [64] + hidden + [10]
    base = defaults.network.thresholds
    thresholds = base if len(base) == len(arch) - 1 else [base[0]] * len(hidden) + [base[-1]]

    train_set, test_set = load_dataset("digits")
    # t_max is pinned to 15 here: forward timestamps must fit 4 bits.
    real_net = init_network(arch, thresholds=thresholds, t_max=15,
                            w0=defaults.network.w0, seed=args.seed)
    fixed_net, qrep = quantize_network(real_net)
    print(f"arch {'-'.join(map(str, arch))}  quantization: max |error| "
          f"{qrep.max_abs_error:.2e}, {qrep.saturated} saturated")

    acc_real = run(real_net, "real", train_set, test_set, args)
    acc_fixed = run(fixed_net, "fixed", train_set, test_set, args)
    print(f"gap: {abs(acc_real - acc_fixed) * 100:.2f} percentage points")


if __name__ == "__main__":
    main()
