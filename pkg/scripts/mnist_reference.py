"""MNIST reference runs: accuracy tiers and the per-class activity table.

Downloads MNIST on first use (set SPIKEBP_CACHE to relocate the cache), then
trains the two reference architectures and prints the per-class active-synapse
report for the single-hidden-layer model. These runs take tens of minutes on
a laptop; ``--subset N --epochs E`` gives a quick smoke pass (e.g.
``--subset 10000 --epochs 5``).

    python scripts/mnist_reference.py --arch 784,400,10
    python scripts/mnist_reference.py --arch 784,400,400,10
    python scripts/mnist_reference.py --arch 784,400,10 --subset 10000 --epochs 5
"""

import argparse
import time

import numpy as np

from spikebp.config import default_run_config
from spikebp.datasets import load_dataset, stratified_subset
from spikebp.network import init_network
from spikebp.training import TrainConfig, train, evaluate, sparsity_report


def main():
    defaults = default_run_config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", default="784,400,10")
    ap.add_argument("--epochs", type=int, default=defaults.train.epochs)
    ap.add_argument("--lr", type=float, default=defaults.train.lr)
    ap.add_argument("--gamma", type=int, default=defaults.train.gamma)
    ap.add_argument("--lr-decay", type=float, default=defaults.train.lr_decay)
    ap.add_argument("--t-max", type=int, default=defaults.network.t_max)
    ap.add_argument("--thresholds", default=None,
                    help="comma-separated per-layer thresholds")
    ap.add_argument("--seed", type=int, default=defaults.network.seed)
    ap.add_argument("--subset", type=int, default=0,
                    help="train on a stratified subset of this size (0 = full)")
    args = ap.parse_args()

    arch = [int(s) for s in args.arch.split(",")]
    if args.thresholds is not None:
        thresholds = [float(s) for s in args.thresholds.split(",")]
    else:
        base = defaults.network.thresholds
        # scale hidden thresholds with sqrt(fan_in) relative to the 64-input task
        scale = float(np.sqrt(arch[0] / 64.0))
        thresholds = [base[0] * scale] * (len(arch) - 2) + [base[-1]]

    train_set, test_set = load_dataset("mnist")
    if args.subset:
        train_set = stratified_subset(train_set, args.subset, seed=args.seed)

    net = init_network(arch, thresholds=thresholds, t_max=args.t_max,
                       w0=defaults.network.w0, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, gamma=args.gamma,
                      seed=args.seed, lr_decay=args.lr_decay,
                      eval_every=max(1, args.epochs // 10))
    print(f"arch {'-'.join(map(str, arch))}  thresholds "
          f"{[round(t, 2) for t in thresholds]}  t_max {args.t_max}  "
          f"{len(train_set.labels)} train / {len(test_set.labels)} test")

    t0 = time.time()
    net, hist = train(net, train_set, cfg, test_set=test_set)
    final = evaluate(net, test_set, gamma=args.gamma)
    print(f"final: test {final.accuracy:.4f}  train {hist[-1].train_acc:.4f}  "
          f"({(time.time() - t0) / 60:.1f} min)")

    if len(arch) == 3:
        rep = sparsity_report(net, test_set)
        print(f"\nactive synapses per class (of {rep.total_synapses} total):")
        for c in rep.per_class:
            print(f"  class {c.label}: {c.mean_active:9.1f}  ({c.pct:5.2f} %)")
        print(f"  overall: {rep.overall_mean_active:9.1f}  ({rep.overall_pct:5.2f} %)")
        least = rep.min_activity_class
        print(f"  least active: class {least.label} at {least.pct:.2f} %")


if __name__ == "__main__":
    main()
