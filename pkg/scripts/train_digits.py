"""Train a spike-time classifier on the 8x8 digits task and report accuracy.

Uses the package defaults (tuned for this task) unless overridden. With
``--hidden 20`` this is the single-hidden-layer reference run; with
``--hidden 20,20`` the two-hidden-layer one. Writes the trained model and a
per-epoch metrics CSV next to ``--out``.

    python scripts/train_digits.py --hidden 20 --out runs/digits1
    python scripts/train_digits.py --hidden 20,20 --epochs 400 --out runs/digits2
"""

import argparse
import pathlib
import time

import numpy as np

from spikebp.config import default_run_config
from spikebp.datasets import load_dataset
from spikebp.modelio import save_model
from spikebp.network import init_network
from spikebp.training import TrainConfig, train, evaluate, write_metrics_csv


def main():
    defaults = default_run_config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", default="20", help="comma-separated hidden sizes")
    ap.add_argument("--epochs", type=int, default=defaults.train.epochs)
    ap.add_argument("--lr", type=float, default=defaults.train.lr)
    ap.add_argument("--gamma", type=int, default=defaults.train.gamma)
    ap.add_argument("--lr-decay", type=float, default=defaults.train.lr_decay)
    ap.add_argument("--t-max", type=int, default=defaults.network.t_max)
    ap.add_argument("--thresholds", default=None,
                    help="comma-separated per-layer thresholds (default: package)")
    ap.add_argument("--seed", type=int, default=defaults.network.seed)
    ap.add_argument("--out", default="runs/digits")
    args = ap.parse_args()

    hidden = [int(s) for s in args.hidden.split(",")]
    arch = [64] + hidden + [10]
    if args.thresholds is not None:
        thresholds = [float(s) for s in args.thresholds.split(",")]
    else:
        base = defaults.network.thresholds
        thresholds = base if len(base) == len(arch) - 1 else [base[0]] * len(hidden) + [base[-1]]

    train_set, test_set = load_dataset("digits")
    net = init_network(arch, thresholds=thresholds, t_max=args.t_max,
                       w0=defaults.network.w0, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, gamma=args.gamma,
                      seed=args.seed, lr_decay=args.lr_decay,
                      eval_every=max(1, args.epochs // 20))

    print(f"arch {'-'.join(map(str, arch))}  thresholds {thresholds}  "
          f"t_max {args.t_max}  epochs {cfg.epochs}  lr {cfg.lr}  "
          f"gamma {cfg.gamma}  decay {cfg.lr_decay}")
    t0 = time.time()
    net, hist = train(net, train_set, cfg, test_set=test_set)
    elapsed = time.time() - t0

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(net, out / "model.snn")
    write_metrics_csv(hist, out / "metrics.csv")

    final = evaluate(net, test_set, gamma=cfg.gamma)
    seen = [m for m in hist if not np.isnan(m.test_acc)]
    print(f"trajectory: {' '.join(f'{m.test_acc:.3f}' for m in seen[:: max(1, len(seen) // 8)])}")
    print(f"final: test {final.accuracy:.4f}  train {hist[-1].train_acc:.4f}  "
          f"loss {final.mean_loss:.4f}  ({elapsed:.1f}s)")
    print(f"model + metrics written to {out}/")


if __name__ == "__main__":
    main()
