"""Hyperparameter sweep driver for the 8x8 digits task.

Runs a small grid over thresholds / learning rate / margin and reports, for
each configuration, the test-accuracy trajectory plus the telemetry that
actually explains the dynamics of this learning rule:

* the fraction of hidden neurons that fire at all (a neuron whose forward
  time is stuck at t_max receives zero delta forever, so dead units are
  permanent capacity loss),
* the 10/50/90 percentiles of hidden and output firing times (times
  compressed to step 0 mean frozen input weights, because no presynaptic
  spike can strictly precede step 0).

Usage:
    python scripts/sweep_digits.py                 # default grid
    python scripts/sweep_digits.py --epochs 150 --grid "2.0,2:1:0.05 2.0,4:2:0.05"

Grid entries are "theta_hidden,theta_out:gamma:lr".
"""

import argparse
import time

import numpy as np

from spikebp.datasets import load_dataset
from spikebp.encoding import SpikeTimes, EncodingConfig, encode_batch
from spikebp.network import init_network, run_forward
from spikebp.training import train, TrainConfig


def layer_telemetry(net, samples, n=150):
    """Alive fraction of the first hidden layer and firing-time percentiles
    for hidden and output layers over the first ``n`` samples."""
    cfg = EncodingConfig(i_max=samples.i_max, t_max=net.t_max)
    steps = encode_batch(samples.pixels[:n], cfg)
    alive, hid_times, out_times = [], [], []
    for row in steps:
        trace = run_forward(net, SpikeTimes(row))
        hid = trace.times[1]
        alive.append(hid.fired.mean())
        hid_times.extend(hid.steps[hid.fired].tolist())
        out = trace.times[-1]
        out_times.extend(out.steps[out.fired].tolist())

    def q(v):
        return np.percentile(v, [10, 50, 90]).astype(int).tolist() if v else "silent"

    return float(np.mean(alive)), q(hid_times), q(out_times)


def run_one(train_set, test_set, arch, t_max, th_h, th_o, gamma, lr, args):
    thresholds = [th_h] * (len(arch) - 2) + [th_o]
    net = init_network(arch, thresholds=thresholds, t_max=t_max, w0=args.w0,
                       seed=args.net_seed)
    before = layer_telemetry(net, train_set)
    cfg = TrainConfig(epochs=args.epochs, lr=lr, gamma=gamma, seed=args.train_seed,
                      lr_decay=args.lr_decay, eval_every=max(1, args.epochs // 6))
    t0 = time.time()
    net, hist = train(net, train_set, cfg, test_set=test_set)
    elapsed = time.time() - t0
    after = layer_telemetry(net, train_set)
    traj = [f"{m.test_acc:.3f}" for m in hist if not np.isnan(m.test_acc)]
    print(f"th=({th_h},{th_o}) gamma={gamma} lr={lr}: test {traj} "
          f"train {hist[-1].train_acc:.3f} [{elapsed:.0f}s]")
    print(f"   init : alive {before[0]:.2f}  hid {before[1]}  out {before[2]}")
    print(f"   final: alive {after[0]:.2f}  hid {after[1]}  out {after[2]}")
    return float(traj[-1]) if traj else 0.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", default="64,20,10",
                    help="comma-separated layer sizes (default 64,20,10)")
    ap.add_argument("--t-max", type=int, default=15)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--w0", type=float, default=1.0)
    ap.add_argument("--lr-decay", type=float, default=0.995)
    ap.add_argument("--net-seed", type=int, default=42)
    ap.add_argument("--train-seed", type=int, default=7)
    ap.add_argument("--grid", default="1.5,8:3:0.05 2.0,2:1:0.05 2.0,4:2:0.05 2.5,4:2:0.05",
                    help='space-separated "theta_h,theta_o:gamma:lr" entries')
    args = ap.parse_args()

    arch = [int(s) for s in args.arch.split(",")]
    train_set, test_set = load_dataset("digits")
    print(f"arch {arch}  t_max {args.t_max}  epochs {args.epochs}  "
          f"decay {args.lr_decay}  ({len(train_set.labels)} train / "
          f"{len(test_set.labels)} test)")

    best, best_entry = 0.0, None
    for entry in args.grid.split():
        th, gamma, lr = entry.split(":")
        th_h, th_o = (float(x) for x in th.split(","))
        acc = run_one(train_set, test_set, arch, args.t_max, th_h, th_o,
                      int(gamma), float(lr), args)
        if acc > best:
            best, best_entry = acc, entry
    print(f"best: {best_entry} -> {best:.3f}")


if __name__ == "__main__":
    main()
