"""End-to-end hardware path: quantize, export weight memories, verify, report.

Takes a trained model (or trains a small one on digits if none is given),
quantizes it to Q5.7, writes per-neuron block-RAM images (binary + hex),
reads them back to prove the round trip is bit-exact, and prints the
pipeline cycle counts and throughput for the given parallelism.

    python scripts/hardware_path.py --model runs/digits1/model.snn --out runs/bram
    python scripts/hardware_path.py --parallelism 8
"""

import argparse
import pathlib
import tempfile

import numpy as np

from spikebp.config import default_run_config
from spikebp.datasets import load_dataset
from spikebp.hwmodel import (HwConfig, export_bram_files, import_bram_dir,
                             quantize_network, throughput_report)
from spikebp.modelio import load_model
from spikebp.network import init_network
from spikebp.training import TrainConfig, train, evaluate


def get_network(args, defaults):
    if args.model:
        return load_model(args.model)
    train_set, test_set = load_dataset("digits")
    base = defaults.network.thresholds
    net = init_network([64, 20, 10], thresholds=[base[0], base[-1]], t_max=15,
                       w0=defaults.network.w0, seed=defaults.network.seed)
    cfg = TrainConfig(epochs=args.epochs, lr=defaults.train.lr,
                      gamma=defaults.train.gamma, seed=defaults.network.seed,
                      lr_decay=defaults.train.lr_decay, eval_every=args.epochs)
    net, _ = train(net, train_set, cfg, test_set=test_set)
    print(f"trained digits model: test acc "
          f"{evaluate(net, test_set, gamma=defaults.train.gamma).accuracy:.4f}")
    return net


def main():
    defaults = default_run_config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default=None, help="path to a saved model")
    ap.add_argument("--out", default=None, help="BRAM output dir (default: temp)")
    ap.add_argument("--parallelism", type=int, default=4)
    ap.add_argument("--fmax-mhz", type=float, default=142.45)
    ap.add_argument("--epochs", type=int, default=60,
                    help="epochs for the fallback digits training")
    args = ap.parse_args()

    net = get_network(args, defaults)
    if net.mode == "real":
        net, qrep = quantize_network(net)
        print(f"quantized to Q5.7: max |error| {qrep.max_abs_error:.2e}, "
              f"{qrep.saturated} weights saturated")

    out = pathlib.Path(args.out) if args.out else pathlib.Path(tempfile.mkdtemp())
    images = export_bram_files(net, out)
    print(f"wrote {len(images)} neuron weight images to {out}/")

    rebuilt = import_bram_dir(out, net.layer_sizes)
    for l, (a, b) in enumerate(zip(net.weights, rebuilt)):
        assert np.array_equal(a, b), f"layer {l} mismatch after round trip"
    print("read back bit-exact")

    hw = HwConfig(parallelism=args.parallelism, fmax_hz=args.fmax_mhz * 1e6)
    print()
    print(throughput_report(net.layer_sizes, hw))


if __name__ == "__main__":
    main()
