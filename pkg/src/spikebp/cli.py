"""Command-line front end.

Subcommands: ``fetch`` (download/generate datasets), ``train`` (end-to-end
training producing a model file, metrics CSV, and summary), ``eval``
(accuracy + confusion matrix for a saved model), ``sparsity`` (per-class
active-synapse table), ``export-bram`` (hardware weight images), and
``hwreport`` (cycle/throughput arithmetic).

Exit codes: 0 success, 1 configuration/usage errors (bad config file, bad
model file, mismatched shapes), 2 dataset/IO errors (download, checksum,
unwritable output), 3 training divergence (non-finite loss or weights in
real mode).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_run_config, make_network
from .datasets import DatasetError, SPECS, fetch, load_dataset
from .hwmodel import export_bram_files, quantize_network, throughput_report
from .modelio import ModelFormatError, load_model, save_model
from .training import TrainingDiverged, evaluate, sparsity_report, train, write_metrics_csv

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikebp",
        description="Single-spike SNN training with a fixed-point hardware mode and FPGA cost model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download (or generate) a dataset into the cache")
    p.add_argument("--dataset", choices=sorted(SPECS), default="digits")
    p.add_argument("--cache", default=None, help="cache directory (default: $SPIKEBP_CACHE or ~/.cache/spikebp)")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("train", help="train a network and write model/metrics/summary artifacts")
    p.add_argument("--config", default=None, help="INI config file (default: built-in digits run)")
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    p.add_argument("--dataset", default=None, help="override [dataset] name")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="override both init and shuffle seeds")
    p.add_argument("--mode", choices=["real", "fixed"], default=None)
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch progress lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--on", choices=["test", "train"], default="test")
    p.add_argument("--out", default=None, help="directory for confusion.csv")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sparsity", help="per-class active-synapse report for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--on", choices=["test", "train"], default="test")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("export-bram", help="write per-neuron BRAM weight images for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_bram)

    p = sub.add_parser("hwreport", help="cycle counts and throughput for an architecture")
    p.add_argument("--config", default=None)
    p.add_argument("--arch", default=None, help="comma-separated layer sizes, e.g. 64,20,10")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--fmax-mhz", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_hwreport)
    return parser


def _load_data(cfg, dataset_override=None):
    name = dataset_override or cfg.dataset
    return load_dataset(name, cfg.cache_dir, cfg.split_ratio, cfg.split_seed)


def cmd_fetch(args) -> int:
    paths = fetch(SPECS[args.dataset], args.cache)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.dataset is not None:
        cfg.dataset = args.dataset
    if args.out is not None:
        cfg.out_dir = args.out
    if args.epochs is not None:
        cfg.train.epochs = args.epochs
    if args.lr is not None:
        cfg.train.lr = args.lr
    if args.seed is not None:
        cfg.train.seed = args.seed
        cfg.network.seed = args.seed
    if args.mode is not None:
        cfg.network.mode = args.mode
        cfg.train.mode = args.mode

    train_set, test_set = _load_data(cfg)
    net = make_network(cfg.network)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def progress(m):
        if not args.quiet:
            test = f"{m.test_acc:.4f}" if not math.isnan(m.test_acc) else "-"
            print(
                f"epoch {m.epoch:3d}  loss {m.loss:.5f}  train_acc {m.train_acc:.4f}  "
                f"test_acc {test}  {m.seconds:.1f}s",
                flush=True,
            )

    net, history = train(net, train_set, cfg.train, test_set, on_epoch=progress)

    model_path = out / "model.snn"
    save_model(net, model_path)
    write_metrics_csv(history, out / "metrics.csv")
    final = history[-1]
    arch = "-".join(map(str, cfg.network.layer_sizes))
    summary = "\n".join(
        [
            f"dataset: {cfg.dataset}",
            f"architecture: {arch}",
            f"mode: {cfg.network.mode}",
            f"epochs: {cfg.train.epochs}  lr: {cfg.train.lr}  gamma: {cfg.train.gamma}",
            f"final train loss: {final.loss:.6f}",
            f"final train accuracy: {final.train_acc:.4f}",
            f"final test accuracy: {final.test_acc:.4f}",
            f"mean active-synapse fraction (test): {final.sparsity:.4f}",
            f"total wall time: {sum(m.seconds for m in history):.1f}s",
            f"model: {model_path}",
        ]
    )
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def _confusion_lines(conf):
    lines = ["true\\pred " + " ".join(f"{j:5d}" for j in range(conf.shape[1]))]
    for i, row in enumerate(conf):
        lines.append(f"{i:9d} " + " ".join(f"{v:5d}" for v in row))
    return lines


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    net = load_model(args.model)
    train_set, test_set = _load_data(cfg, args.dataset)
    samples = test_set if args.on == "test" else train_set
    res = evaluate(net, samples, cfg.train.gamma)
    if args.json:
        print(
            json.dumps(
                {
                    "accuracy": res.accuracy,
                    "mean_loss": res.mean_loss,
                    "n_samples": int(res.confusion.sum()),
                    "confusion": res.confusion.tolist(),
                }
            )
        )
    else:
        print(f"samples: {int(res.confusion.sum())}")
        print(f"accuracy: {res.accuracy:.4f}")
        print(f"mean loss: {res.mean_loss:.6f}")
        print("\n".join(_confusion_lines(res.confusion)))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / "confusion.csv", res.confusion, fmt="%d", delimiter=",")
    return EXIT_OK


def cmd_sparsity(args) -> int:
    cfg = load_run_config(args.config)
    net = load_model(args.model)
    train_set, test_set = _load_data(cfg, args.dataset)
    samples = test_set if args.on == "test" else train_set
    rep = sparsity_report(net, samples)
    if args.json:
        print(
            json.dumps(
                {
                    "total_synapses": rep.total_synapses,
                    "overall_mean_active": rep.overall_mean_active,
                    "overall_pct": rep.overall_pct,
                    "min_activity_class": rep.min_activity_class,
                    "per_class": [
                        {
                            "label": c.label,
                            "n_samples": c.n_samples,
                            "mean_active": c.mean_active,
                            "pct": c.pct,
                        }
                        for c in rep.per_class
                    ],
                }
            )
        )
    else:
        print(f"total synapses: {rep.total_synapses}")
        print("class  samples  mean_active      pct")
        for c in rep.per_class:
            print(f"{c.label:5d}  {c.n_samples:7d}  {c.mean_active:11.1f}  {c.pct:6.2f}%")
        print(f"overall: {rep.overall_mean_active:.1f} active ({rep.overall_pct:.2f}%)")
        print(f"minimum-activity class: {rep.min_activity_class}")
    return EXIT_OK


def cmd_export_bram(args) -> int:
    net = load_model(args.model)
    if net.mode == "real":
        net, qrep = quantize_network(net)
        print(f"real-mode model quantized for export; {qrep}")
    paths = export_bram_files(net, args.out)
    print(f"wrote {len(paths)} neuron images (binary + hex) to {args.out}")
    return EXIT_OK


def cmd_hwreport(args) -> int:
    cfg = load_run_config(args.config)
    layer_sizes = cfg.network.layer_sizes
    if args.arch is not None:
        try:
            layer_sizes = [int(tok) for tok in args.arch.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--arch: {exc}") from exc
    hw = cfg.hw
    if args.parallelism is not None or args.fmax_mhz is not None:
        from dataclasses import replace

        kwargs = {}
        if args.parallelism is not None:
            kwargs["parallelism"] = args.parallelism
        if args.fmax_mhz is not None:
            kwargs["fmax_hz"] = args.fmax_mhz * 1e6
        hw = replace(hw, **kwargs)
    rep = throughput_report(layer_sizes, hw)
    if args.json:
        print(
            json.dumps(
                {
                    "layer_sizes": rep.layer_sizes,
                    "parallelism": rep.parallelism,
                    "fmax_hz": rep.fmax_hz,
                    "per_layer_cycles": rep.per_layer_cycles,
                    "cycles_per_sample": rep.cycles_per_sample,
                    "window_steps": rep.window_steps,
                    "samples_per_sec": rep.samples_per_sec,
                    "feaps": rep.feaps,
                }
            )
        )
    else:
        print(rep)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelFormatError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
