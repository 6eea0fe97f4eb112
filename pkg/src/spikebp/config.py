"""Run configuration: a typed INI schema covering dataset choice, network
architecture, training hyperparameters, hardware parameters, and output
location.

Parsing is strict: unknown sections or keys are rejected (they are almost
always typos), every value goes through a per-key parser with the offending
``[section] key`` named on failure, and the result is plain dataclasses.
Precedence is built-in defaults < config file < CLI flags (the CLI applies
flag overrides onto the parsed result).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .fixedpoint import Q1_9, Q5_7, QFormat
from .hwmodel import HwConfig, quantize_network
from .network import Network, init_network
from .training import TrainConfig

__all__ = [
    "ConfigError",
    "NetworkConfig",
    "RunConfig",
    "load_run_config",
    "default_run_config",
    "make_network",
    "parse_qformat",
]


class ConfigError(Exception):
    """Configuration file missing, malformed, or containing unknown keys."""


def parse_qformat(text: str) -> QFormat:
    m = re.fullmatch(r"[Qq](\d+)\.(\d+)", text.strip())
    if not m:
        raise ValueError(f"expected a Q-format like Q5.7, got {text!r}")
    return QFormat(int(m.group(1)), int(m.group(2)))


@dataclass
class NetworkConfig:
    """Architecture and initialization. ``thresholds`` is one value shared by
    all layers or one per non-input layer; ``seed`` drives the uniform
    [-w0, w0] weight draw."""

    layer_sizes: list = field(default_factory=lambda: [64, 20, 10])
    thresholds: list = field(default_factory=lambda: [4.0])
    t_max: int = 15
    w0: float = 1.0
    mode: str = "real"
    seed: int = 0
    weight_format: QFormat = Q5_7
    delta_format: QFormat = Q1_9

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output layers")
        if any(s < 1 for s in self.layer_sizes):
            raise ConfigError("layer sizes must be positive")
        n_noninput = len(self.layer_sizes) - 1
        if len(self.thresholds) not in (1, n_noninput):
            raise ConfigError(
                f"thresholds must have 1 value or {n_noninput} (one per non-input layer), "
                f"got {len(self.thresholds)}"
            )
        if self.mode not in ("real", "fixed"):
            raise ConfigError(f"unknown mode {self.mode!r}")


@dataclass
class RunConfig:
    dataset: str = "digits"
    cache_dir: str = None
    split_ratio: float = 0.8
    split_seed: int = 0
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    hw: HwConfig = field(default_factory=HwConfig)
    out_dir: str = "runs/out"


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str):
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _parse_float_list(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


# section -> key -> (target path, parser)
_SCHEMA = {
    "dataset": {
        "name": ("dataset", str.strip),
        "cache_dir": ("cache_dir", str.strip),
        "split_ratio": ("split_ratio", float),
        "split_seed": ("split_seed", int),
    },
    "network": {
        "layer_sizes": ("network.layer_sizes", _parse_int_list),
        "thresholds": ("network.thresholds", _parse_float_list),
        "t_max": ("network.t_max", int),
        "w0": ("network.w0", float),
        "mode": ("network.mode", str.strip),
        "seed": ("network.seed", int),
        "weight_format": ("network.weight_format", parse_qformat),
        "delta_format": ("network.delta_format", parse_qformat),
    },
    "train": {
        "epochs": ("train.epochs", int),
        "lr": ("train.lr", float),
        "gamma": ("train.gamma", int),
        "seed": ("train.seed", int),
        "shuffle": ("train.shuffle", _parse_bool),
        "eval_every": ("train.eval_every", int),
        "lr_decay": ("train.lr_decay", float),
        "backward_theta_scale": ("train.backward_theta_scale", float),
        "denominator": ("train.denominator", str.strip),
    },
    "hw": {
        "parallelism": ("hw.parallelism", int),
        "fmax_mhz": ("hw.fmax_mhz", float),
    },
    "output": {
        "dir": ("out_dir", str.strip),
    },
}


def default_run_config() -> RunConfig:
    return RunConfig()


def load_run_config(path=None) -> RunConfig:
    """Parse an INI file into a :class:`RunConfig`; ``None`` gives the
    built-in digits defaults."""
    if path is None:
        return default_run_config()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if parser.defaults():
        raise ConfigError(f"{path}: [DEFAULT] section is not supported")

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}] (known: {', '.join(_SCHEMA)})")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in [{section}] "
                    f"(known: {', '.join(_SCHEMA[section])})"
                )
            target, parse = _SCHEMA[section][key]
            try:
                values[target] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from exc

    return _build(values)


def _build(values: dict) -> RunConfig:
    net_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("network.")}
    train_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("train.")}
    hw_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("hw.")}
    top = {k: v for k, v in values.items() if "." not in k}

    try:
        network = NetworkConfig(**net_kwargs)
        # training mode follows the network mode so the two cannot disagree
        train = TrainConfig(mode=network.mode, **train_kwargs)
        if "fmax_mhz" in hw_kwargs:
            hw_kwargs["fmax_hz"] = hw_kwargs.pop("fmax_mhz") * 1e6
        hw = HwConfig(weight_format=network.weight_format, delta_format=network.delta_format, **hw_kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = RunConfig(network=network, train=train, hw=hw)
    for key, value in top.items():
        setattr(cfg, key, value)
    if cfg.dataset not in ("digits", "mnist", "fashion-mnist"):
        raise ConfigError(f"unknown dataset {cfg.dataset!r}")
    if not 0 < cfg.split_ratio < 1:
        raise ConfigError("split_ratio must be strictly between 0 and 1")
    return cfg


def make_network(cfg: NetworkConfig) -> Network:
    """Build an initialized network from the config: real-mode weights drawn
    from the seed, then quantized to the configured formats when
    ``mode = fixed``."""
    thresholds = cfg.thresholds[0] if len(cfg.thresholds) == 1 else list(cfg.thresholds)
    net = init_network(cfg.layer_sizes, thresholds, cfg.t_max, w0=cfg.w0, seed=cfg.seed)
    if cfg.mode == "fixed":
        net, _ = quantize_network(net, cfg.weight_format, cfg.delta_format)
    return net
