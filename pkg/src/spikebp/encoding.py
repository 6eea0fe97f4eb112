"""Intensity-to-latency single-spike encoding.

Each input pixel produces exactly one spike whose step is a linear function of
intensity: brighter pixels fire earlier, an intensity of zero fires on the
last step. The step is ``floor((i_max - I) / i_max * t_max)``, computed in
integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["EncodingConfig", "SpikeTimes", "encode_image", "encode_batch", "decode_step_events"]


@dataclass(frozen=True)
class EncodingConfig:
    i_max: int  # maximum pixel intensity (15 for 8x8 digits, 255 for MNIST)
    t_max: int  # last simulation step, inclusive; window length is t_max + 1

    def __post_init__(self):
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")


@dataclass
class SpikeTimes:
    """Per-neuron single spike times for one layer and one sample.

    ``steps[i]`` is the firing step; ``fired[i]`` distinguishes a real spike
    from the training placeholder pinned at ``t_max`` for silent neurons.
    Placeholder steps take part in all temporal comparisons as ordinary times.
    """

    steps: np.ndarray
    fired: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        if self.fired is None:
            self.fired = np.ones(self.steps.shape, dtype=bool)
        else:
            self.fired = np.asarray(self.fired, dtype=bool)
        if self.fired.shape != self.steps.shape:
            raise ValueError("steps and fired must have the same shape")

    def __len__(self):
        return self.steps.shape[0]


def encode_image(pixels, cfg: EncodingConfig) -> SpikeTimes:
    """Encode one intensity vector into spike steps (all marked fired).

    Raises ``ValueError`` if any pixel falls outside ``[0, i_max]``.
    """
    px = np.asarray(pixels, dtype=np.int64)
    if px.size and (px.min() < 0 or px.max() > cfg.i_max):
        bad = px[(px < 0) | (px > cfg.i_max)][0]
        raise ValueError(f"pixel intensity {bad} outside [0, {cfg.i_max}]")
    steps = (cfg.i_max - px) * cfg.t_max // cfg.i_max
    return SpikeTimes(steps, np.ones(px.shape, dtype=bool))


def encode_batch(pixel_matrix, cfg: EncodingConfig) -> np.ndarray:
    """Encode a whole ``[n_samples, n_pixels]`` intensity matrix at once,
    returning the ``[n_samples, n_pixels]`` int64 step matrix."""
    px = np.asarray(pixel_matrix, dtype=np.int64)
    if px.size and (px.min() < 0 or px.max() > cfg.i_max):
        raise ValueError(f"pixel intensities outside [0, {cfg.i_max}]")
    return (cfg.i_max - px) * cfg.t_max // cfg.i_max


def decode_step_events(times: SpikeTimes, t: int) -> np.ndarray:
    """Indices of neurons spiking exactly at step ``t``, ascending."""
    return np.nonzero(times.steps == t)[0]
