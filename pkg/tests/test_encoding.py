"""Latency-encoding tests.

Oracle: the integer encoding must equal ``floor((i_max - I) / i_max * t_max)``
computed in exact rational arithmetic, for every intensity.
"""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spikebp.encoding import (
    EncodingConfig,
    SpikeTimes,
    decode_step_events,
    encode_batch,
    encode_image,
)


def oracle_encode(intensity: int, i_max: int, t_max: int) -> int:
    return int(Fraction((i_max - intensity) * t_max, i_max))  # floor for >= 0


def test_encode_examples():
    cfg = EncodingConfig(i_max=15, t_max=15)
    assert encode_image(np.array([15, 0, 7]), cfg).steps.tolist() == [0, 15, 8]
    cfg255 = EncodingConfig(i_max=255, t_max=15)
    assert encode_image(np.array([255]), cfg255).steps.tolist() == [0]
    assert encode_image(np.array([0]), cfg255).steps.tolist() == [15]
    assert encode_image(np.array([128]), cfg255).steps.tolist() == [7]


@pytest.mark.parametrize("i_max,t_max", [(15, 15), (255, 15), (255, 255), (16, 7)])
def test_encode_matches_rational_oracle(i_max, t_max):
    cfg = EncodingConfig(i_max=i_max, t_max=t_max)
    pix = np.arange(i_max + 1)
    got = encode_image(pix, cfg).steps
    want = [oracle_encode(int(p), i_max, t_max) for p in pix]
    assert got.tolist() == want


@given(
    st.integers(min_value=0, max_value=255),
    st.integers(min_value=0, max_value=255),
)
def test_encoding_monotone(a, b):
    """Brighter pixels never spike later than darker ones."""
    cfg = EncodingConfig(i_max=255, t_max=15)
    ta, tb = encode_image(np.array([a, b]), cfg).steps
    if a >= b:
        assert ta <= tb
    assert 0 <= ta <= 15 and 0 <= tb <= 15


def test_encode_extremes_and_range(rng):
    cfg = EncodingConfig(i_max=255, t_max=15)
    pix = rng.integers(0, 256, size=1000)
    t = encode_image(pix, cfg).steps
    assert t.min() >= 0 and t.max() <= 15
    assert encode_image(np.array([255]), cfg).steps[0] == 0
    assert encode_image(np.array([0]), cfg).steps[0] == 15


def test_encode_rejects_out_of_range():
    cfg = EncodingConfig(i_max=15, t_max=15)
    with pytest.raises(ValueError):
        encode_image(np.array([16]), cfg)
    with pytest.raises(ValueError):
        encode_image(np.array([-1]), cfg)


def test_encode_batch_matches_per_image(rng):
    cfg = EncodingConfig(i_max=255, t_max=15)
    imgs = rng.integers(0, 256, size=(11, 64))
    batch = encode_batch(imgs, cfg)
    assert batch.shape == (11, 64)
    assert batch.dtype == np.int64
    for i in range(11):
        assert np.array_equal(batch[i], encode_image(imgs[i], cfg).steps)


def test_single_spike_per_pixel(rng):
    """Every pixel emits exactly one spike across the window."""
    cfg = EncodingConfig(i_max=255, t_max=15)
    pix = rng.integers(0, 256, size=64)
    st_ = encode_image(pix, cfg)
    seen = np.zeros(64, dtype=int)
    for t in range(16):
        seen[decode_step_events(st_, t)] += 1
    assert seen.tolist() == [1] * 64


def test_decode_step_events_examples():
    st_ = SpikeTimes(np.array([0, 15, 8]))
    assert decode_step_events(st_, 8).tolist() == [2]
    assert decode_step_events(st_, 3).tolist() == []
    st_all = SpikeTimes(np.array([5, 5, 5]))
    assert decode_step_events(st_all, 5).tolist() == [0, 1, 2]


def test_spike_times_fired_default_and_validation():
    st_ = SpikeTimes(np.array([1, 2, 3]))
    assert st_.fired.all() and len(st_) == 3
    with pytest.raises(ValueError):
        SpikeTimes(np.array([1, 2]), fired=np.array([True]))


def test_encoding_config_validation():
    with pytest.raises(ValueError):
        EncodingConfig(i_max=0, t_max=15)
    with pytest.raises(ValueError):
        EncodingConfig(i_max=255, t_max=0)
