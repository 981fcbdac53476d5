import math

import numpy as np
import pytest

from hyperalloc.delays import (
    DelaySum,
    ErlangDelay,
    ExponentialDelay,
    combine_delay_sums,
    delay_mean,
    delay_sum,
    delay_variance,
    exp_to_erlang_sum,
    sample_delay,
    substream,
)


def test_exponential_moments():
    d = ExponentialDelay(4.0)
    assert d.mean == 0.25
    assert d.variance == 0.0625
    with pytest.raises(ValueError):
        ExponentialDelay(0.0)
    with pytest.raises(ValueError):
        ExponentialDelay(-1.0)


def test_erlang_moments():
    d = ErlangDelay(7, 8.0)
    assert d.mean == 7 / 8
    assert d.variance == 7 / 64
    with pytest.raises(ValueError):
        ErlangDelay(0, 1.0)
    with pytest.raises(ValueError):
        ErlangDelay(2, 0.0)


def test_exp_to_erlang_sum():
    assert exp_to_erlang_sum(3, 2.0) == ErlangDelay(3, 2.0)


def test_delay_sum_canonical_form():
    # equal rates merge, terms sort by rate
    s = delay_sum(1.0, [ErlangDelay(2, 4.0), ErlangDelay(1, 2.0), ErlangDelay(3, 4.0)])
    assert s.constant == 1.0
    assert s.terms == (ErlangDelay(1, 2.0), ErlangDelay(5, 4.0))
    assert delay_sum() == DelaySum(0.0, ())


def test_combine_delay_sums():
    a = delay_sum(1.0, [ErlangDelay(2, 4.0)])
    b = delay_sum(0.5, [ErlangDelay(1, 4.0), ErlangDelay(1, 8.0)])
    c = combine_delay_sums(a, b)
    assert c.constant == 1.5
    assert c.terms == (ErlangDelay(3, 4.0), ErlangDelay(1, 8.0))


def test_mean_and_variance_add():
    s = delay_sum(2.0, [ErlangDelay(2, 4.0), ErlangDelay(1, 2.0)])
    assert delay_mean(s) == 2.0 + 2 / 4 + 1 / 2
    assert delay_variance(s) == 2 / 16 + 1 / 4


def test_sampling_is_reproducible():
    s = delay_sum(1.0, [ErlangDelay(4, 2.0), ErlangDelay(2, 8.0)])
    a = [sample_delay(s, substream(123, "x")) for _ in range(3)]
    b = [sample_delay(s, substream(123, "x")) for _ in range(3)]
    assert a == b
    assert a[0] != sample_delay(s, substream(123, "y"))
    assert a[0] != sample_delay(s, substream(124, "x"))
    assert all(v > 1.0 for v in a)  # constant is a hard floor


def test_substream_key_kinds():
    assert substream(5, 1, 2).random() == substream(5, 1, 2).random()
    assert substream(5, "a", 0).random() == substream(5, "a", 0).random()
    assert substream(5, 1, 2).random() != substream(5, 2, 1).random()


def test_sample_mean_tracks_distribution():
    s = delay_sum(0.5, [ErlangDelay(6, 3.0)])
    rng = substream(99, "mean-check")
    draws = np.array([sample_delay(s, rng) for _ in range(4000)])
    se = math.sqrt(delay_variance(s) / len(draws))
    assert abs(draws.mean() - delay_mean(s)) < 5 * se
