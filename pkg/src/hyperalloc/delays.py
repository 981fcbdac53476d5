"""Exponential and Erlang delay arithmetic plus seeded sampling streams.

A transmission delay is a constant offset plus independent Erlang terms
(each the sum of iid exponential draws at one rate).  Sums are kept in a
canonical form: terms with equal rates are merged and the term list is
sorted by rate, so equal distributions compare equal and sampling order
is reproducible.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExponentialDelay:
    """Exponentially distributed delay with the given rate."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def variance(self) -> float:
        return 1.0 / (self.rate * self.rate)


@dataclass(frozen=True)
class ErlangDelay:
    """Sum of ``shape`` iid exponential delays at ``rate``."""

    shape: int
    rate: float

    def __post_init__(self):
        if not isinstance(self.shape, int) or self.shape < 1:
            raise ValueError(f"shape must be a positive integer, got {self.shape}")
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / (self.rate * self.rate)


@dataclass(frozen=True)
class DelaySum:
    """Constant offset plus independent Erlang terms (canonical form)."""

    constant: float = 0.0
    terms: tuple = ()


def exp_to_erlang_sum(n: int, rate: float) -> ErlangDelay:
    """Erlang distribution of the sum of n iid Exponential(rate) delays."""
    return ErlangDelay(n, rate)


def delay_sum(constant: float = 0.0, terms=()) -> DelaySum:
    """Build a canonical DelaySum: equal rates merged, terms sorted by rate."""
    if constant < 0:
        raise ValueError(f"constant offset must be non-negative, got {constant}")
    by_rate = {}
    for t in terms:
        if not isinstance(t, ErlangDelay):
            raise ValueError(f"terms must be ErlangDelay, got {t!r}")
        by_rate[t.rate] = by_rate.get(t.rate, 0) + t.shape
    merged = tuple(ErlangDelay(by_rate[r], r) for r in sorted(by_rate))
    return DelaySum(float(constant), merged)


def combine_delay_sums(a: DelaySum, b: DelaySum) -> DelaySum:
    """Sum of two independent delays, renormalised to canonical form."""
    return delay_sum(a.constant + b.constant, a.terms + b.terms)


def delay_mean(d: DelaySum) -> float:
    return d.constant + sum(t.mean for t in d.terms)


def delay_variance(d: DelaySum) -> float:
    return sum(t.variance for t in d.terms)


def sample_delay(d: DelaySum, rng: np.random.Generator) -> float:
    """One draw from the delay distribution using the caller's generator.

    Each Erlang term consumes exactly ``shape`` exponential draws in
    canonical term order, so identical generator states yield identical
    samples.
    """
    total = d.constant
    for t in d.terms:
        total += float(rng.exponential(1.0 / t.rate, t.shape).sum())
    return total


def _entropy_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0x7FFFFFFFFFFFFFFF


def substream(seed, *keys) -> np.random.Generator:
    """Deterministic child generator for (seed, keys).

    Sampling paths are pure functions of the seed and the key tuple; no
    global generator state is involved.  String keys are hashed stably.
    """
    entropy = [_entropy_int(seed)] + [_entropy_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
