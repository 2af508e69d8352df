"""Benchmark (shared latent rate) and operational (independent rates) models
of a replication sequence.

The benchmark model gives the count of replicated results ``X`` out of ``m``
a Betabinomial distribution with mean ``mu`` and intraclass correlation
``rho``. The operational model gives each experiment its own rate, with
``k_i`` exact replications inside experiment ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .specfun import beta_shape_from_mean_icc


@dataclass(frozen=True)
class SequenceParams:
    """Mean replicability rate, intraclass correlation and replication count."""

    mu: float
    rho: float
    m: int

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class OperationalDesign:
    """Per-experiment exact-replication counts ``k_i``."""

    k: tuple

    def __init__(self, k: Sequence[float]):
        k = tuple(float(v) if np.isinf(v) else v for v in k)
        if len(k) == 0:
            raise ValueError("design needs at least one experiment")
        if any(v < 1 for v in k):
            raise ValueError("every k_i must be >= 1")
        object.__setattr__(self, "k", k)

    @property
    def m(self) -> int:
        return len(self.k)


@dataclass(frozen=True)
class TwoPointMixture:
    """Rate equal to ``mu + delta`` or ``mu - delta`` with probability 1/2 each."""

    mu: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (0.0 < self.mu - self.delta and self.mu + self.delta < 1.0):
            raise ValueError("mu +/- delta must stay inside (0, 1)")


def betabinomial_logpmf(x, m, mu, rho):
    """Vectorised log PMF of the benchmark model for 0 < rho < 1.

    All arguments broadcast. Uses log-beta ratios so large ``m`` is safe.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    nu = (1.0 - rho) / rho
    a = mu * nu
    b = (1.0 - mu) * nu
    logc = special.gammaln(m + 1.0) - special.gammaln(x + 1.0) - special.gammaln(m - x + 1.0)
    return logc + special.betaln(x + a, m - x + b) - special.betaln(a, b)


def _binomial_logpmf_vector(m: int, mu: float) -> np.ndarray:
    xs = np.arange(m + 1, dtype=float)
    logc = special.gammaln(m + 1.0) - special.gammaln(xs + 1.0) - special.gammaln(m - xs + 1.0)
    return logc + special.xlogy(xs, mu) + special.xlog1py(m - xs, -mu)


def _binomial_pmf_vector(m: int, mu: float) -> np.ndarray:
    return np.exp(_binomial_logpmf_vector(m, mu))


def _log_rising_ratio(m: int, base: float, nu: float) -> np.ndarray:
    """``sum_{j<x} log1p(j / (nu * base))`` for x = 0..m."""
    j = np.arange(m, dtype=float)
    return np.concatenate(([0.0], np.cumsum(np.log1p(j / (nu * base)))))


def pmf_vector(params: SequenceParams) -> np.ndarray:
    """Full PMF of the replicated count over x = 0..m.

    Written as the binomial PMF times ratios of rising factorials, each
    accumulated through log1p terms, so it stays accurate as rho -> 0 where
    the log-beta form cancels catastrophically.
    """
    mu, rho, m = params.mu, params.rho, int(params.m)
    if rho == 0.0 or mu in (0.0, 1.0) or m == 1:
        # a single outcome is Bernoulli(mu) whatever rho is
        return _binomial_pmf_vector(m, mu)
    if rho == 1.0:
        out = np.zeros(m + 1)
        out[0] += 1.0 - mu
        out[m] += mu
        return out
    beta_shape_from_mean_icc(mu, rho)
    nu = (1.0 - rho) / rho
    xs = np.arange(m + 1)
    up = _log_rising_ratio(m, mu, nu)
    down = _log_rising_ratio(m, 1.0 - mu, nu)
    total = _log_rising_ratio(m, 1.0, nu)[m]
    logp = _binomial_logpmf_vector(m, mu) + up[xs] + down[m - xs] - total
    return np.exp(logp)


def betabinomial_pmf(params: SequenceParams, x: int) -> float:
    """P(X = x) under the benchmark model.

    ``rho = 0`` reduces to Binomial(m, mu) and ``rho = 1`` to a two-point
    law on {0, m}.
    """
    if int(x) != x or x < 0 or x > params.m:
        raise ValueError(f"x must be an integer in [0, {params.m}], got {x}")
    return float(pmf_vector(params)[int(x)])


def benchmark_variance(params: SequenceParams) -> float:
    """Variance of ``X / m`` under the benchmark model."""
    mu, rho, m = params.mu, params.rho, params.m
    return mu * (1.0 - mu) * (1.0 / m + (m - 1.0) / m * rho)


def variance_floor(mu: float, rho: float) -> float:
    """Limit of the benchmark variance as m grows without bound."""
    return mu * (1.0 - mu) * rho


def two_point_icc(mix: TwoPointMixture) -> float:
    return mix.delta ** 2 / (mix.mu * (1.0 - mix.mu))


def operational_variance(mu: float, rho: float, design: OperationalDesign) -> float:
    """Variance of the mean of per-experiment proportions ``X_i / k_i``.

    Infinite ``k_i`` are allowed and contribute no binomial noise.
    """
    m = design.m
    inv_k = sum(0.0 if np.isinf(k) else 1.0 / k for k in design.k)
    return mu * (1.0 - mu) * ((1.0 - rho) / m ** 2 * inv_k + rho / m)


def excess_variance(mu: float, rho: float, k: int, m: int) -> float:
    """Operational variance at uniform finite ``k`` minus its k -> infinity limit."""
    return mu * (1.0 - mu) * (1.0 - rho) / (m * k)


def effective_sample_size(m: float, rho: float) -> float:
    """Number of exact replications carrying the same information, unrounded."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    return m / (1.0 + (m - 1.0) * rho)


def operational_verdict_loglik(verdicts: Sequence[int], mu: float, rho: float) -> float:
    """Log likelihood of one binary verdict per experiment under the operational model.

    Experiments are independent and each verdict is Betabinomial(1, mu, rho).
    """
    p1 = betabinomial_pmf(SequenceParams(mu, rho, 1), 1)
    v = np.asarray(verdicts, dtype=int)
    if np.any((v != 0) & (v != 1)):
        raise ValueError("verdicts must be 0 or 1")
    s = int(v.sum())
    return float(special.xlogy(s, p1) + special.xlog1py(v.size - s, -p1))
