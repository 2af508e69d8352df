"""Highest density intervals of the estimated mean rate and separability checks.

The estimator ``X / m`` lives on the discrete support {0, 1/m, ..., 1}. An
HDI here is the shortest contiguous run of support points whose benchmark
mass reaches the requested level. Ties between runs of equal length go to
the run with more mass, then to the one that starts lower.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .seqmodels import SequenceParams, benchmark_variance, pmf_vector
from .specfun import normal_ppf

# Float slack when comparing accumulated mass with the target level.
_MASS_EPS = 1e-12

HDI_TIE_RULE = "shortest contiguous run; ties -> larger mass, then lower start"


@dataclass(frozen=True)
class HdiInterval:
    level: float
    lower: float
    upper: float
    attained_mass: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")
        if self.attained_mass < self.level - 1e-9:
            raise ValueError("attained mass below the requested level")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class SeparablePair:
    mu_low: float
    mu_high: float
    gap: float
    hdi_low: HdiInterval
    hdi_high: HdiInterval


def _shortest_run(p: np.ndarray, level: float):
    """Return (start, stop_inclusive, mass) of the HDI run over PMF ``p``."""
    n = p.size
    cum = np.concatenate(([0.0], np.cumsum(p)))
    target = level - _MASS_EPS

    def window_masses(length):
        return cum[length:] - cum[:-length]

    # the best window mass is non-decreasing in the window length
    lo, hi = 1, n
    while lo < hi:
        mid = (lo + hi) // 2
        if window_masses(mid).max() >= target:
            hi = mid
        else:
            lo = mid + 1
    masses = window_masses(lo)
    # argmax returns the first maximum, i.e. the lowest start on ties
    i = int(np.argmax(masses))
    return i, i + lo - 1, float(masses[i])


def sampling_hdi(params: SequenceParams, level: float = 0.95) -> HdiInterval:
    """HDI of the sampling distribution of ``X / m`` under the benchmark model."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    p = pmf_vector(params)
    lo, hi, mass = _shortest_run(p, level)
    m = params.m
    return HdiInterval(level, lo / m, hi / m, min(mass, 1.0))


def hdi_grid(mu_grid: Iterable[float], rho: float, m_list: Iterable[int],
             level: float = 0.95) -> List[dict]:
    """One HDI per (m, mu) cell, ordered by m then mu."""
    mu_grid = list(mu_grid)
    m_list = list(m_list)
    if not m_list:
        raise ValueError("m_list must not be empty")
    if not mu_grid:
        raise ValueError("mu_grid must not be empty")
    rows = []
    for m in m_list:
        for mu in mu_grid:
            h = sampling_hdi(SequenceParams(mu, rho, m), level)
            rows.append({"mu": mu, "rho": rho, "m": m, "level": level,
                         "lower": h.lower, "upper": h.upper,
                         "attained_mass": h.attained_mass})
    return rows


def intervals_separated(a: HdiInterval, b: HdiInterval) -> bool:
    """True when the two intervals share no point."""
    return max(a.lower, b.lower) > min(a.upper, b.upper)


def minimal_separable_pair(m: int, rho: float, level: float = 0.95,
                           tolerance: float = 1e-3) -> Optional[SeparablePair]:
    """Closest symmetric pair (1 - mu, mu) whose HDIs do not overlap.

    ``mu`` is scanned upward from 0.5 on the grid ``0.5 + j * tolerance``.
    Returns None when even the outermost grid pair overlaps.
    """
    if tolerance <= 0 or tolerance >= 0.5:
        raise ValueError("tolerance must lie in (0, 0.5)")
    steps = int(np.floor(0.5 / tolerance + 1e-9))
    for j in range(1, steps):
        mu_hi = round(0.5 + j * tolerance, 12)
        if mu_hi >= 1.0:
            break
        mu_lo = round(1.0 - mu_hi, 12)
        high = sampling_hdi(SequenceParams(mu_hi, rho, m), level)
        low = sampling_hdi(SequenceParams(mu_lo, rho, m), level)
        if intervals_separated(low, high):
            return SeparablePair(mu_lo, mu_hi, high.lower - low.upper, low, high)
    return None


def normal_interval_width(params: SequenceParams, level: float = 0.95) -> float:
    """Width of the central normal-theory interval for ``X / m``.

    ``2 * z * sqrt(benchmark_variance)``; as m grows this tends to
    ``2 * z * sqrt(mu * (1 - mu) * rho)``.
    """
    z = float(normal_ppf(0.5 + level / 2.0))
    return 2.0 * z * float(np.sqrt(benchmark_variance(params)))
