"""Effect-size reanalysis of a multi-site replication sequence.

Pipeline: Hedges' g per site -> Normal-Inverse-Gamma posterior on the
between-site mean and variance -> Monte Carlo propagation of each posterior
draw to (mu, rho) through ``phi_i = Phi(theta_i / SE_i)`` -> HDI summaries
and group contrasts.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .discrim import HdiInterval
from .hetero import panel_range
from .specfun import bivariate_normal_cdf, normal_cdf

logger = logging.getLogger(__name__)

DEFAULT_DRAWS = 300_000
DEFAULT_SEED = 20240601
BLOCK_SIZE = 50_000
PROTOCOLS = ("AA", "IH", "REFERENCE")
GROUPS = ("ml4", "ml4+ref", "aa", "ih", "aa+ref", "ih+ref")

REFERENCE_D = 1.34
REFERENCE_N1 = 12
REFERENCE_N2 = 11


@dataclass(frozen=True)
class EffectSizeRecord:
    site_id: str
    g: float
    n1: int
    n2: int
    protocol: str

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError(f"site {self.site_id}: group sizes must be >= 2")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"site {self.site_id}: unknown protocol {self.protocol!r}")


@dataclass(frozen=True)
class SufficientStats:
    m: int
    mean_g: float
    ss: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.ss < 0:
            raise ValueError("sum of squares must be non-negative")

    @classmethod
    def from_values(cls, g: Sequence[float]) -> "SufficientStats":
        g = np.asarray(g, dtype=float)
        mean = float(g.mean())
        return cls(g.size, mean, float(np.sum((g - mean) ** 2)))

    @classmethod
    def from_summary(cls, m: int, mean_g: float, sd_g: float) -> "SufficientStats":
        return cls(int(m), float(mean_g), (m - 1) * float(sd_g) ** 2)


@dataclass(frozen=True)
class NigHyper:
    mu0: float = 0.0
    kappa0: float = 0.0
    alpha0: float = 0.0
    beta0: float = 0.0

    def __post_init__(self):
        if min(self.kappa0, self.alpha0, self.beta0) < 0:
            raise ValueError("kappa0, alpha0 and beta0 must be non-negative")

    @property
    def is_jeffreys(self) -> bool:
        return self.kappa0 == 0 and self.alpha0 == 0 and self.beta0 == 0


JEFFREYS = NigHyper()
WEAKLY_INFORMATIVE = NigHyper(mu0=0.0, kappa0=1.0, alpha0=1.0, beta0=1.0)
PRIORS = {"jeffreys": JEFFREYS, "weak": WEAKLY_INFORMATIVE}


@dataclass(frozen=True)
class NigPosterior:
    kappa_n: float
    mu_n: float
    alpha_n: float
    beta_n: float

    def __post_init__(self):
        if not (self.kappa_n > 0 and self.alpha_n > 0 and self.beta_n > 0):
            raise ValueError("posterior parameters must be positive")

    def theta_marginal(self) -> Tuple[float, float, float]:
        """(df, loc, scale) of the Student-t marginal of theta."""
        return 2 * self.alpha_n, self.mu_n, math.sqrt(self.beta_n / (self.alpha_n * self.kappa_n))


@dataclass
class MuRhoDraws:
    """Posterior draws of (mu, rho); ``rho`` is NaN where mu is exactly 0 or 1."""

    mu: np.ndarray
    rho: np.ndarray
    seed: int
    n_clamped: int = 0
    n_degenerate: int = 0

    @property
    def S(self) -> int:
        return int(self.mu.size)

    @property
    def rho_defined(self) -> np.ndarray:
        return self.rho[~np.isnan(self.rho)]


def hedges_from_cohen(d: float, n1: int, n2: int) -> float:
    """Small-sample corrected standardized mean difference ``J * d``."""
    nu = n1 + n2 - 2
    if nu < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {nu}")
    return (1.0 - 3.0 / (4.0 * nu - 1.0)) * d


def se_hedges(rec: EffectSizeRecord) -> float:
    n1, n2, g = rec.n1, rec.n2, rec.g
    return math.sqrt((n1 + n2) / (n1 * n2) + g * g / (2.0 * (n1 + n2 - 2)))


def reference_record() -> EffectSizeRecord:
    """The original study on the Hedges' g scale."""
    g = hedges_from_cohen(REFERENCE_D, REFERENCE_N1, REFERENCE_N2)
    return EffectSizeRecord("reference", g, REFERENCE_N1, REFERENCE_N2, "REFERENCE")


def nig_update(stats: SufficientStats, hyper: NigHyper) -> NigPosterior:
    """Conjugate Normal-Inverse-Gamma update; the all-zero hyper is the Jeffreys limit."""
    m, gbar, ss = stats.m, stats.mean_g, stats.ss
    if hyper.is_jeffreys and m < 2:
        raise ValueError("Jeffreys posterior is improper with fewer than 2 observations")
    kappa_n = hyper.kappa0 + m
    mu_n = (hyper.kappa0 * hyper.mu0 + m * gbar) / kappa_n
    alpha_n = hyper.alpha0 + m / 2.0
    beta_n = hyper.beta0 + ss / 2.0 + hyper.kappa0 * m * (gbar - hyper.mu0) ** 2 / (2.0 * kappa_n)
    return NigPosterior(kappa_n, mu_n, alpha_n, beta_n)


def _block_generators(seed: int, S: int, salt: int):
    """Independent PCG64 streams, one per fixed-size block of draws."""
    n_blocks = -(-S // BLOCK_SIZE)
    children = np.random.SeedSequence([seed, salt]).spawn(n_blocks)
    for i, child in enumerate(children):
        size = min(BLOCK_SIZE, S - i * BLOCK_SIZE)
        yield size, np.random.Generator(np.random.PCG64(child))


def nig_sample(post: NigPosterior, S: int = DEFAULT_DRAWS,
               seed: int = DEFAULT_SEED) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``(theta, sigma2)``: sigma2 ~ InvGamma(alpha_n, beta_n), theta | sigma2 ~ N(mu_n, sigma2 / kappa_n)."""
    theta = np.empty(S)
    sigma2 = np.empty(S)
    pos = 0
    for size, rng in _block_generators(seed, S, salt=0):
        s2 = 1.0 / rng.gamma(post.alpha_n, 1.0 / post.beta_n, size)
        sigma2[pos:pos + size] = s2
        theta[pos:pos + size] = rng.normal(post.mu_n, np.sqrt(s2 / post.kappa_n))
        pos += size
    return theta, sigma2


def propagate_mu_rho(theta: np.ndarray, sigma2: np.ndarray, se_list: Sequence[float],
                     seed: int = DEFAULT_SEED) -> MuRhoDraws:
    """Map posterior draws to (mu, rho) by simulating one effect per site.

    For each draw, ``theta_i ~ N(theta, sigma2)`` for every site, then
    ``phi_i = Phi(theta_i / SE_i)``; mu is the mean of the phi_i and rho their
    variance (divisor m) over ``mu (1 - mu)``.
    """
    theta = np.asarray(theta, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    se = np.asarray(se_list, dtype=float)
    if se.ndim != 1 or se.size < 1 or np.any(se <= 0):
        raise ValueError("se_list must be a non-empty list of positive values")
    if theta.shape != sigma2.shape:
        raise ValueError("theta and sigma2 draws must have equal length")
    S = theta.size
    mu = np.empty(S)
    rho = np.empty(S)
    pos = 0
    for size, rng in _block_generators(seed, S, salt=1):
        sl = slice(pos, pos + size)
        z = rng.standard_normal((size, se.size))
        effects = theta[sl, None] + np.sqrt(sigma2[sl, None]) * z
        phi = normal_cdf(effects / se[None, :])
        mu[sl] = phi.mean(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            rho[sl] = phi.var(axis=1) / (mu[sl] * (1.0 - mu[sl]))
        pos += size
    degenerate = (mu <= 0.0) | (mu >= 1.0)
    rho[degenerate] = np.nan
    over = rho > 1.0
    under = rho < 0.0
    n_clamped = int(over.sum() + under.sum())
    rho[over] = 1.0
    rho[under] = 0.0
    n_deg = int(degenerate.sum())
    if n_deg:
        logger.info("%d of %d draws have mu in {0, 1}; rho left undefined", n_deg, S)
    if n_clamped:
        logger.info("%d of %d rho draws clamped to [0, 1]", n_clamped, S)
    return MuRhoDraws(mu, rho, seed, n_clamped, n_deg)


def propagate_mu_rho_expected(theta: np.ndarray, sigma2: np.ndarray,
                              se_list: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-check mode: replace the per-draw site simulation by its expectation.

    For each posterior draw, ``E[phi_i] = Phi(theta / sqrt(SE_i^2 + sigma2))``
    and ``E[phi_i^2]`` is a bivariate normal orthant probability, averaged over
    sites. Slow (one bivariate CDF per site and draw); meant for a few
    thousand draws.
    """
    se = np.asarray(se_list, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    mu = np.empty(theta.size)
    rho = np.empty(theta.size)
    for s in range(theta.size):
        total = np.sqrt(se ** 2 + sigma2[s])
        h = theta[s] / total
        r = sigma2[s] / total ** 2
        m1 = float(np.mean(normal_cdf(h)))
        m2 = float(np.mean([bivariate_normal_cdf(hi, hi, ri) for hi, ri in zip(h, r)]))
        mu[s] = m1
        rho[s] = (m2 - m1 * m1) / (m1 * (1.0 - m1)) if 0.0 < m1 < 1.0 else np.nan
    return mu, rho


def hdi_continuous(draws: Sequence[float], level: float = 0.95) -> HdiInterval:
    """Shortest interval holding ``ceil(level * S)`` of the sorted draws."""
    x = np.asarray(draws, dtype=float)
    x = np.sort(x[~np.isnan(x)])
    S = x.size
    if S < 1000:
        raise ValueError(f"need at least 1000 draws for an HDI, got {S}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    k = int(math.ceil(level * S))
    widths = x[k - 1:] - x[:S - k + 1]
    i = int(np.argmin(widths))
    lo, hi = float(x[i]), float(x[i + k - 1])
    if lo < 0.0 or hi > 1.0:
        # general real-valued draws: report bounds as they are
        return _RealInterval(level, lo, hi, k / S)
    return HdiInterval(level, lo, hi, k / S)


@dataclass(frozen=True)
class _RealInterval(HdiInterval):
    """HDI over draws that may leave [0, 1], such as differences of rates."""

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower bound above upper bound")


@dataclass(frozen=True)
class Contrast:
    mean_diff: float
    hdi: HdiInterval
    exceedance: float


def group_contrast(draws_a: MuRhoDraws, draws_b: MuRhoDraws, level: float = 0.95) -> Contrast:
    """Posterior of ``rho_b - rho_a`` with draws paired by index.

    The exceedance is P(rho_b > rho_a), with exact ties counted as one half.
    """
    if draws_a.S != draws_b.S:
        raise ValueError(f"draw counts differ: {draws_a.S} vs {draws_b.S}")
    diff = draws_b.rho - draws_a.rho
    diff = diff[~np.isnan(diff)]
    exceed = float(np.mean(diff > 0) + 0.5 * np.mean(diff == 0))
    return Contrast(float(diff.mean()), hdi_continuous(diff, level), exceed)


# ---------------------------------------------------------------- data ingest

def load_records(path) -> List[EffectSizeRecord]:
    """Read site records from CSV with columns site_id, g, n1, n2, protocol."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        need = {"site_id", "g", "n1", "n2", "protocol"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(need)}")
        out = []
        for row in reader:
            try:
                out.append(EffectSizeRecord(row["site_id"], float(row["g"]), int(row["n1"]),
                                            int(row["n2"]), row["protocol"].strip().upper()))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad row {row}: {exc}") from None
    if not out:
        raise ValueError(f"{path}: no records")
    return out


def load_summary(path) -> Dict[str, Tuple[SufficientStats, float]]:
    """Read group summaries from CSV with columns group, m, mean_g, sd_g[, se].

    ``se`` is a common per-site standard error used for propagation when no
    site-level data exist (default 1, the large-n mapping).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        need = {"m", "mean_g", "sd_g"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(need)}")
        out = {}
        for i, row in enumerate(reader):
            group = (row.get("group") or f"row{i}").strip().lower()
            try:
                stats = SufficientStats.from_summary(int(row["m"]), float(row["mean_g"]),
                                                     float(row["sd_g"]))
                se = float(row.get("se") or 1.0)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad row {row}: {exc}") from None
            out[group] = (stats, se)
    if not out:
        raise ValueError(f"{path}: no rows")
    return out


def bundled_path(name: str) -> Path:
    """Path of a CSV shipped in ``replicability/data``."""
    return Path(str(resources.files("replicability") / "data" / name))


def select_group(records: Iterable[EffectSizeRecord], group: str) -> List[EffectSizeRecord]:
    """Sites belonging to a named group; ``+ref`` appends the reference study.

    The reference row is taken from the records when present, else built from
    the reference d = 1.34 and group sizes 12 and 11.
    """
    group = group.lower()
    if group not in GROUPS:
        raise ValueError(f"unknown group {group!r}; choose from {', '.join(GROUPS)}")
    records = list(records)
    base, _, ref = group.partition("+")
    sites = [r for r in records if r.protocol != "REFERENCE"]
    if base == "aa":
        sites = [r for r in sites if r.protocol == "AA"]
    elif base == "ih":
        sites = [r for r in sites if r.protocol == "IH"]
    if ref:
        refs = [r for r in records if r.protocol == "REFERENCE"]
        sites.append(refs[0] if refs else reference_record())
    if not sites:
        raise ValueError(f"group {group!r} has no sites")
    return sites


@dataclass
class GroupResult:
    group: str
    prior: str
    m: int
    posterior: NigPosterior
    draws: MuRhoDraws
    level: float = 0.95
    summary: dict = field(default_factory=dict)


def analyze(values: Sequence[float], se_list: Sequence[float], prior: str = "jeffreys",
            group: str = "custom", S: int = DEFAULT_DRAWS, seed: int = DEFAULT_SEED,
            level: float = 0.95, stats: Optional[SufficientStats] = None) -> GroupResult:
    """Full chain for one group: NIG update, sampling, propagation and summary."""
    if prior not in PRIORS:
        raise ValueError(f"unknown prior {prior!r}; choose from {', '.join(PRIORS)}")
    stats = stats if stats is not None else SufficientStats.from_values(values)
    post = nig_update(stats, PRIORS[prior])
    theta, sigma2 = nig_sample(post, S, seed)
    draws = propagate_mu_rho(theta, sigma2, se_list, seed)
    mu_hdi = hdi_continuous(draws.mu, level)
    rho_hdi = hdi_continuous(draws.rho, level)
    summary = {
        "group": group, "prior": prior, "m": stats.m,
        "mu_mean": float(draws.mu.mean()), "mu_hdi_lo": mu_hdi.lower, "mu_hdi_hi": mu_hdi.upper,
        "rho_mean": float(np.nanmean(draws.rho)),
        "rho_hdi_lo": rho_hdi.lower, "rho_hdi_hi": rho_hdi.upper,
        "panel_range": panel_range(rho_hdi.lower, rho_hdi.upper),
        "S": S, "seed": seed,
        "n_clamped": draws.n_clamped, "n_degenerate": draws.n_degenerate,
    }
    return GroupResult(group, prior, stats.m, post, draws, level, summary)


def analyze_records(records: Sequence[EffectSizeRecord], group: str, prior: str = "jeffreys",
                    S: int = DEFAULT_DRAWS, seed: int = DEFAULT_SEED,
                    level: float = 0.95) -> GroupResult:
    sites = select_group(records, group)
    g = [r.g for r in sites]
    se = [se_hedges(r) for r in sites]
    return analyze(g, se, prior, group, S, seed, level)
