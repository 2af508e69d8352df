"""Forward maps from generative sources of non-exactness to (mu, rho).

Population heterogeneity: lab effects ``theta_i ~ N(theta, sigma^2)`` tested
with standard error ``se``; an experiment replicates when its estimate is
positive, so ``phi_i = Phi(theta_i / se)``.

Delivery heterogeneity: labs deliver a standardized stimulus
``u + delta_i`` with ``delta_i ~ N(bias, noise^2)`` (both already divided by
the psychometric slope). For large n the rate is ``Phi(u + delta_i)``; at
finite n it is the power of a one-sided exact binomial test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .specfun import binomial_lower_tail, binomial_tail, bivariate_normal_cdf, normal_cdf

FIGURE1_PANELS = (("A", 0.0), ("B", 0.05), ("C", 0.10), ("D", 0.15), ("E", 0.20), ("F", 0.25))
PANEL_RULE = "nearest panel rho (A=0 .. F=0.25), cutoffs at midpoints, ties to lower; '~A' below 0.025, '>F' above 0.275"

TABLE1_THETAS = (2.5, 2.0, 1.0, 0.1)
TABLE1_SIGMAS = (0.25, 0.50, 0.75, 1.50)
TABLE2_BIASES = (1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5)
TABLE2_NOISES = (0.25, 0.50, 0.75, 1.50)

# mean rates closer than this to 0 or 1 leave rho numerically undefined
DEGENERATE_MU_TOL = 1e-9

# composite Gauss-Legendre over z in [-Z_SPAN, Z_SPAN] for E[f(bias + noise * Z)]
Z_SPAN = 10.0
GL_ORDER = 20
DEFAULT_PANELS = 64
CONVERGENCE_TOL = 1e-6


class ConvergenceError(ArithmeticError):
    """A numerical integral did not settle under refinement."""


@dataclass(frozen=True)
class PopulationScenario:
    theta: float
    sigma: float
    se: float = 1.0

    def __post_init__(self):
        if not self.se > 0:
            raise ValueError("se must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class DeliveryScenario:
    u: float
    bias: float
    noise: float
    n: Optional[int] = None
    critical: float = 0.59
    alpha: Optional[float] = None

    def __post_init__(self):
        if not self.noise >= 0:
            raise ValueError("noise must be non-negative")
        if self.n is not None:
            if int(self.n) != self.n or self.n < 1:
                raise ValueError("n must be a positive integer")
            if not 0.0 < self.critical < 1.0:
                raise ValueError("critical must lie in (0, 1)")

    @property
    def critical_count(self) -> int:
        # the epsilon guards n * c landing a hair above an integer
        return int(math.ceil(self.n * self.critical - 1e-9))

    @property
    def test_size(self) -> float:
        """Exact size of the test at theta = 0.5."""
        return float(binomial_tail(self.n, self.critical_count, 0.5))


def panel_label(rho: Optional[float]) -> Optional[str]:
    """Figure 1 panel nearest to ``rho``."""
    if rho is None:
        return None
    if rho == 0.0:
        return "A"
    if rho <= 0.025:
        return "~A"
    if rho > 0.275:
        return ">F"
    cutoffs = (0.025, 0.075, 0.125, 0.175, 0.225)
    idx = sum(1 for c in cutoffs if rho > c)
    return FIGURE1_PANELS[idx][0]


def panel_range(lo: float, hi: float) -> str:
    a, b = panel_label(lo), panel_label(hi)
    return a if a == b else f"{a} -- {b}"


def _icc_from_moments(mu: float, second: float) -> float:
    return (second - mu * mu) / (mu * (1.0 - mu))


def ex1_mu(s: PopulationScenario) -> float:
    return float(normal_cdf(s.theta / math.hypot(s.se, s.sigma)))


def ex1_second_moment(s: PopulationScenario) -> float:
    """E[phi_i^2] as a bivariate normal orthant probability."""
    total = math.hypot(s.se, s.sigma)
    h = s.theta / total
    r = s.sigma ** 2 / total ** 2
    return bivariate_normal_cdf(h, h, r)


def ex1_rho(s: PopulationScenario) -> float:
    if s.sigma == 0:
        return 0.0
    mu = ex1_mu(s)
    return _icc_from_moments(mu, ex1_second_moment(s))


def ex1_table(theta_list: Iterable[float] = TABLE1_THETAS,
              sigma_list: Iterable[float] = TABLE1_SIGMAS, se: float = 1.0) -> List[dict]:
    rows = []
    theta_list = list(theta_list)
    for sigma in sigma_list:
        for theta in theta_list:
            s = PopulationScenario(theta, sigma, se)
            rho = ex1_rho(s)
            rows.append({"theta": theta, "sigma": sigma, "se": se,
                         "mu": ex1_mu(s), "rho": rho, "panel": panel_label(rho)})
    return rows


def _largen_as_population(s: DeliveryScenario) -> PopulationScenario:
    # Phi(u + delta) with delta ~ N(bias, noise^2) is the population map at unit se
    return PopulationScenario(theta=s.u + s.bias, sigma=s.noise, se=1.0)


def ex2_mu_largen(s: DeliveryScenario) -> float:
    return ex1_mu(_largen_as_population(s))


def ex2_rho_largen(s: DeliveryScenario) -> float:
    return ex1_rho(_largen_as_population(s))


def _gl_panels(panels: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(GL_ORDER)
    edges = np.linspace(-Z_SPAN, Z_SPAN, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    z = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wz = (half[:, None] * w[None, :]).ravel()
    wz = wz * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z, wz


def _finite_n_moments(s: DeliveryScenario, panels: int):
    z, w = _gl_panels(panels)
    theta = normal_cdf(s.u + s.bias + s.noise * z)
    c = s.critical_count
    power = binomial_tail(s.n, c, theta)
    miss = binomial_lower_tail(s.n, c - 1, theta) if c > 0 else np.zeros_like(theta)
    mu = float(np.dot(w, power))
    one_minus_mu = float(np.dot(w, miss))
    # centre on the smaller side to keep the variance free of cancellation
    if mu < one_minus_mu:
        var = float(np.dot(w, (power - mu) ** 2))
    else:
        var = float(np.dot(w, (miss - one_minus_mu) ** 2))
    return mu, one_minus_mu, var


def ex2_finite_n(s: DeliveryScenario, panels: int = DEFAULT_PANELS) -> Tuple[float, Optional[float]]:
    """Mean rate and ICC when each lab runs an exact binomial test on n subjects.

    Expectations over the delivery error use composite Gauss-Legendre on the
    standardized normal, checked against a run with twice the panels. Returns
    ``(mu, None)`` when mu is numerically 0 or 1.
    """
    if s.n is None:
        raise ValueError("finite-n mapping needs n")
    if s.noise == 0:
        theta = float(normal_cdf(s.u + s.bias))
        mu = float(binomial_tail(s.n, s.critical_count, theta))
        return mu, (None if min(mu, 1 - mu) < DEGENERATE_MU_TOL else 0.0)
    mu, q, var = _finite_n_moments(s, panels)
    mu2, q2, var2 = _finite_n_moments(s, 2 * panels)
    if abs(mu2 - mu) > CONVERGENCE_TOL or abs(var2 - var) > CONVERGENCE_TOL:
        raise ConvergenceError(
            f"finite-n quadrature unsettled at {panels} panels: "
            f"mu {mu} vs {mu2}, var {var} vs {var2}")
    if min(mu2, q2) < DEGENERATE_MU_TOL:
        return mu2, None
    return mu2, min(max(var2 / (mu2 * q2), 0.0), 1.0)


def ex2_table(u: float = 1.0, biases: Iterable[float] = TABLE2_BIASES,
              noises: Iterable[float] = TABLE2_NOISES, n: Optional[int] = 100,
              critical: float = 0.59) -> List[dict]:
    """Large-n rows and, when ``n`` is given, finite-n rows for every cell."""
    rows = []
    noises = list(noises)
    for bias in biases:
        for noise in noises:
            s = DeliveryScenario(u, bias, noise)
            rho = ex2_rho_largen(s)
            rows.append({"mode": "large-n", "u": u, "bias": bias, "noise": noise, "n": None,
                         "critical": None, "mu": ex2_mu_largen(s), "rho": rho,
                         "panel": panel_label(rho)})
            if n is not None:
                sf = DeliveryScenario(u, bias, noise, n=n, critical=critical)
                mu, rho = ex2_finite_n(sf)
                rows.append({"mode": f"n={n}", "u": u, "bias": bias, "noise": noise, "n": n,
                             "critical": critical, "mu": mu, "rho": rho,
                             "panel": panel_label(rho)})
    return rows
