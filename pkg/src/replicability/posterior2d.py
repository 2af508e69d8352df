"""Grid-based joint posterior of (mu, rho) given ``x`` replicated results out of ``m``.

The likelihood is the benchmark Betabinomial. Priors on mu and rho are
independent; the Jeffreys option uses the joint ``sqrt(det I(mu, rho))``
computed numerically, since the Betabinomial has no closed form for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .seqmodels import betabinomial_logpmf

DEFAULT_GRID_SIZE = 200
JEFFREYS_FD_STEP = 1e-4

# mu values of the pairwise-overlap heatmap: step 0.11 from 0.01, last one clamped to 0.99
OVERLAP_MU_VALUES = (0.01, 0.12, 0.23, 0.34, 0.45, 0.56, 0.67, 0.78, 0.89, 0.99)
OVERLAP_MU_READING = "step 0.11 from 0.01, terminal value clamped to 0.99; x = round(m*mu)"


def default_nodes(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Cell midpoints of an even partition of (0, 1)."""
    return (np.arange(size) + 0.5) / size


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "jeffreys", "fixed_rho"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "fixed_rho":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ValueError("fixed_rho prior needs a value in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "PriorSpec":
        """Parse ``uniform``, ``jeffreys`` or ``fixed:<rho>``."""
        text = text.strip().lower()
        if text.startswith("fixed:"):
            try:
                value = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad fixed prior {text!r}") from None
            return cls("fixed_rho", value)
        return cls(text)

    def label(self) -> str:
        return f"fixed:{self.value:g}" if self.kind == "fixed_rho" else self.kind


@dataclass
class PosteriorGrid2D:
    mu_nodes: np.ndarray
    rho_nodes: np.ndarray
    mass: np.ndarray  # shape (len(mu_nodes), len(rho_nodes))

    def __post_init__(self):
        self.mu_nodes = np.asarray(self.mu_nodes, dtype=float)
        self.rho_nodes = np.asarray(self.rho_nodes, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (self.mu_nodes.size, self.rho_nodes.size):
            raise ValueError("mass shape does not match the node lists")
        if abs(self.mass.sum() - 1.0) > 1e-9:
            raise ValueError("posterior mass must sum to 1")


def _loglik(x, m, mu, rho):
    """Benchmark log likelihood with the rho in {0, 1} edges handled analytically."""
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mu, rho = np.broadcast_arrays(mu, rho)
    out = np.empty(mu.shape)
    inner = (rho > 0) & (rho < 1)
    out[inner] = betabinomial_logpmf(x, m, mu[inner], rho[inner])
    zero = rho == 0
    if zero.any():
        logc = special.gammaln(m + 1.0) - special.gammaln(x + 1.0) - special.gammaln(m - x + 1.0)
        out[zero] = logc + special.xlogy(x, mu[zero]) + special.xlog1py(m - x, -mu[zero])
    one = rho == 1
    if one.any():
        if x == 0:
            out[one] = np.log1p(-mu[one])
        elif x == m:
            out[one] = np.log(mu[one])
        else:
            out[one] = -np.inf
    return out


def fisher_information(m: int, mu, rho, step: float = JEFFREYS_FD_STEP) -> np.ndarray:
    """Fisher information of the benchmark model in (mu, rho).

    Exact expectation over x = 0..m of the outer product of scores, with the
    scores taken by central differences of the log PMF. Returns an array of
    shape ``broadcast(mu, rho).shape + (2, 2)``.
    """
    mu, rho = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(rho, dtype=float))
    if np.any((mu - step <= 0) | (mu + step >= 1) | (rho - step <= 0) | (rho + step >= 1)):
        raise ValueError("nodes must lie inside (0, 1) by more than the difference step")
    xs = np.arange(m + 1, dtype=float).reshape((-1,) + (1,) * mu.ndim)
    p = np.exp(betabinomial_logpmf(xs, m, mu, rho))
    d_mu = (betabinomial_logpmf(xs, m, mu + step, rho)
            - betabinomial_logpmf(xs, m, mu - step, rho)) / (2 * step)
    d_rho = (betabinomial_logpmf(xs, m, mu, rho + step)
             - betabinomial_logpmf(xs, m, mu, rho - step)) / (2 * step)
    info = np.empty(mu.shape + (2, 2))
    info[..., 0, 0] = np.sum(p * d_mu * d_mu, axis=0)
    info[..., 1, 1] = np.sum(p * d_rho * d_rho, axis=0)
    info[..., 0, 1] = info[..., 1, 0] = np.sum(p * d_mu * d_rho, axis=0)
    return info


def jeffreys_prior_grid(m: int, mu_nodes: Sequence[float], rho_nodes: Sequence[float],
                        step: float = JEFFREYS_FD_STEP) -> np.ndarray:
    """Normalised ``sqrt(det I)`` over the (mu, rho) grid."""
    if m < 2:
        # a single Bernoulli outcome carries no information on rho; det I == 0
        raise ValueError(f"Jeffreys prior is degenerate at m={m}: rho is not identifiable")
    mu_nodes = np.asarray(mu_nodes, dtype=float)
    rho_nodes = np.asarray(rho_nodes, dtype=float)
    mu, rho = np.meshgrid(mu_nodes, rho_nodes, indexing="ij")
    info = fisher_information(m, mu, rho, step)
    det = info[..., 0, 0] * info[..., 1, 1] - info[..., 0, 1] ** 2
    dens = np.sqrt(np.clip(det, 0.0, None))
    if np.allclose(mu_nodes, 1.0 - mu_nodes[::-1], rtol=0, atol=1e-15):
        # det I is symmetric under mu <-> 1 - mu; remove finite-difference rounding asymmetry
        dens = 0.5 * (dens + dens[::-1, :])
    return dens / dens.sum()


def _prior_weights(prior: PriorSpec, m: int, mu_nodes, rho_nodes):
    if prior.kind == "jeffreys":
        return jeffreys_prior_grid(m, mu_nodes, rho_nodes)
    return np.ones((mu_nodes.size, rho_nodes.size))


def joint_posterior(x: int, m: int, prior: PriorSpec,
                    mu_nodes: Optional[Sequence[float]] = None,
                    rho_nodes: Optional[Sequence[float]] = None,
                    prior_weights: Optional[np.ndarray] = None) -> PosteriorGrid2D:
    """Posterior masses on the grid; ``fixed_rho`` collapses rho to one node.

    ``prior_weights`` lets callers reuse an already computed prior grid.
    """
    if int(x) != x or not 0 <= x <= m:
        raise ValueError(f"x must be an integer in [0, {m}], got {x}")
    mu_nodes = default_nodes() if mu_nodes is None else np.asarray(mu_nodes, dtype=float)
    if prior.kind == "fixed_rho":
        rho_nodes = np.array([prior.value])
    else:
        rho_nodes = default_nodes() if rho_nodes is None else np.asarray(rho_nodes, dtype=float)
    if prior_weights is None:
        prior_weights = _prior_weights(prior, m, mu_nodes, rho_nodes)
    mu, rho = np.meshgrid(mu_nodes, rho_nodes, indexing="ij")
    logpost = _loglik(x, m, mu, rho)
    with np.errstate(divide="ignore"):
        logpost = logpost + np.log(prior_weights)
    logpost -= logpost.max()
    mass = np.exp(logpost)
    return PosteriorGrid2D(mu_nodes, rho_nodes, mass / mass.sum())


def marginal_mu(post: PosteriorGrid2D) -> np.ndarray:
    return post.mass.sum(axis=1)


def conditional_density(x: int, m: int, rho: float,
                        mu_nodes: Optional[Sequence[float]] = None) -> np.ndarray:
    """Posterior density of mu for known rho under a uniform prior on mu."""
    post = joint_posterior(x, m, PriorSpec("fixed_rho", rho), mu_nodes)
    widths = np.gradient(post.mu_nodes) if post.mu_nodes.size > 1 else np.ones(1)
    return marginal_mu(post) / widths


def overlap(p: Sequence[float], q: Sequence[float]) -> float:
    """Shared probability mass of two distributions on the same grid."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.minimum(p, q).sum())


def overlap_matrix(mu_values: Sequence[float], m: int, prior: PriorSpec,
                   mu_nodes: Optional[Sequence[float]] = None,
                   rho_nodes: Optional[Sequence[float]] = None) -> np.ndarray:
    """Pairwise overlap of mu-marginals at ``x = round(m * mu)`` for each mu."""
    mu_nodes = default_nodes() if mu_nodes is None else np.asarray(mu_nodes, dtype=float)
    if prior.kind == "fixed_rho":
        rho_nodes = np.array([prior.value])
    else:
        rho_nodes = default_nodes() if rho_nodes is None else np.asarray(rho_nodes, dtype=float)
    weights = _prior_weights(prior, m, mu_nodes, rho_nodes)
    marginals = [
        marginal_mu(joint_posterior(int(round(m * mu)), m, prior, mu_nodes, rho_nodes, weights))
        for mu in mu_values
    ]
    k = len(marginals)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = overlap(marginals[i], marginals[j])
    return out
