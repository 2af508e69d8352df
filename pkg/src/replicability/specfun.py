"""Special functions and distribution kernels shared by the rest of the package.

Everything here is a pure function of its arguments. Scalars and numpy
arrays are both accepted where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_TWOPI = 2.0 * math.pi

# Gauss-Legendre half-rules (negative abscissae on [-1, 1]) for the
# Drezner-Wesolowsky / Genz bivariate normal integrator.
_GL = {
    6: (
        np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
        np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    ),
    12: (
        np.array([
            -0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
            -0.5873179542866171, -0.3678314989981802, -0.1252334085114692,
        ]),
        np.array([
            0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
            0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
        ]),
    ),
    20: (
        np.array([
            -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
            -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
            -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
            -0.07652652113349733,
        ]),
        np.array([
            0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
            0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
            0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
            0.1527533871307259,
        ]),
    ),
}


@dataclass(frozen=True)
class BetaShape:
    """Standard (a, b) parameterization of a Beta distribution."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta shapes must be positive, got a={self.a}, b={self.b}")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def variance(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))


def beta_shape_from_mean_icc(mu: float, rho: float) -> BetaShape:
    """Convert (mean, intraclass correlation) to Beta shapes.

    With ``nu = (1 - rho) / rho`` the shapes are ``a = mu * nu`` and
    ``b = (1 - mu) * nu``, so the variance is ``mu * (1 - mu) * rho``.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    nu = (1.0 - rho) / rho
    return BetaShape(mu * nu, (1.0 - mu) * nu)


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    return 0.5 * special.erfc(-np.asarray(z, dtype=float) / _SQRT2)[()]


def normal_ppf(p):
    """Standard normal quantile."""
    return special.ndtri(p)


def bivariate_normal_cdf(h: float, k: float, r: float) -> float:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation r.

    Genz's refinement of the Drezner-Wesolowsky method: Gauss-Legendre
    quadrature of Plackett's integral for |r| < 0.925 and an asymptotic
    expansion around |r| = 1 otherwise. Double precision accuracy.
    """
    h = float(h)
    k = float(k)
    r = float(r)
    if not abs(r) <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {r}")
    if math.isnan(h) or math.isnan(k):
        raise ValueError("h and k must not be NaN")
    if h == -math.inf or k == -math.inf:
        return 0.0
    if h == math.inf:
        return float(normal_cdf(k))
    if k == math.inf:
        return float(normal_cdf(h))
    if r == 1.0:
        return float(normal_cdf(min(h, k)))
    if r == -1.0:
        return max(0.0, float(normal_cdf(h)) - float(normal_cdf(-k)))
    # upper-orthant probability P(X > -h, Y > -k) == P(X <= h, Y <= k)
    return _bvnu(-h, -k, r)


def _bvnu(dh: float, dk: float, r: float) -> float:
    ar = abs(r)
    if ar < 0.3:
        x, w = _GL[6]
    elif ar < 0.75:
        x, w = _GL[12]
    else:
        x, w = _GL[20]

    h, k = dh, dk
    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        sn = np.sin(asr * (1.0 - x) / 2.0)
        bvn = np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn)))
        sn = np.sin(asr * (1.0 + x) / 2.0)
        bvn += np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn)))
        return float(bvn * asr / (2.0 * _TWOPI) + normal_cdf(-h) * normal_cdf(-k))

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if ar < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * math.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        if hk > -160.0:
            b = math.sqrt(bs)
            bvn -= (
                math.exp(-hk / 2.0) * math.sqrt(_TWOPI) * normal_cdf(-b / a) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        a /= 2.0
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            xs = (a * (x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            t1 = np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs
            t2 = np.exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs))
            bvn += np.sum(a * w * np.nan_to_num(t1 - t2))
            xs = as_ * (1.0 - x) ** 2 / 4.0
            rs = np.sqrt(1.0 - xs)
            t = np.exp(-(bs / xs + hk) / 2.0) * (
                np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs))
            )
            bvn += np.sum(a * w * np.nan_to_num(t))
        bvn = -bvn / _TWOPI
    if r > 0:
        bvn += normal_cdf(-max(h, k))
    else:
        bvn = -bvn + max(0.0, normal_cdf(-h) - normal_cdf(-k))
    return float(min(max(bvn, 0.0), 1.0))


def _check_binomial(n, c):
    if c < 0 or c > n:
        raise ValueError(f"cut point must satisfy 0 <= c <= n, got c={c}, n={n}")


def _log_binomial_terms(n: int, xs: np.ndarray, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)[..., None]
    logc = special.gammaln(n + 1) - special.gammaln(xs + 1) - special.gammaln(n - xs + 1)
    return logc + special.xlogy(xs, p) + special.xlog1py(n - xs, -p)


# cap on the size of the term matrix held in memory at once
_TERM_BUDGET = 4_000_000


def _log_tail_sum(n: int, xs: np.ndarray, p: np.ndarray) -> np.ndarray:
    """logsumexp of the binomial terms at ``xs``, evaluated in bounded-memory chunks of ``p``."""
    flat = p.ravel()
    out = np.empty(flat.shape)
    step = max(1, _TERM_BUDGET // max(xs.size, 1))
    for i in range(0, flat.size, step):
        out[i:i + step] = special.logsumexp(_log_binomial_terms(n, xs, flat[i:i + step]), axis=-1)
    return out.reshape(p.shape)


def binomial_tail(n: int, c: int, p):
    """Upper tail P(X >= c) for X ~ Binomial(n, p), summed in log space.

    ``p`` may be an array; the result then has the same shape.
    """
    n = int(n)
    c = int(c)
    _check_binomial(n, c)
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise ValueError("p must lie in [0, 1]")
    if c == 0:
        return np.ones_like(p_arr)[()]
    xs = np.arange(c, n + 1, dtype=float)
    out = np.exp(_log_tail_sum(n, xs, p_arr))
    return np.minimum(out, 1.0)[()]


def binomial_lower_tail(n: int, c: int, p):
    """Lower tail P(X <= c) for X ~ Binomial(n, p); complement of ``binomial_tail(n, c + 1, p)``."""
    n = int(n)
    c = int(c)
    _check_binomial(n, c)
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise ValueError("p must lie in [0, 1]")
    if c == n:
        return np.ones_like(p_arr)[()]
    xs = np.arange(0, c + 1, dtype=float)
    out = np.exp(_log_tail_sum(n, xs, p_arr))
    return np.minimum(out, 1.0)[()]
