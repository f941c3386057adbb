"""Variance of the coefficient-scale transform under a scaled-Beta correlation prior.

The prior on the correlation scale is a symmetric Beta distribution mapped to
(-1, 1) whose shape parameter is chosen so its standard deviation equals
``sigma_rho`` exactly. The implied coefficient-scale variance is the variance
of the k-th order Taylor polynomial of the inversion map, which needs central
moments of the scaled Beta up to order 2k and derivatives of the map near 0.

Derivatives are evaluated at a small positive point (default 0.001) rather
than 0, where the sign factor makes the map formally nondifferentiable even
though it is smooth through the origin. They are computed from the exact
power-series recurrences of the composite map (log -> affine -> sqrt ->
divide -> sqrt) carried in high-precision arithmetic: in float64 the
recurrences lose roughly three digits per order near the origin, which is
exactly where they are needed. A float64 Richardson finite-difference oracle
lives in the test suite as the independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import PriorForgeError
from .pcorr import QuarticProfile

SCALE_LABELS = {
    "narrow": 0.2,
    "medium": 0.4,
    "wide": math.sqrt(1.0 / 3.0),
    "superwide": 0.8,
}
DEFAULT_SIGMA_RHO = SCALE_LABELS["wide"]
DEFAULT_EVAL_POINT = 0.001
_LADDER_DPS = 50


@dataclass(frozen=True)
class RhoScale:
    """Standard deviation on the correlation scale plus the Beta shape it implies."""

    sigma_rho: float
    label: str | None = None

    def __post_init__(self):
        if not 0.0 < self.sigma_rho < 1.0:
            raise PriorForgeError(
                f"sigma_rho must be in (0, 1), got {self.sigma_rho!r}; 1 is the "
                "largest possible sd of a distribution on (-1, 1)"
            )

    @property
    def shape_p(self) -> float:
        # symmetric Beta(p, p) scaled to (-1, 1) has variance 1/(2p + 1)
        return (1.0 / self.sigma_rho**2 - 1.0) / 2.0

    @classmethod
    def from_label(cls, label: str) -> "RhoScale":
        if label not in SCALE_LABELS:
            raise PriorForgeError(
                f"unknown scale label {label!r}; choose from {sorted(SCALE_LABELS)}"
            )
        return cls(SCALE_LABELS[label], label=label)

    def central_moments(self, max_order: int) -> np.ndarray:
        """Central moments 0..max_order of the scaled Beta(p, p)."""
        p = self.shape_p
        return np.array([beta_central_moment(p, p, m) for m in range(max_order + 1)])


WIDE = RhoScale.from_label("wide")


@dataclass(frozen=True)
class TaylorConfig:
    order: int = 5
    eval_point: float = DEFAULT_EVAL_POINT

    def __post_init__(self):
        if self.order not in (1, 3, 5):
            raise PriorForgeError(f"taylor order must be 1, 3, or 5, got {self.order!r}")
        if not 0.0 < self.eval_point < 0.01:
            raise PriorForgeError("eval_point must be in (0, 0.01)")


def beta_central_moment(p: float, q: float, m: int) -> float:
    """m-th central moment of a Beta(p, q) linearly mapped onto (-1, 1).

    Computed as 2F1(p, -m; p+q; (p+q)/p) * (2p/(p+q))^m; the hypergeometric
    series terminates because -m is a nonpositive integer. Odd moments of the
    symmetric case are returned as exact zeros.
    """
    if p <= 0 or q <= 0:
        raise PriorForgeError("Beta shape parameters must be positive")
    if m < 0:
        raise PriorForgeError("moment order must be nonnegative")
    if p == q and m % 2 == 1:
        return 0.0
    z = (p + q) / p
    term = 1.0
    total = 1.0
    for i in range(1, m + 1):
        term *= (p + i - 1.0) * (-m + i - 1.0) / ((p + q + i - 1.0) * i) * z
        total += term
    return float(total * (2.0 * p / (p + q)) ** m)


def _series_sqrt(u: list, K: int) -> list:
    g = [mp.sqrt(u[0])]
    for k in range(1, K):
        acc = u[k]
        for i in range(1, k):
            acc -= g[i] * g[k - i]
        g.append(acc / (2 * g[0]))
    return g


def derivatives_of_g(q: QuarticProfile, point: float, order: int) -> np.ndarray:
    """Derivatives 1..order of the coefficient-scale map at ``point``.

    Exact series recurrences evaluated in high-precision arithmetic; see the
    module docstring for why float64 is not enough near the origin.
    """
    if not 1 <= order <= 5:
        raise PriorForgeError("order must be between 1 and 5")
    if not 0.0 < abs(point) < 1.0:
        raise PriorForgeError("point must satisfy 0 < |point| < 1")
    rmax = q.rho_max()
    if rmax is not None and abs(point) >= rmax:
        raise PriorForgeError(
            f"point {point!r} outside the representable range (|rho| < {rmax:.6g})"
        )
    K = order + 1
    with mp.workdps(_LADDER_DPS):
        a, b, n = mp.mpf(q.a), mp.mpf(q.b), mp.mpf(q.n)
        pt = mp.mpf(abs(point))
        # t = log(1 - rho^2) expanded about pt via log(1-rho) + log(1+rho)
        t = [mp.log(1 - pt * pt)]
        for k in range(1, K):
            t.append(-1 / (k * (1 - pt) ** k) + (-1) ** (k - 1) / (k * (1 + pt) ** k))
        disc = [b * b + 2 * a * n * t[0]] + [2 * a * n * t[k] for k in range(1, K)]
        if disc[0] <= 0:
            raise PriorForgeError("discriminant vanishes at evaluation point")
        root = _series_sqrt(disc, K)
        den = [root[0] - b] + root[1:]
        num = [-n * tk for tk in t]
        u = []
        for k in range(K):
            acc = num[k]
            for i in range(k):
                acc -= u[i] * den[k - i]
            u.append(acc / den[0])
        g = _series_sqrt(u, K)
        fact = 1
        out = np.empty(order)
        for k in range(1, K):
            fact *= k
            out[k - 1] = float(g[k] * fact)
    if point < 0:
        # the map is odd: even-order derivatives flip sign across the origin
        for k in range(2, order + 1, 2):
            out[k - 1] = -out[k - 1]
    return out


def taylor_variance(derivs, scale: RhoScale, config: TaylorConfig) -> float:
    """Double-sum variance of the k-th order Taylor polynomial.

    ``sum_ij g_i g_j / (i! j!) * (mu_{i+j} - mu_i mu_j)`` with mu the central
    moments of the scaled Beta prior. The result must be positive.
    """
    derivs = np.asarray(derivs, dtype=float)
    k = derivs.shape[0]
    if k != config.order:
        raise PriorForgeError(
            f"got {k} derivatives but config.order = {config.order}"
        )
    mu = scale.central_moments(2 * k)
    total = 0.0
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            cov = mu[i + j] - mu[i] * mu[j]
            total += (
                derivs[i - 1]
                * derivs[j - 1]
                / (math.factorial(i) * math.factorial(j))
                * cov
            )
    if not total > 0.0:
        raise PriorForgeError(
            f"taylor variance is not positive ({total!r}); inconsistent inputs"
        )
    return float(total)
