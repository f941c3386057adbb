"""Generalized partial correlation and the quartic-profile inversion.

The signed square root of the Cox-Snell generalized R-squared, computed from
the likelihood ratio of the full model against the model omitting one column,
extends the classical partial correlation to binomial and poisson models. A
quartic approximation to the profile log-likelihood, fitted by least squares
at four points, makes the map between the correlation scale and the
coefficient scale invertible in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PriorForgeError, QuarticFitError, RhoDomainError

# Profile evaluation points as fractions of beta_hat. beta_hat itself is
# excluded: its basis row would be all zeros and L(beta_hat) is already known.
QUARTIC_POINT_FRACTIONS = (0.0, 0.25, 0.5, 0.75)
# |beta_hat| below this many standard errors triggers the symmetric
# perturbed-point fit at {+-1, +-2} * se (the zero-spaced basis is singular).
DEGENERATE_BETA_RTOL = 1e-8
LOGLAMBDA_TOL = -1e-8


@dataclass(frozen=True)
class QuarticProfile:
    """Fitted shape a*(b_j - beta_hat)^4 + b*(b_j - beta_hat)^2 + loglik_max.

    ``fit_residual`` is the largest absolute misfit over the points used,
    recorded as a fit-quality diagnostic.
    """

    a: float
    b: float
    beta_hat: float
    loglik_max: float
    n: int
    fit_residual: float = 0.0

    def __post_init__(self):
        if not self.b < 0:
            raise QuarticFitError(f"quartic profile requires b < 0, got b = {self.b!r}")
        if self.n < 1:
            raise PriorForgeError("sample size must be >= 1")

    def rho_max(self) -> float | None:
        """Largest |rho| with a real solution; None when unbounded (a <= 0)."""
        if self.a <= 0:
            return None
        return float(np.sqrt(-np.expm1(-self.b * self.b / (2.0 * self.a * self.n))))


def generalized_partial_corr(loglambda: float, n: int, sign_beta: float) -> float:
    """Signed sqrt of the Cox-Snell generalized R-squared for one column.

    ``loglambda`` is the log-likelihood difference between the full model and
    the model omitting the column (nonnegative up to fitting noise);
    ``sign_beta`` is the sign of the fitted coefficient, and 0 maps to 0.
    """
    if n < 1:
        raise PriorForgeError("sample size must be >= 1")
    if loglambda < LOGLAMBDA_TOL:
        raise PriorForgeError(
            f"negative log-likelihood ratio {loglambda!r}: upstream fit failure"
        )
    if sign_beta == 0:
        return 0.0
    ll = max(loglambda, 0.0)
    r2 = -np.expm1(-2.0 * ll / n)
    return float(np.sign(sign_beta) * np.sqrt(r2))


def classical_slope_sd(
    sigma_rho: float,
    r2_xj_on_rest: float,
    r2_y_on_rest: float,
    var_xj: float,
    var_y: float,
) -> float:
    """Implied slope-prior sd for a Normal response, in closed form.

    Serves as the oracle the generalized pipeline is checked against on
    gaussian data.
    """
    if not 0.0 <= r2_y_on_rest < 1.0:
        raise PriorForgeError("r2_y_on_rest must be in [0, 1)")
    if not 0.0 <= r2_xj_on_rest:
        raise PriorForgeError("r2_xj_on_rest must be in [0, 1)")
    if r2_xj_on_rest >= 1.0:
        raise PriorForgeError("r2_xj_on_rest >= 1: perfect collinearity")
    if var_xj <= 0 or var_y <= 0:
        raise PriorForgeError("variances must be positive")
    return float(
        sigma_rho * np.sqrt((1.0 - r2_y_on_rest) * var_y / ((1.0 - r2_xj_on_rest) * var_xj))
    )


def fit_quartic(points, logliks, beta_hat: float, loglik_max: float, n: int) -> QuarticProfile:
    """Least-squares fit of the profile drop on the basis {d^4, d^2}.

    ``d = point - beta_hat``; no intercept term, so the fit passes through
    (beta_hat, loglik_max) exactly. Fails when the fitted quadratic
    coefficient is not negative (profile not locally concave).
    """
    pts = np.asarray(points, dtype=float)
    lls = np.asarray(logliks, dtype=float)
    if pts.shape != (4,) or lls.shape != (4,):
        raise PriorForgeError("fit_quartic expects exactly 4 points and 4 log-likelihoods")
    if len(set(pts.tolist())) != len(pts):
        raise PriorForgeError("evaluation points must be distinct")
    d = pts - beta_hat
    scale = float(np.max(np.abs(d)))
    if scale == 0.0:
        raise PriorForgeError("all evaluation points coincide with beta_hat")
    ds = d / scale
    M = np.column_stack([ds**4, ds**2])
    rhs = lls - loglik_max
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    a = float(coef[0] / scale**4)
    b = float(coef[1] / scale**2)
    resid = float(np.max(np.abs(M @ coef - rhs)))
    if not b < 0:
        raise QuarticFitError(
            f"fitted quadratic coefficient b = {b!r} is not negative; "
            "profile log-likelihood is not locally concave"
        )
    return QuarticProfile(a=a, b=b, beta_hat=float(beta_hat), loglik_max=float(loglik_max), n=int(n), fit_residual=resid)


def loglambda_from_quartic(q: QuarticProfile) -> float:
    """Log-likelihood ratio implied by the quartic shape: -a*bh^4 - b*bh^2."""
    return float(-q.a * q.beta_hat**4 - q.b * q.beta_hat**2)


def beta_from_rho(rho, q: QuarticProfile):
    """Invert the correlation scale back to the coefficient scale.

    Selects the solution pair nearest zero; the far pair is an artifact of
    the quartic approximation. Evaluated in the cancellation-free form

        beta^2 = -n * log(1 - rho^2) / (sqrt(b^2 + 2 a n log(1 - rho^2)) - b)

    which is algebraically identical to the direct quadratic-root expression
    (multiply through by its conjugate) and reduces bit-for-bit to the
    quadratic-limit form ``n * log(1 - rho^2) / (2b)`` at a = 0. Scalar or
    array ``rho`` accepted; raises `RhoDomainError` when the discriminant is
    negative, reporting the largest attainable |rho|.
    """
    rho_arr = np.asarray(rho, dtype=float)
    scalar = rho_arr.ndim == 0
    r = np.atleast_1d(rho_arr)
    if np.any(np.abs(r) >= 1.0):
        raise PriorForgeError("|rho| must be < 1")
    a, b, n = q.a, q.b, q.n
    t = np.log1p(-r * r)
    disc = b * b + 2.0 * a * n * t
    if np.any(disc < 0.0):
        raise RhoDomainError(
            "rho outside the representable range of this profile",
            rho_max=q.rho_max(),
        )
    root = np.sqrt(disc)
    u = -n * t / (root - b)
    out = np.sign(r) * np.sqrt(u)
    return float(out[0]) if scalar else out
