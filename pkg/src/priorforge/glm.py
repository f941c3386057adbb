"""Maximum-likelihood GLM fitting and profile-likelihood evaluation.

Canonical links only: gaussian/identity, binomial/logit, poisson/log.
Log-likelihoods are exact (all normalizing constants included) so that
likelihood ratios across nested models are exact, and the gaussian dispersion
is profiled at its ML value ``rss/n`` inside every likelihood evaluation.
Fixing a coefficient is implemented with an offset: the model with column j
removed and ``beta_j * X_j`` added to the linear predictor is refitted, which
is exact and reuses the unmodified fitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels
from .errors import FitError, PriorForgeError

IRLS_TOL = 1e-10
IRLS_MAX_ITER = 100

_FAMILY_CODES = {"binomial": 1, "poisson": 2}


@dataclass(frozen=True)
class Family:
    kind: str  # gaussian | binomial | poisson

    def __post_init__(self):
        if self.kind not in ("gaussian", "binomial", "poisson"):
            raise PriorForgeError(f"unknown family {self.kind!r}")

    @property
    def has_dispersion(self) -> bool:
        return self.kind == "gaussian"

    @property
    def link(self) -> str:
        return {"gaussian": "identity", "binomial": "logit", "poisson": "log"}[self.kind]


GAUSSIAN = Family("gaussian")
BINOMIAL = Family("binomial")
POISSON = Family("poisson")


def family(name: str) -> Family:
    return Family(name)


@dataclass
class FitResult:
    coefficients: np.ndarray
    max_loglik: float
    se: np.ndarray
    converged: bool
    iterations: int


def _as_float64(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64))


def log_likelihood(fam: Family, y, eta, dispersion: float | None = None) -> float:
    """Exact log density sum at linear predictor ``eta``, constants included."""
    y = _as_float64(y)
    eta = _as_float64(eta)
    if y.shape != eta.shape:
        raise PriorForgeError("y and eta must have the same length")
    if not np.all(np.isfinite(eta)):
        raise PriorForgeError("eta must be finite")
    k = get_kernels()
    if fam.kind == "gaussian":
        if dispersion is None:
            return float(k.loglik_gaussian_profiled(y, eta))
        if dispersion <= 0:
            raise PriorForgeError("gaussian requires dispersion > 0")
        return float(k.loglik_gaussian(y, eta, float(dispersion)))
    if fam.kind == "binomial":
        out = float(k.loglik_binomial(y, eta))
    else:
        out = float(k.loglik_poisson(y, eta))
    if not np.isfinite(out):
        raise FitError(f"{fam.kind} log-likelihood is not finite (numeric failure)")
    return out


def _check_shape(y: np.ndarray, X: np.ndarray):
    n, k = X.shape
    if y.shape[0] != n:
        raise FitError("y and X have different numbers of rows")
    if n <= k:
        raise FitError(f"n = {n} rows but {k} design columns; need n > columns")
    if k and np.linalg.matrix_rank(X) < k:
        raise FitError("design matrix is rank deficient")


def fit_glm(fam: Family, y, X, offset=None) -> FitResult:
    """IRLS fit; gaussian solves the normal equations directly.

    Standard errors come from the observed information (equal to the expected
    information under canonical links). Binomial separation (diverging
    coefficients) is reported as non-convergence, not an exception.
    """
    y = _as_float64(y)
    X = _as_float64(X)
    if X.ndim == 1:
        X = X[:, None]
    off = np.zeros_like(y) if offset is None else _as_float64(offset)
    _check_shape(y, X)
    n, k = X.shape
    kern = get_kernels()

    if k == 0:
        return FitResult(np.empty(0), _loglik_at_eta(fam, y, off), np.empty(0), True, 0)

    if fam.kind == "gaussian":
        try:
            beta, rss = kern.fit_gaussian(y, X, off)
        except np.linalg.LinAlgError as exc:
            raise FitError(f"gaussian solve failed: {exc}") from exc
        eta = X @ beta + off
        ll = float(kern.loglik_gaussian_profiled(y, eta))
        sigma2 = rss / n
        cov = sigma2 * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.diag(cov))
        return FitResult(beta, ll, se, True, 1)

    code = _FAMILY_CODES[fam.kind]
    try:
        beta, ll, status, iters = kern.fit_irls(code, y, X, off, IRLS_TOL, IRLS_MAX_ITER)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"IRLS solve failed: {exc}") from exc
    eta = X @ beta + off
    if fam.kind == "binomial":
        mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
        w = mu * (1.0 - mu)
    else:
        mu = np.exp(np.clip(eta, -700, 700))
        w = mu
    info = X.T @ (X * w[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        se = np.full(k, np.nan)
    return FitResult(beta, float(ll), se, status == 0, int(iters))


def _loglik_at_eta(fam: Family, y: np.ndarray, eta: np.ndarray) -> float:
    kern = get_kernels()
    if fam.kind == "gaussian":
        return float(kern.loglik_gaussian_profiled(y, eta))
    if fam.kind == "binomial":
        return float(kern.loglik_binomial(y, eta))
    return float(kern.loglik_poisson(y, eta))


def profile_loglik(fam: Family, y, X, j: int, beta_j: float) -> float:
    """Profile log-likelihood: column j fixed at ``beta_j``, rest maximized.

    Equals the full-model ``max_loglik`` at ``beta_j == beta_hat_j`` and the
    submodel maximum at ``beta_j == 0``.
    """
    y = _as_float64(y)
    X = _as_float64(X)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if not 0 <= j < k:
        raise FitError(f"column index {j} out of range for {k} columns")
    offset = float(beta_j) * X[:, j]
    rest = np.delete(X, j, axis=1)
    if rest.shape[1] == 0:
        return _loglik_at_eta(fam, y, offset)
    res = fit_glm(fam, y, rest, offset=offset)
    return res.max_loglik
