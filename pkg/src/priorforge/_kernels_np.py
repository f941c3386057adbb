"""Pure-numpy fitting kernels.

This is the fallback backend; `_kernels_nb` holds the numba-compiled twins.
Both expose the same functions with identical signatures and semantics, so
either can be swapped in via the ``PRIOR_FORGE_NUMBA`` environment flag (see
`_backend`). Family codes: 1 = binomial(logit), 2 = poisson(log).

Status codes returned by ``fit_irls``: 0 converged, 1 iteration limit hit,
2 diverged (binomial separation or runaway linear predictor).
"""

import numpy as np
from scipy.special import gammaln

LOG_2PI = 1.8378770664093453
ETA_CLAMP = 30.0
ETA_SEPARATION = 25.0


def loglik_gaussian(y, eta, sigma2):
    n = y.shape[0]
    rss = float(np.sum((y - eta) ** 2))
    return -0.5 * n * (LOG_2PI + np.log(sigma2)) - rss / (2.0 * sigma2)


def loglik_gaussian_profiled(y, eta):
    # sigma^2 at its ML value rss/n
    n = y.shape[0]
    rss = float(np.sum((y - eta) ** 2))
    if rss <= 0.0:
        return np.inf
    return -0.5 * n * (LOG_2PI + np.log(rss / n) + 1.0)


def loglik_binomial(y, eta):
    # y*eta - log(1 + exp(eta)), stable in both tails
    return float(np.sum(y * eta - (np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta))))))


def loglik_poisson(y, eta):
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def fit_gaussian(y, X, offset):
    yw = y - offset
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ yw)
    resid = yw - X @ beta
    rss = float(resid @ resid)
    return beta, rss


def fit_irls(family, y, X, offset, tol, max_iter):
    n, k = X.shape
    beta = np.zeros(k)
    if family == 1:
        mu = (y + 0.5) / 2.0
        eta = np.log(mu / (1.0 - mu))
    else:
        eta = np.log(y + 0.1)
    ll = -np.inf
    ll_old = -np.inf
    status = 1
    it = 0
    for it in range(1, max_iter + 1):
        e = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        if family == 1:
            p = 1.0 / (1.0 + np.exp(-e))
            ll = float(np.sum(y * e - (np.maximum(e, 0.0) + np.log1p(np.exp(-np.abs(e))))))
            w = np.maximum(p * (1.0 - p), 1e-10)
            z = e - offset + (y - p) / w
        else:
            mu = np.exp(e)
            ll = float(np.sum(y * e - mu - gammaln(y + 1.0)))
            w = np.maximum(mu, 1e-10)
            z = e - offset + (y - mu) / w
        if it > 1 and abs(ll - ll_old) < tol * (abs(ll_old) + 1e-300):
            status = 0
            break
        ll_old = ll
        Xw = X * w[:, None]
        beta = np.linalg.solve(X.T @ Xw, Xw.T @ z)
        eta = X @ beta + offset
    if not np.all(np.isfinite(beta)):
        status = 2
    else:
        amax = float(np.max(np.abs(eta))) if n else 0.0
        if family == 1 and amax > ETA_SEPARATION:
            status = 2
        elif family == 2 and amax >= ETA_CLAMP:
            status = 2
    return beta, ll, status, it
