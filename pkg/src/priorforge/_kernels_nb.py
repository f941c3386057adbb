"""Numba-compiled fitting kernels; semantics mirror `_kernels_np` exactly.

The IRLS loop is the package hot spot (the simulation harness runs it a few
hundred thousand times on small matrices, where numpy call overhead dominates),
so it is written with explicit loops under ``@njit``. Kernels release the GIL
so the simulation harness can run grid cells on threads.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = 1.8378770664093453
ETA_CLAMP = 30.0
ETA_SEPARATION = 25.0


@njit(cache=True, nogil=True)
def loglik_gaussian(y, eta, sigma2):
    n = y.shape[0]
    rss = 0.0
    for i in range(n):
        r = y[i] - eta[i]
        rss += r * r
    return -0.5 * n * (LOG_2PI + math.log(sigma2)) - rss / (2.0 * sigma2)


@njit(cache=True, nogil=True)
def loglik_gaussian_profiled(y, eta):
    n = y.shape[0]
    rss = 0.0
    for i in range(n):
        r = y[i] - eta[i]
        rss += r * r
    if rss <= 0.0:
        return np.inf
    return -0.5 * n * (LOG_2PI + math.log(rss / n) + 1.0)


@njit(cache=True, nogil=True)
def loglik_binomial(y, eta):
    ll = 0.0
    for i in range(y.shape[0]):
        e = eta[i]
        if e > 0.0:
            ll += y[i] * e - (e + math.log1p(math.exp(-e)))
        else:
            ll += y[i] * e - math.log1p(math.exp(e))
    return ll


@njit(cache=True, nogil=True)
def loglik_poisson(y, eta):
    ll = 0.0
    for i in range(y.shape[0]):
        ll += y[i] * eta[i] - math.exp(eta[i]) - math.lgamma(y[i] + 1.0)
    return ll


@njit(cache=True, nogil=True)
def fit_gaussian(y, X, offset):
    n, k = X.shape
    XtX = np.zeros((k, k))
    Xty = np.zeros(k)
    for i in range(n):
        yw = y[i] - offset[i]
        for r in range(k):
            xr = X[i, r]
            Xty[r] += xr * yw
            for c in range(r, k):
                XtX[r, c] += xr * X[i, c]
    for r in range(k):
        for c in range(r):
            XtX[r, c] = XtX[c, r]
    beta = np.linalg.solve(XtX, Xty)
    rss = 0.0
    for i in range(n):
        s = y[i] - offset[i]
        for r in range(k):
            s -= X[i, r] * beta[r]
        rss += s * s
    return beta, rss


@njit(cache=True, nogil=True)
def fit_irls(family, y, X, offset, tol, max_iter):
    n, k = X.shape
    beta = np.zeros(k)
    eta = np.empty(n)
    for i in range(n):
        if family == 1:
            mu = (y[i] + 0.5) / 2.0
            eta[i] = math.log(mu / (1.0 - mu))
        else:
            eta[i] = math.log(y[i] + 0.1)
    ll = -np.inf
    ll_old = -np.inf
    status = 1
    it = 0
    XtWX = np.empty((k, k))
    XtWz = np.empty(k)
    for it in range(1, max_iter + 1):
        for r in range(k):
            XtWz[r] = 0.0
            for c in range(k):
                XtWX[r, c] = 0.0
        ll = 0.0
        for i in range(n):
            e = eta[i]
            if e > ETA_CLAMP:
                e = ETA_CLAMP
            elif e < -ETA_CLAMP:
                e = -ETA_CLAMP
            if family == 1:
                if e > 0.0:
                    p = 1.0 / (1.0 + math.exp(-e))
                    ll += y[i] * e - (e + math.log1p(math.exp(-e)))
                else:
                    ex = math.exp(e)
                    p = ex / (1.0 + ex)
                    ll += y[i] * e - math.log1p(ex)
                w = p * (1.0 - p)
                if w < 1e-10:
                    w = 1e-10
                z = e - offset[i] + (y[i] - p) / w
            else:
                mu = math.exp(e)
                ll += y[i] * e - mu - math.lgamma(y[i] + 1.0)
                w = mu
                if w < 1e-10:
                    w = 1e-10
                z = e - offset[i] + (y[i] - mu) / w
            for r in range(k):
                xw = X[i, r] * w
                XtWz[r] += xw * z
                for c in range(r, k):
                    XtWX[r, c] += xw * X[i, c]
        for r in range(k):
            for c in range(r):
                XtWX[r, c] = XtWX[c, r]
        if it > 1 and abs(ll - ll_old) < tol * (abs(ll_old) + 1e-300):
            status = 0
            break
        ll_old = ll
        beta = np.linalg.solve(XtWX, XtWz)
        for i in range(n):
            s = offset[i]
            for r in range(k):
                s += X[i, r] * beta[r]
            eta[i] = s
    finite = True
    for r in range(k):
        if not np.isfinite(beta[r]):
            finite = False
    if not finite:
        status = 2
    else:
        amax = 0.0
        for i in range(n):
            a = abs(eta[i])
            if a > amax:
                amax = a
        if family == 1 and amax > ETA_SEPARATION:
            status = 2
        elif family == 2 and amax >= ETA_CLAMP:
            status = 2
    return beta, ll, status, it
