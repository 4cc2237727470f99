"""Pure-Python column kernels, used when the compiled extension is absent.

Both backends expose the same two functions with identical signatures:

``nnls_columns(AtA, AtY, tol, max_iter) -> (X, ok)``
    Lawson-Hanson NNLS for every column of ``AtY`` against one Gram matrix.

``admm_columns(AtA, AtY, W, C0, alpha, mu0, mu_max, rho, eps, max_iter, scaled)``
    The pixel-wise splitting ADMM for every column.  The variability term
    enters only through ``u = A^T E b``, which the b-update keeps in closed
    form as ``u = C0[:, k] - S * W @ x`` (``W = A^T E (E^T E + beta I)^-1
    E^T A``, ``C0 = A^T E (E^T E + beta I)^-1 E^T Y``).  ``scaled=False``
    drops normalization and the scale update (the SUnSAL restriction).
    Returns ``(X, S, iters, status, res, mu)`` with status codes
    ``CONVERGED``, ``MAX_ITER`` and ``DEGENERATE`` and ``res`` the ``3 x N``
    final primal residuals.
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .nnls import nnls_gram

CONVERGED, MAX_ITER, DEGENERATE = 0, 1, 2
SUM_GUARD = 1e-12


def nnls_columns(AtA, AtY, tol, max_iter):
    P, N = AtY.shape
    X = np.zeros((P, N))
    ok = np.ones(N, dtype=bool)
    for k in range(N):
        X[:, k], ok[k] = nnls_gram(AtA, AtY[:, k], tol, max_iter)
    return X, ok


def _admm_one(AtA, aty, W, c0, alpha, mu0, mu_max, rho, eps, max_iter, scaled):
    P = AtA.shape[0]
    eye = np.eye(P)
    x = np.zeros(P)
    g = np.zeros(P)
    h = np.zeros(P)
    lam = np.zeros(P)
    nu = np.zeros(P)
    u = np.zeros(P)
    S = 1.0
    mu = mu0
    res = np.full(3, np.inf)
    for it in range(1, max_iter + 1):
        x_old = x
        rhs = mu * g + lam + mu * h + nu + S * (aty - u)
        x = cho_solve(cho_factor(S * S * AtA + 2.0 * mu * eye), rhs)
        if scaled:
            tot = x.sum()
            if not tot > SUM_GUARD:
                return np.zeros(P), 0.0, it, DEGENERATE, res, mu
            x = x / tot
            zz = x @ AtA @ x
            S = max(0.0, x @ (aty - u) / zz) if zz > 0 else 0.0
        if W is not None:
            u = c0 - S * (W @ x)
        g_arg = x - lam / mu
        g = np.maximum(np.abs(g_arg) - alpha / mu, 0.0) * np.where(g_arg >= 0, 1.0, -1.0)
        h = np.maximum(x - nu / mu, 0.0)
        lam = lam + mu * (g - x)
        nu = nu + mu * (h - x)
        mu = min(rho * mu, mu_max)
        res = np.array([np.linalg.norm(g - x), np.linalg.norm(h - x),
                        np.linalg.norm(x - x_old)])
        if np.all(res < eps):
            return x, S, it, CONVERGED, res, mu
    return x, S, max_iter, MAX_ITER, res, mu


def admm_columns(AtA, AtY, W, C0, alpha, mu0, mu_max, rho, eps, max_iter, scaled):
    P, N = AtY.shape
    X = np.zeros((P, N))
    S = np.zeros(N)
    iters = np.zeros(N, dtype=np.int64)
    status = np.zeros(N, dtype=np.int8)
    res = np.zeros((3, N))
    mu = np.zeros(N)
    for k in range(N):
        c0 = None if C0 is None else C0[:, k]
        X[:, k], S[k], iters[k], status[k], res[:, k], mu[k] = _admm_one(
            AtA, AtY[:, k], W, c0, alpha, mu0, mu_max, rho, eps, max_iter, scaled)
    return X, S, iters, status, res, mu
