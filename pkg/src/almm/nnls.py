"""Constrained least-squares kernels.

The vector solver is a Lawson-Hanson active-set method working on the
normal equations (``A^T A``, ``A^T y``), which is exact at the small
endmember counts used for unmixing and lets image-wide callers share one
Gram matrix across pixels.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

DEFAULT_TOL = 1e-10
DEFAULT_DELTA = 1e3


class NNLSConvergenceError(RuntimeError):
    """Active-set iteration cap reached; ``best`` holds the last iterate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


def _passive_solve(AtA, Aty, idx):
    sub = AtA[np.ix_(idx, idx)]
    try:
        return cho_solve(cho_factor(sub, lower=True, check_finite=False),
                         Aty[idx], check_finite=False)
    except LinAlgError:
        return np.linalg.lstsq(sub, Aty[idx], rcond=None)[0]


def nnls_gram(AtA, Aty, tol=DEFAULT_TOL, max_iter=None):
    """Solve ``min 0.5||y - Ax||^2, x >= 0`` given ``A^T A`` and ``A^T y``.

    Returns ``(x, ok)``; ``ok`` is False when the iteration cap was hit, in
    which case ``x`` is the last feasible iterate.
    """
    P = AtA.shape[0]
    if max_iter is None:
        max_iter = 3 * P + 10
    thr = tol * (1.0 + np.max(np.abs(Aty), initial=0.0))
    x = np.zeros(P)
    passive = np.zeros(P, dtype=bool)
    # columns whose addition left x unchanged; cleared once x moves
    blocked = np.zeros(P, dtype=bool)
    w = Aty.copy()
    it = 0
    while True:
        cand = np.where(~passive & ~blocked & (w > thr), w, -np.inf)
        j = int(np.argmax(cand))
        if not np.isfinite(cand[j]):
            return x, True
        if it >= max_iter:
            return x, False
        it += 1
        passive[j] = True
        moved = False
        while passive.any():
            idx = np.flatnonzero(passive)
            s = np.zeros(P)
            s[idx] = _passive_solve(AtA, Aty, idx)
            if np.all(s[idx] > 0):
                x = s
                moved = True
                break
            bad = idx[s[idx] <= 0]
            den = x[bad] - s[bad]
            ratio = np.where(den > 0, x[bad] / np.where(den > 0, den, 1.0), 0.0)
            k = int(np.argmin(ratio))
            step = ratio[k]
            if step > 0:
                moved = True
            x = x + step * (s - x)
            passive[bad[k]] = False
            passive &= x > 0
            x[~passive] = 0.0
        if moved:
            blocked[:] = False
        else:
            blocked[j] = True
        w = Aty - AtA @ x


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def solve_nnls(A, y, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Nonnegative least squares ``argmin_{x >= 0} 0.5||y - Ax||^2``.

    Parameters
    ----------
    A : array_like, shape (D, P)
        Design matrix without all-zero columns.
    y : array_like, shape (D,)
    tol : float
        Relative KKT tolerance, scaled by ``1 + ||A^T y||_inf``.

    Raises
    ------
    NNLSConvergenceError
        If the active-set cap is reached.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    _check_finite(A, y)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if A.ndim != 2 or A.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, y {y.shape}")
    if np.any(np.all(A == 0, axis=0)):
        raise ValueError("A has an all-zero column")
    x, ok = nnls_gram(A.T @ A, A.T @ y, tol)
    if not ok:
        raise NNLSConvergenceError("NNLS did not converge", x)
    return x


def solve_scalar_nnls(z, r) -> float:
    """``max(0, z^T r / z^T z)``; zero for a zero ``z``."""
    z = np.asarray(z, dtype=np.float64).ravel()
    r = np.asarray(r, dtype=np.float64).ravel()
    _check_finite(z, r)
    zz = float(z @ z)
    if zz == 0.0:
        return 0.0
    return max(0.0, float(z @ r) / zz)


def fclsu_system(A, delta=DEFAULT_DELTA):
    """Gram matrix and right-hand-side offset of the sum-to-one augmented system."""
    A = np.asarray(A, dtype=np.float64)
    d2 = delta * delta
    return A.T @ A + d2, d2


def solve_fclsu_pixel(A, y, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Fully constrained (nonnegative, sum-to-one) least squares for one pixel.

    Sum-to-one is imposed by appending the row ``delta * 1^T`` to ``A`` and
    ``delta`` to ``y`` before calling the NNLS solver; the result is then
    rescaled so the sum is one to machine precision.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    Aa = np.vstack([A, np.full((1, A.shape[1]), delta)])
    ya = np.append(y, delta)
    x = solve_nnls(Aa, ya)
    # the augmented row leaves O(||r|| / delta^2) slack in the sum; close it exactly
    tot = x.sum()
    return x / tot if tot > 0 else x
