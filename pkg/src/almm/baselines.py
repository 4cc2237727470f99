"""Image-wide least-squares and sparse unmixing baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .model import AbundanceMatrix, ContractError, ScalingFactors, SolverConfig, _raw
from .nnls import DEFAULT_DELTA, DEFAULT_TOL, NNLSConvergenceError

SUNSAL_LAMBDA = 6e-3
SUM_GUARD = 1e-12

# per-pixel status codes shared with the ADMM kernels
OK, MAX_ITER, DEGENERATE = 0, 1, 2


class PixelSolveError(RuntimeError):
    def __init__(self, pixel, cause):
        super().__init__(f"pixel {pixel}: {cause}")
        self.pixel = pixel
        self.cause = cause


@dataclass
class BaselineResult:
    X: AbundanceMatrix
    S: ScalingFactors | None
    status: np.ndarray


def _prepare(Y, A):
    Y = np.asarray(_raw(Y), dtype=np.float64)
    A = np.asarray(_raw(A), dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if A.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise ContractError(f"Y {Y.shape} and A {A.shape}: band counts differ")
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(A))):
        raise ContractError("non-finite input")
    if np.any(np.all(A == 0, axis=0)):
        raise ContractError("A has an all-zero column")
    return Y, A


def _nnls_image(AtA, AtY, backend=None):
    P = AtA.shape[0]
    X, ok = _backend.nnls_columns(AtA, AtY, DEFAULT_TOL, 3 * P + 10, backend=backend)
    if not ok.all():
        k = int(np.flatnonzero(~ok)[0])
        raise PixelSolveError(k, NNLSConvergenceError("NNLS did not converge", X[:, k]))
    return X


def scale_normalize(X):
    """Sum-to-one rescaling: returns ``(X / 1^T X, 1^T X, status)`` with zero guards."""
    s = X.sum(axis=0)
    live = s > SUM_GUARD
    Xn = np.where(live, X / np.where(live, s, 1.0), 0.0)
    S = np.where(live, s, 0.0)
    status = np.where(live, OK, DEGENERATE).astype(np.int8)
    return Xn, S, status


def unmix_fclsu(Y, A, delta: float = DEFAULT_DELTA, backend=None) -> BaselineResult:
    """Nonnegative, sum-to-one least squares via the ``delta``-augmented row."""
    Y, A = _prepare(Y, A)
    d2 = delta * delta
    AtA = A.T @ A + d2
    AtY = A.T @ Y + d2
    X = _nnls_image(AtA, AtY, backend)
    # the augmented row leaves O(1/delta^2) slack in the sum; close it exactly
    X, _, status = scale_normalize(X)
    return BaselineResult(AbundanceMatrix(X, asc_normalized=True), None, status)


def unmix_clsu(Y, A, backend=None) -> BaselineResult:
    Y, A = _prepare(Y, A)
    X = _nnls_image(A.T @ A, A.T @ Y, backend)
    return BaselineResult(AbundanceMatrix(X), None, np.zeros(Y.shape[1], np.int8))


def unmix_sclsu(Y, A, backend=None) -> BaselineResult:
    """NNLS followed by sum-to-one rescaling; the column sums become the scales."""
    Y, A = _prepare(Y, A)
    X = _nnls_image(A.T @ A, A.T @ Y, backend)
    Xn, S, status = scale_normalize(X)
    return BaselineResult(AbundanceMatrix(Xn, asc_normalized=True), ScalingFactors(S), status)


def _sunsal_raw(Y, A, lambda_sparse, cfg, backend):
    if lambda_sparse < 0:
        raise ContractError("lambda_sparse must be nonnegative")
    cfg = cfg or SolverConfig()
    X, _, _, status, _, _ = _backend.admm_columns(
        A.T @ A, A.T @ Y, None, None, float(lambda_sparse), cfg.mu0, cfg.mu_max,
        cfg.rho, cfg.eps, int(cfg.max_iter), False, backend=backend)
    return np.maximum(X, 0.0), status


def unmix_sunsal(Y, A, lambda_sparse: float = SUNSAL_LAMBDA,
                 cfg: SolverConfig | None = None, backend=None) -> BaselineResult:
    """l1-regularized nonnegative least squares by the x/g/h splitting ADMM.

    Non-convergent pixels are returned with status ``MAX_ITER``.
    """
    Y, A = _prepare(Y, A)
    X, status = _sunsal_raw(Y, A, lambda_sparse, cfg, backend)
    return BaselineResult(AbundanceMatrix(X), None, status)


def unmix_ssunsal(Y, A, lambda_sparse: float = SUNSAL_LAMBDA,
                  cfg: SolverConfig | None = None, backend=None) -> BaselineResult:
    Y, A = _prepare(Y, A)
    X, status = _sunsal_raw(Y, A, lambda_sparse, cfg, backend)
    Xn, S, st2 = scale_normalize(X)
    status = np.where(st2 == DEGENERATE, DEGENERATE, status).astype(np.int8)
    return BaselineResult(AbundanceMatrix(Xn, asc_normalized=True), ScalingFactors(S), status)
