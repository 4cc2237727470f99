"""Pixel-wise unmixing under the augmented model with a fixed variability dictionary.

Each pixel solves

    min  0.5||y - S A x - E b||^2 + alpha||x||_1 + beta/2 ||b||^2
    s.t. x >= 0, S >= 0

by a splitting ADMM (``g`` carries the l1 term, ``h`` the nonnegativity)
with an increasing penalty, renormalizing ``x`` to the simplex after every
x-update and re-fitting the scale by scalar NNLS.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import _backend
from .model import (AbundanceMatrix, ContractError, ScalingFactors, SolverConfig,
                    VariabilityCoefficients, _raw, soft_threshold)
from .nnls import solve_scalar_nnls

SUM_GUARD = 1e-12


@dataclass
class PixelAdmmState:
    x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    b: np.ndarray
    S: float
    lam: np.ndarray
    nu: np.ndarray
    mu: float
    iter: int = 0
    converged: bool = False
    degenerate: bool = False
    residuals: tuple = (np.inf, np.inf, np.inf)
    mu_history: list = field(default_factory=list)


@dataclass
class ImageResult:
    """Output of :func:`unmix_image_almm`.

    ``status`` holds per-pixel codes (0 converged, 1 iteration cap,
    2 degenerate); ``max_negativity`` is the largest clamp applied to an
    abundance before projecting it back onto the simplex.
    """

    X: AbundanceMatrix
    S: ScalingFactors
    B: VariabilityCoefficients
    status: np.ndarray
    iters: np.ndarray
    residuals: np.ndarray
    max_negativity: float


def _b_factor(E, beta):
    L = E.shape[1]
    try:
        return cho_factor(E.T @ E + beta * np.eye(L), lower=True)
    except LinAlgError:
        raise ContractError(
            "E^T E + beta I is singular; use beta > 0 for a rank-deficient E") from None


def project_simplex_clamped(x):
    """Clamp negatives to zero and renormalize; returns ``(x, max_clamp)``."""
    neg = float(max(0.0, -np.min(x, initial=0.0)))
    x = np.maximum(x, 0.0)
    s = x.sum(axis=0)
    live = s > 0
    x = np.where(live, x / np.where(live, s, 1.0), 0.0)
    return x, neg


def unmix_pixel_almm(y, A, E=None, cfg: SolverConfig | None = None):
    """Unmix one pixel, returning ``(x, S, b, state)``.

    This is the step-by-step reference path; image-level calls go through
    the column kernels.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(_raw(y), dtype=np.float64).ravel()
    A = np.asarray(_raw(A), dtype=np.float64)
    D, P = A.shape
    E = np.zeros((D, 0)) if E is None else np.asarray(_raw(E), dtype=np.float64)
    if y.shape[0] != D or E.shape[0] != D:
        raise ContractError(f"band counts differ: y {y.shape}, A {A.shape}, E {E.shape}")
    L = E.shape[1]
    AtA = A.T @ A
    Aty = A.T @ y
    AtE = A.T @ E
    Ety = E.T @ y
    bfac = _b_factor(E, cfg.beta) if L else None

    x = np.zeros(P)
    g = np.zeros(P)
    h = np.zeros(P)
    lam = np.zeros(P)
    nu = np.zeros(P)
    b = np.zeros(L)
    S = 1.0
    mu = cfg.mu0
    st = PixelAdmmState(x, g, h, b, S, lam, nu, mu)
    eye = np.eye(P)
    for it in range(1, cfg.max_iter + 1):
        x_old = x
        rhs = mu * g + lam + mu * h + nu + S * Aty - S * (AtE @ b)
        x = cho_solve(cho_factor(S * S * AtA + 2 * mu * eye), rhs)
        tot = x.sum()
        if not tot > SUM_GUARD:
            x = np.zeros(P)
            S = 0.0
            if L:
                b = cho_solve(bfac, Ety)
            st.degenerate = True
            st.iter = it
            break
        x = x / tot
        S = solve_scalar_nnls(A @ x, y - E @ b)
        if L:
            b = cho_solve(bfac, Ety - S * (AtE.T @ x))
        g = soft_threshold(x - lam / mu, cfg.alpha / mu)
        h = np.maximum(0.0, x - nu / mu)
        lam = lam + mu * (g - x)
        nu = nu + mu * (h - x)
        mu = min(cfg.rho * mu, cfg.mu_max)
        st.mu_history.append(mu)
        st.residuals = (float(np.linalg.norm(g - x)), float(np.linalg.norm(h - x)),
                        float(np.linalg.norm(x - x_old)))
        st.iter = it
        if max(st.residuals) < cfg.eps:
            st.converged = True
            break
    st.x, st.g, st.h, st.b, st.S, st.lam, st.nu, st.mu = x, g, h, b, S, lam, nu, mu
    x_hat, _ = project_simplex_clamped(x)
    return x_hat, S, b, st


def unmix_image_almm(Y, A, E=None, cfg: SolverConfig | None = None,
                     backend: str | None = None) -> ImageResult:
    """Apply the pixel-wise solver to every column of ``Y``."""
    cfg = cfg or SolverConfig()
    Y = np.asarray(_raw(Y), dtype=np.float64)
    A = np.asarray(_raw(A), dtype=np.float64)
    D, P = A.shape
    if Y.ndim != 2 or Y.shape[0] != D:
        raise ContractError(f"Y {Y.shape} and A {A.shape}: band counts differ")
    E = np.zeros((D, 0)) if E is None else np.asarray(_raw(E), dtype=np.float64)
    if E.shape[0] != D:
        raise ContractError(f"E {E.shape} and A {A.shape}: band counts differ")
    N = Y.shape[1]
    L = E.shape[1]
    AtA = A.T @ A
    AtY = A.T @ Y
    W = C0 = None
    if L:
        bfac = _b_factor(E, cfg.beta)
        B0 = cho_solve(bfac, E.T @ Y)
        KEA = cho_solve(bfac, E.T @ A)
        AtE = A.T @ E
        W = AtE @ KEA
        C0 = AtE @ B0
    X, S, iters, status, res, _ = _backend.admm_columns(
        AtA, AtY, W, C0, cfg.alpha, cfg.mu0, cfg.mu_max, cfg.rho, cfg.eps,
        int(cfg.max_iter), True, backend=backend)
    B = B0 - KEA @ (X * S) if L else np.zeros((0, N))
    X, neg = project_simplex_clamped(X)
    return ImageResult(
        X=AbundanceMatrix(X, asc_normalized=True),
        S=ScalingFactors(S),
        B=VariabilityCoefficients(B),
        status=status,
        iters=iters,
        residuals=res,
        max_negativity=neg,
    )
