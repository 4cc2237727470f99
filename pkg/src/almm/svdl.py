"""Joint variability-dictionary learning and unmixing.

Alternating ADMM over abundances ``X``, per-pixel scales ``S``, the
variability dictionary ``E`` and its coefficients ``B``.  Auxiliary
variables split the problem into closed-form pieces:

======  =====================  ==========
name    stands for             multiplier
======  =====================  ==========
``G``   ``X`` (l1 term)        ``Lam``
``H``   ``X`` (nonnegativity)  ``V``
``M``   ``X diag(S)``          ``Omega``
``T``   ``S`` (nonnegativity)  ``Delta``
``Q``   ``E`` (incoherence)    ``Pi``
======  =====================  ==========

Scales are kept diagonal: every update that touches ``S`` is solved over
diagonal matrices, which turns the matrix solves into per-pixel scalars.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .baselines import unmix_sclsu
from .model import (AbundanceMatrix, ContractError, ScalingFactors, SolverConfig,
                    VariabilityCoefficients, VariabilityDictionary, _raw,
                    objective_value, soft_threshold)

SUM_GUARD = 1e-12
RESIDUAL_NAMES = ("G-X", "H-X", "M-XS", "Q-E", "T-S", "dE")


@dataclass
class SvdlState:
    X: np.ndarray
    S: np.ndarray
    E: np.ndarray
    B: np.ndarray
    G: np.ndarray
    H: np.ndarray
    M: np.ndarray
    T: np.ndarray
    Q: np.ndarray
    Lam: np.ndarray
    V: np.ndarray
    Omega: np.ndarray
    Pi: np.ndarray
    Delta: np.ndarray
    xi: float
    iter: int = 0
    converged: bool = False
    degenerate: np.ndarray = None
    residuals: tuple = (np.inf,) * 6
    history: dict = field(default_factory=lambda: {
        "objective": [], "coherence": [], "gram_deviation": [],
        "residuals": [], "xi": []})

    ARRAYS = ("X", "S", "E", "B", "G", "H", "M", "T", "Q",
              "Lam", "V", "Omega", "Pi", "Delta")

    def arrays(self):
        return {name: getattr(self, name) for name in self.ARRAYS}


def random_orthonormal(D, L, seed):
    """Orthonormal ``D x L`` matrix from the QR factor of a seeded Gaussian draw."""
    if L > D:
        raise ContractError(f"cannot draw {L} orthonormal atoms in {D} bands")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((D, L)))
    # sign fix makes the factor unique for a given draw
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def init_state(Y, A, cfg: SolverConfig) -> SvdlState:
    D, P = A.shape
    N = Y.shape[1]
    L = int(cfg.num_atoms)
    if L < 1:
        raise ContractError("dictionary learning needs num_atoms >= 1; "
                            "use unmix_image_almm for L = 0")
    X0 = unmix_sclsu(Y, A).X.data.copy()
    E0 = random_orthonormal(D, L, cfg.rng_seed)
    Z = np.zeros((P, N))
    st = SvdlState(
        X=X0, S=np.ones(N), E=E0, B=np.zeros((L, N)),
        G=Z.copy(), H=Z.copy(), M=Z.copy(), T=np.zeros(N), Q=np.zeros((D, L)),
        Lam=Z.copy(), V=Z.copy(), Omega=Z.copy(), Pi=np.zeros((D, L)),
        Delta=np.zeros(N), xi=cfg.mu0, degenerate=X0.sum(axis=0) <= SUM_GUARD)
    _record(st, Y, A, cfg)
    return st


def _record(st, Y, A, cfg):
    hist = st.history
    hist["objective"].append(objective_value(Y, A, st.X, st.S, st.E, st.B, cfg))
    hist["coherence"].append(float(np.linalg.norm(A.T @ st.E)))
    G = st.E.T @ st.E
    G[np.diag_indices_from(G)] -= 1.0
    hist["gram_deviation"].append(float(np.linalg.norm(G)))
    hist["residuals"].append(tuple(st.residuals))
    hist["xi"].append(st.xi)


def svdl_step(st: SvdlState, Y, A, AtA, AtY, AAt, cfg: SolverConfig):
    """One outer iteration, updating ``st`` in place."""
    xi = st.xi
    P = A.shape[1]
    L = st.E.shape[1]
    D = A.shape[0]
    X, S, E = st.X, st.S, st.E

    XS = X * S
    st.M = cho_solve(cho_factor(AtA + xi * np.eye(P)),
                     AtY - A.T @ (E @ st.B) + xi * XS - st.Omega)
    AM = A @ st.M
    st.B = cho_solve(cho_factor(E.T @ E + cfg.beta * np.eye(L)), E.T @ (Y - AM))

    num = xi * st.G + st.Lam + xi * st.H + st.V + st.Omega * S + xi * st.M * S
    X = num / (xi * S * S + 2.0 * xi)
    tot = X.sum(axis=0)
    live = tot > SUM_GUARD
    X = np.where(live, X / np.where(live, tot, 1.0), 0.0)
    st.degenerate = ~live

    S = ((xi * np.sum(X * st.M, axis=0) + np.sum(X * st.Omega, axis=0)
          + xi * st.T + st.Delta) / (xi * np.sum(X * X, axis=0) + xi))

    E_old = E
    R = Y - AM
    BBt = st.B @ st.B.T
    rhs = R @ st.B.T + xi * st.Q + st.Pi
    E = cho_solve(cho_factor(BBt + xi * np.eye(L)), rhs.T).T

    Qp = st.Q
    lhs = cfg.gamma * AAt + cfg.eta * (Qp @ Qp.T) + xi * np.eye(D)
    st.Q = cho_solve(cho_factor(lhs), cfg.eta * Qp + xi * E - st.Pi)

    st.G = soft_threshold(X - st.Lam / xi, cfg.alpha / xi)
    st.H = np.maximum(0.0, X - st.V / xi)
    st.T = np.maximum(0.0, S - st.Delta / xi)

    XS = X * S
    st.Lam = st.Lam + xi * (st.G - X)
    st.V = st.V + xi * (st.H - X)
    st.Omega = st.Omega + xi * (st.M - XS)
    st.Pi = st.Pi + xi * (st.Q - E)
    st.Delta = st.Delta + xi * (st.T - S)
    st.xi = min(cfg.rho * xi, cfg.mu_max)

    st.X, st.S, st.E = X, S, E
    st.residuals = (
        float(np.linalg.norm(st.G - X)), float(np.linalg.norm(st.H - X)),
        float(np.linalg.norm(st.M - XS)), float(np.linalg.norm(st.Q - E)),
        float(np.linalg.norm(st.T - S)), float(np.linalg.norm(E - E_old)))
    st.iter += 1


@dataclass
class SvdlResult:
    E: VariabilityDictionary
    X: AbundanceMatrix
    S: ScalingFactors
    B: VariabilityCoefficients
    state: SvdlState


def learn_svdl(Y, A, cfg: SolverConfig | None = None, state: SvdlState | None = None,
               checkpoint=None, checkpoint_every: int = 0) -> SvdlResult:
    """Learn a variability dictionary jointly with abundances and scales.

    Parameters
    ----------
    Y : array_like, shape (D, N)
    A : array_like, shape (D, P)
    cfg : SolverConfig
        ``num_atoms`` sets the dictionary size and ``rng_seed`` its
        orthonormal initialization.
    state : SvdlState, optional
        Resume from a previous (e.g. checkpointed) state.
    checkpoint : callable, optional
        Called as ``checkpoint(state)`` every ``checkpoint_every`` iterations.
    """
    cfg = cfg or SolverConfig()
    Y = np.asarray(_raw(Y), dtype=np.float64)
    A = np.asarray(_raw(A), dtype=np.float64)
    if Y.ndim != 2 or A.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise ContractError(f"Y {Y.shape} and A {A.shape}: band counts differ")
    st = state if state is not None else init_state(Y, A, cfg)
    AtA = A.T @ A
    AtY = A.T @ Y
    AAt = A @ A.T
    while st.iter < cfg.max_iter and not st.converged:
        svdl_step(st, Y, A, AtA, AtY, AAt, cfg)
        _record(st, Y, A, cfg)
        if max(st.residuals) < cfg.eps:
            st.converged = True
        if checkpoint is not None and checkpoint_every and st.iter % checkpoint_every == 0:
            checkpoint(st)

    X = np.maximum(st.X, 0.0)
    tot = X.sum(axis=0)
    live = (tot > SUM_GUARD) & ~st.degenerate
    X = np.where(live, X / np.where(live, tot, 1.0), 0.0)
    S = np.where(live, np.maximum(st.S, 0.0), 0.0)
    return SvdlResult(
        E=VariabilityDictionary(st.E),
        X=AbundanceMatrix(X, asc_normalized=True),
        S=ScalingFactors(S),
        B=VariabilityCoefficients(st.B),
        state=st,
    )


def svdl_diagnostics(state: SvdlState) -> dict:
    """Per-iteration series: objective, coherence, Gram deviation, residuals, penalty.

    Every series has ``state.iter + 1`` entries (the first one describes the
    initialization).
    """
    h = state.history
    res = np.array(h["residuals"], dtype=float)
    out = {
        "iteration": list(range(len(h["objective"]))),
        "objective": list(h["objective"]),
        "coherence": list(h["coherence"]),
        "gram_deviation": list(h["gram_deviation"]),
        "xi": list(h["xi"]),
    }
    for i, name in enumerate(RESIDUAL_NAMES):
        out[f"res_{name}"] = list(res[:, i])
    return out
