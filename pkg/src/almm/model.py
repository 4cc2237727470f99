"""Domain types and model-level evaluators for augmented linear mixing.

Matrices follow the band-by-pixel convention: an image ``Y`` is ``D x N``,
endmembers ``A`` are ``D x P``, abundances ``X`` are ``P x N``, the
variability dictionary ``E`` is ``D x L`` and its coefficients ``B`` are
``L x N``.  Per-pixel scaling factors are stored as a length-``N`` vector
(the diagonal of the scaling matrix).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ASC_TOL = 1e-9
NEG_TOL = 1e-12


class ContractError(ValueError):
    """Raised when inputs violate a shape or value contract."""


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HyperspectralImage:
    """Observed image, ``D`` bands by ``N`` pixels."""

    data: np.ndarray
    shape2d: Optional[tuple[int, int]] = None
    wavelengths: Optional[np.ndarray] = None

    def __post_init__(self):
        data = _as_matrix(self.data, "image")
        if not np.all(np.isfinite(data)):
            raise ContractError("image contains non-finite values")
        if self.shape2d is not None:
            rows, cols = self.shape2d
            if rows * cols != data.shape[1]:
                raise ContractError(
                    f"spatial dims {rows}x{cols} do not match {data.shape[1]} pixels")
        if self.wavelengths is not None and len(self.wavelengths) != data.shape[0]:
            raise ContractError("wavelengths length must equal the band count")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def num_bands(self) -> int:
        return self.data.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EndmemberDictionary:
    """Endmember signatures, one per column."""

    data: np.ndarray
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        data = _as_matrix(self.data, "endmembers")
        if not np.all(np.isfinite(data)):
            raise ContractError("endmembers contain non-finite values")
        if np.any(data < 0):
            raise ContractError("endmembers must be nonnegative")
        if np.any(np.all(data == 0, axis=0)):
            raise ContractError("endmember dictionary has an all-zero column")
        if self.names is not None and len(self.names) != data.shape[1]:
            raise ContractError("names length must equal the endmember count")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def num_bands(self) -> int:
        return self.data.shape[0]

    @property
    def num_endmembers(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AbundanceMatrix:
    """Fractional abundances, ``P x N``.

    Entries down to ``-1e-12`` are accepted and clamped to zero.  When
    ``asc_normalized`` is set, every column that is not entirely zero must
    sum to one; all-zero columns mark degenerate pixels.
    """

    data: np.ndarray
    asc_normalized: bool = False

    def __post_init__(self):
        data = _as_matrix(self.data, "abundances")
        if not np.all(np.isfinite(data)):
            raise ContractError("abundances contain non-finite values")
        if np.any(data < -NEG_TOL):
            raise ContractError(
                f"abundances below -{NEG_TOL:g} (min {data.min():.3g})")
        data = np.maximum(data, 0.0)
        if self.asc_normalized:
            sums = data.sum(axis=0)
            live = np.any(data > 0, axis=0)
            if np.any(np.abs(sums[live] - 1.0) > ASC_TOL):
                raise ContractError("asc_normalized abundances do not sum to one")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def num_endmembers(self) -> int:
        return self.data.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ScalingFactors:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ContractError("scaling factors must be finite and nonnegative")
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class VariabilityDictionary:
    """Spectral variability atoms ``E`` (``D x L``)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ContractError("variability dictionary must be 2-D")
        if not np.all(np.isfinite(data)):
            raise ContractError("variability dictionary contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def num_atoms(self) -> int:
        return self.data.shape[1]

    def atom_norms(self) -> np.ndarray:
        return np.linalg.norm(self.data, axis=0)

    def coherence(self, A) -> float:
        """Frobenius norm of ``A^T E``."""
        A = A.data if isinstance(A, EndmemberDictionary) else np.asarray(A, float)
        return float(np.linalg.norm(A.T @ self.data))

    @classmethod
    def empty(cls, num_bands: int) -> "VariabilityDictionary":
        return cls(np.zeros((num_bands, 0)))


@dataclass(frozen=True)
class VariabilityCoefficients:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ContractError("variability coefficients must be 2-D")
        if not np.all(np.isfinite(data)):
            raise ContractError("variability coefficients contain non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def empty(cls, num_pixels: int) -> "VariabilityCoefficients":
        return cls(np.zeros((0, num_pixels)))


@dataclass(frozen=True)
class SolverConfig:
    """Regularization weights and penalty schedule for both ADMM solvers.

    ``mu0``/``mu_max`` double as the initial and maximal penalty of the
    dictionary-learning solver.
    """

    alpha: float = 2e-3
    beta: float = 2e-3
    gamma: float = 5e-3
    eta: float = 5e-3
    num_atoms: int = 100
    mu0: float = 1e-3
    mu_max: float = 1e6
    rho: float = 1.5
    eps: float = 1e-6
    max_iter: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "eta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ContractError(f"{name} must be a nonnegative finite number")
        if self.rho <= 1:
            raise ContractError("rho must exceed 1")
        if not 0 < self.mu0 <= self.mu_max:
            raise ContractError("need 0 < mu0 <= mu_max")
        if self.eps <= 0:
            raise ContractError("eps must be positive")
        if int(self.max_iter) < 1:
            raise ContractError("max_iter must be a positive integer")
        if int(self.num_atoms) < 0:
            raise ContractError("num_atoms must be nonnegative")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ContractError("rng_seed must fit in an unsigned 64-bit integer")

    @property
    def xi0(self) -> float:
        return self.mu0

    @property
    def xi_max(self) -> float:
        return self.mu_max

    def replace(self, **changes) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, **changes)


def _raw(obj) -> np.ndarray:
    if hasattr(obj, "values") and isinstance(obj, ScalingFactors):
        return obj.values
    if hasattr(obj, "data"):
        return obj.data
    return np.asarray(obj, dtype=np.float64)


def _check_dims(A, X, S, E, B, Y=None):
    D, P = A.shape
    if X.shape[0] != P:
        raise ContractError(f"A ({A.shape}) and X ({X.shape}): endmember counts differ")
    N = X.shape[1]
    if S.shape != (N,):
        raise ContractError(f"X ({X.shape}) and S ({S.shape}): pixel counts differ")
    if E.shape[0] != D and E.size:
        raise ContractError(f"A ({A.shape}) and E ({E.shape}): band counts differ")
    if E.shape[1] != B.shape[0]:
        raise ContractError(f"E ({E.shape}) and B ({B.shape}): atom counts differ")
    if B.shape[0] and B.shape[1] != N:
        raise ContractError(f"X ({X.shape}) and B ({B.shape}): pixel counts differ")
    if Y is not None and Y.shape != (D, N):
        raise ContractError(f"Y ({Y.shape}) does not match A/X ({D}, {N})")


def _coerce(A, X, S, E, B):
    A = _as_matrix(_raw(A), "A")
    X = _as_matrix(_raw(X), "X")
    S = np.asarray(_raw(S), dtype=np.float64).ravel()
    E = np.zeros((A.shape[0], 0)) if E is None else np.asarray(_raw(E), float)
    B = np.zeros((0, X.shape[1])) if B is None else np.asarray(_raw(B), float)
    if E.ndim != 2 or B.ndim != 2:
        raise ContractError("E and B must be 2-D")
    if E.shape[1] == 0:
        E = np.zeros((A.shape[0], 0))
    if B.shape[0] == 0:
        B = np.zeros((0, X.shape[1]))
    _check_dims(A, X, S, E, B)
    return A, X, S, E, B


def reconstruct(A, X, S, E=None, B=None) -> np.ndarray:
    """Return ``A X diag(S) + E B``."""
    A, X, S, E, B = _coerce(A, X, S, E, B)
    out = (A @ X) * S
    if E.shape[1]:
        out = out + E @ B
    return out


def objective_value(Y, A, X, S, E=None, B=None, cfg: SolverConfig | None = None) -> float:
    """Full regularized objective.

    ``0.5||Y - AXS - EB||_F^2 + alpha||X||_{1,1} + beta/2 ||B||_F^2
    + gamma/2 ||A^T E||_F^2 + eta/2 ||E^T E - I||_F^2``.
    Zero-weight terms are skipped, as are the dictionary terms when ``L = 0``.
    """
    cfg = cfg or SolverConfig()
    A, X, S, E, B = _coerce(A, X, S, E, B)
    Y = _as_matrix(_raw(Y), "Y")
    _check_dims(A, X, S, E, B, Y)
    R = Y - (A @ X) * S
    if E.shape[1]:
        R -= E @ B
    val = 0.5 * float(np.sum(R * R))
    if cfg.alpha:
        val += cfg.alpha * float(np.abs(X).sum())
    if E.shape[1]:
        if cfg.beta:
            val += 0.5 * cfg.beta * float(np.sum(B * B))
        if cfg.gamma:
            val += 0.5 * cfg.gamma * float(np.sum((A.T @ E) ** 2))
        if cfg.eta:
            G = E.T @ E
            G[np.diag_indices_from(G)] -= 1.0
            val += 0.5 * cfg.eta * float(np.sum(G * G))
    return val


def soft_threshold(v, t: float) -> np.ndarray:
    """Elementwise shrinkage ``max(0, |v| - t) * sign(v)`` with ``sign(0) = +1``."""
    if t < 0:
        raise ContractError("threshold must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    sign = np.where(v >= 0, 1.0, -1.0)
    return np.maximum(np.abs(v) - t, 0.0) * sign


def coherence_stats(A, V) -> np.ndarray:
    """Cosines between every endmember column and every column of ``V``.

    Returned flat in endmember-major order (``cos(a_0, v_0), cos(a_0, v_1),
    ...``).  Zero-norm columns of ``V`` give cosine 0.
    """
    A = _as_matrix(_raw(A), "A")
    V = _as_matrix(_raw(V), "V")
    if A.shape[1] < 1 or V.shape[1] < 1:
        raise ContractError("need at least one column in each argument")
    if A.shape[0] != V.shape[0]:
        raise ContractError(f"A ({A.shape}) and V ({V.shape}): band counts differ")
    an = np.linalg.norm(A, axis=0)
    if np.any(an == 0):
        raise ContractError("zero-norm endmember column")
    vn = np.linalg.norm(V, axis=0)
    safe = np.where(vn > 0, vn, 1.0)
    cos = (A / an).T @ (V / safe)
    cos[:, vn == 0] = 0.0
    return np.clip(cos, -1.0, 1.0).ravel()


def residual(Y, A, X, S, E=None, B=None) -> np.ndarray:
    return _as_matrix(_raw(Y), "Y") - reconstruct(A, X, S, E, B)
