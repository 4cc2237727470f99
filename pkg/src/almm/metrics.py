"""Evaluation metrics: abundance/reconstruction RMSE, spectral angle, OA."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import _raw

MASKED = -1


def _pair(a, b):
    a = np.asarray(_raw(a), dtype=np.float64)
    b = np.asarray(_raw(b), dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def armse(X_true, X_est) -> float:
    """Mean over pixels of the per-pixel abundance RMSE."""
    a, b = _pair(X_true, X_est)
    return float(np.mean(np.sqrt(np.mean((a - b) ** 2, axis=0))))


def rrmse(Y, Y_hat) -> float:
    """Mean over pixels of the per-pixel reconstruction RMSE."""
    a, b = _pair(Y, Y_hat)
    return float(np.mean(np.sqrt(np.mean((a - b) ** 2, axis=0))))


def spectral_angles(Y, Y_hat):
    """Per-column angles (radians) and a flag marking zero-norm columns.

    The angle ``arccos(y^T y_hat / (|y| |y_hat|))`` is evaluated in the
    half-angle form ``2 atan2(|u - v|, |u + v|)`` on the unit vectors, which
    stays accurate near 0 and pi where arccos loses half the digits.
    """
    a, b = _pair(Y, Y_hat)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    degenerate = (na == 0) | (nb == 0)
    u = a / np.where(degenerate, 1.0, na)
    v = b / np.where(degenerate, 1.0, nb)
    ang = 2.0 * np.arctan2(np.linalg.norm(u - v, axis=0), np.linalg.norm(u + v, axis=0))
    ang = np.where(degenerate, 0.0, ang)
    return ang, degenerate


def asam(Y, Y_hat) -> float:
    """Average spectral angle; zero-norm columns contribute 0."""
    return float(np.mean(spectral_angles(Y, Y_hat)[0]))


def match_endmembers(A_est, A_ref):
    """Permutation ``perm`` minimizing the summed angle between ``A_est[:, perm[i]]`` and ``A_ref[:, i]``."""
    A_est = np.asarray(_raw(A_est), dtype=np.float64)
    A_ref = np.asarray(_raw(A_ref), dtype=np.float64)
    if A_est.shape != A_ref.shape:
        raise ValueError("endmember matrices must have equal shapes")
    P = A_ref.shape[1]
    ne = A_est / np.linalg.norm(A_est, axis=0)
    nr = A_ref / np.linalg.norm(A_ref, axis=0)
    cost = np.arccos(np.clip(nr.T @ ne, -1.0, 1.0))  # cost[i, j]: ref i vs est j
    if P <= 8:
        best, best_perm = np.inf, None
        for perm in itertools.permutations(range(P)):
            c = cost[np.arange(P), perm].sum()
            if c < best - 1e-15:
                best, best_perm = c, perm
        return list(best_perm)
    _, cols = linear_sum_assignment(cost)
    return [int(c) for c in cols]


def overall_accuracy(labels_ref, X_est) -> float:
    """Percentage of pixels whose argmax abundance matches the reference label.

    Ties go to the lowest endmember index.  Pixels labelled ``-1`` are
    masked out; all-zero (degenerate) columns count as mismatches.
    """
    labels = np.asarray(labels_ref).ravel()
    X = np.asarray(_raw(X_est), dtype=np.float64)
    if X.shape[1] != labels.shape[0]:
        raise ValueError("label count does not match pixel count")
    keep = labels != MASKED
    if not keep.any():
        raise ValueError("every pixel is masked")
    pred = np.argmax(X, axis=0)
    hit = (pred == labels) & np.any(X != 0, axis=0)
    return 100.0 * float(np.sum(hit & keep)) / float(np.sum(keep))


@dataclass
class ReportRow:
    run_id: str
    algorithm: str
    aRMSE: float
    rRMSE: float
    aSAM: float
    OA: float
    wall_ms: float

    FIELDS = ("run_id", "algorithm", "aRMSE", "rRMSE", "aSAM", "OA", "wall_ms")

    def as_dict(self):
        return asdict(self)


def mean_std(values):
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std())
