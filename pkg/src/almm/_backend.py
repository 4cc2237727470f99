"""Kernel backend selection.

The compiled extension is used when importable; setting
``ALMM_PURE_PYTHON=1`` forces the pure-Python kernels.  ``ALMM_THREADS``
caps how many worker threads the column kernels are split across.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("ALMM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass

CONVERGED = _fallback.CONVERGED
MAX_ITER = _fallback.MAX_ITER
DEGENERATE = _fallback.DEGENERATE


def get(name: str | None = None):
    """Return a kernel module by name (``"compiled"``/``"python"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def num_threads() -> int:
    """Worker cap from ``ALMM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ALMM_THREADS", "1")))
    except ValueError:
        return 1


def _chunks(n, parts):
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def nnls_columns(AtA, AtY, tol, max_iter, backend=None):
    kern = get(backend)
    threads = num_threads()
    if threads == 1 or AtY.shape[1] < 2 * threads:
        return kern.nnls_columns(AtA, AtY, tol, max_iter)
    spans = _chunks(AtY.shape[1], threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda s: kern.nnls_columns(AtA, AtY[:, s[0]:s[1]], tol, max_iter), spans))
    return np.hstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def admm_columns(AtA, AtY, W, C0, alpha, mu0, mu_max, rho, eps, max_iter, scaled,
                 backend=None):
    """Run the ADMM column kernel, split over ``ALMM_THREADS`` workers.

    Pixels are independent, so the split never changes results.
    """
    kern = get(backend)
    args = (alpha, mu0, mu_max, rho, eps, max_iter, scaled)
    threads = num_threads()
    if threads == 1 or AtY.shape[1] < 2 * threads:
        return kern.admm_columns(AtA, AtY, W, C0, *args)
    spans = _chunks(AtY.shape[1], threads)

    def run(s):
        c0 = None if C0 is None else C0[:, s[0]:s[1]]
        return kern.admm_columns(AtA, AtY[:, s[0]:s[1]], W, c0, *args)

    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(run, spans))
    X, S, iters, status, res, mu = zip(*parts)
    return (np.hstack(X), np.concatenate(S), np.concatenate(iters),
            np.concatenate(status), np.hstack(res), np.concatenate(mu))
