# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled column kernels; see ``_fallback`` for the shared contract."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF CONVERGED = 0
DEF MAX_ITER = 1
DEF DEGENERATE = 2
DEF SUM_GUARD = 1e-12


cdef int _chol(double* M, int n) noexcept nogil:
    """In-place lower Cholesky of the leading n x n block (row-major, stride n)."""
    cdef int i, j, k
    cdef double s, t
    for j in range(n):
        s = M[j * n + j]
        for k in range(j):
            s -= M[j * n + k] * M[j * n + k]
        if s <= 0.0:
            return -1
        s = sqrt(s)
        M[j * n + j] = s
        for i in range(j + 1, n):
            t = M[i * n + j]
            for k in range(j):
                t -= M[i * n + k] * M[j * n + k]
            M[i * n + j] = t / s
    return 0


cdef void _chol_solve(const double* Lf, int n, double* b) noexcept nogil:
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= Lf[i * n + k] * b[k]
        b[i] = s / Lf[i * n + i]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= Lf[k * n + i] * b[k]
        b[i] = s / Lf[i * n + i]


cdef int _passive_solve(const double* AtA, const double* aty, int P,
                        const char* passive, double* s, double* work,
                        int* idx) noexcept nogil:
    cdef int m = 0, a, b
    for a in range(P):
        s[a] = 0.0
        if passive[a]:
            idx[m] = a
            m += 1
    for a in range(m):
        for b in range(m):
            work[a * m + b] = AtA[idx[a] * P + idx[b]]
    if _chol(work, m) != 0:
        return -1
    cdef double* rhs = work + m * m
    for a in range(m):
        rhs[a] = aty[idx[a]]
    _chol_solve(work, m, rhs)
    for a in range(m):
        s[idx[a]] = rhs[a]
    return 0


cdef int _nnls_one(const double* AtA, const double* aty, int P, double tol,
                   int max_iter, double* x, double* w, double* s,
                   char* passive, char* blocked, double* work, int* idx) noexcept nogil:
    cdef int a, b, j, k, it = 0, moved
    cdef double thr = 0.0, best, ratio, den, step, v
    for a in range(P):
        if fabs(aty[a]) > thr:
            thr = fabs(aty[a])
    thr = tol * (1.0 + thr)
    for a in range(P):
        x[a] = 0.0
        passive[a] = 0
        blocked[a] = 0
        w[a] = aty[a]
    while True:
        j = -1
        best = -INFINITY
        for a in range(P):
            if not passive[a] and not blocked[a] and w[a] > thr and w[a] > best:
                best = w[a]
                j = a
        if j < 0:
            return 1
        if it >= max_iter:
            return 0
        it += 1
        passive[j] = 1
        moved = 0
        while True:
            k = 0
            for a in range(P):
                k += passive[a]
            if k == 0:
                break
            if _passive_solve(AtA, aty, P, passive, s, work, idx) != 0:
                return 0
            k = 1
            for a in range(P):
                if passive[a] and s[a] <= 0.0:
                    k = 0
            if k:
                for a in range(P):
                    x[a] = s[a]
                moved = 1
                break
            step = INFINITY
            k = -1
            for a in range(P):
                if passive[a] and s[a] <= 0.0:
                    den = x[a] - s[a]
                    ratio = x[a] / den if den > 0.0 else 0.0
                    if ratio < step:
                        step = ratio
                        k = a
            if step > 0.0:
                moved = 1
            for a in range(P):
                x[a] = x[a] + step * (s[a] - x[a])
            passive[k] = 0
            for a in range(P):
                if not (x[a] > 0.0):
                    passive[a] = 0
                if not passive[a]:
                    x[a] = 0.0
        if moved:
            for a in range(P):
                blocked[a] = 0
        else:
            blocked[j] = 1
        for a in range(P):
            v = aty[a]
            for b in range(P):
                v -= AtA[a * P + b] * x[b]
            w[a] = v


def nnls_columns(AtA, AtY, double tol, int max_iter):
    cdef cnp.ndarray[double, ndim=2, mode="c"] G = np.ascontiguousarray(AtA, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] R = np.ascontiguousarray(np.asarray(AtY, dtype=np.float64).T)
    cdef int P = G.shape[0], N = R.shape[0], k
    cdef cnp.ndarray[double, ndim=2, mode="c"] X = np.zeros((N, P))
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] okv = np.ones(N, dtype=np.uint8)
    cdef double* buf = <double*>malloc(sizeof(double) * (3 * P + P * P + P + 1))
    cdef char* flags = <char*>malloc(2 * P + 2)
    cdef int* idx = <int*>malloc(sizeof(int) * (P + 1))
    try:
        with nogil:
            for k in range(N):
                okv[k] = _nnls_one(&G[0, 0], &R[k, 0], P, tol, max_iter, &X[k, 0],
                                   buf, buf + P, flags, flags + P, buf + 2 * P, idx)
    finally:
        free(buf)
        free(flags)
        free(idx)
    return np.ascontiguousarray(X.T), okv.astype(bool)


cdef int _admm_one(const double* AtA, const double* aty, const double* W,
                   const double* c0, int P, double alpha, double mu0,
                   double mu_max, double rho, double eps, int max_iter,
                   bint scaled, double* x, double* S_out, int* iters,
                   double* res, double* mu_out, double* buf) noexcept nogil:
    cdef double* g = buf
    cdef double* h = buf + P
    cdef double* lam = buf + 2 * P
    cdef double* nu = buf + 3 * P
    cdef double* u = buf + 4 * P
    cdef double* xo = buf + 5 * P
    cdef double* M = buf + 7 * P
    cdef int a, b, it
    cdef double S = 1.0, mu = mu0, tot, zz, zr, v, thr, r1, r2, r3, d
    for a in range(P):
        x[a] = 0.0
        g[a] = 0.0
        h[a] = 0.0
        lam[a] = 0.0
        nu[a] = 0.0
        u[a] = 0.0
    res[0] = INFINITY
    res[1] = INFINITY
    res[2] = INFINITY
    for it in range(1, max_iter + 1):
        for a in range(P):
            xo[a] = x[a]
            x[a] = mu * g[a] + lam[a] + mu * h[a] + nu[a] + S * (aty[a] - u[a])
            for b in range(P):
                M[a * P + b] = S * S * AtA[a * P + b]
            M[a * P + a] += 2.0 * mu
        _chol(M, P)
        _chol_solve(M, P, x)
        if scaled:
            tot = 0.0
            for a in range(P):
                tot += x[a]
            if not tot > SUM_GUARD:
                for a in range(P):
                    x[a] = 0.0
                S_out[0] = 0.0
                iters[0] = it
                mu_out[0] = mu
                return DEGENERATE
            zz = 0.0
            zr = 0.0
            for a in range(P):
                x[a] = x[a] / tot
            for a in range(P):
                v = 0.0
                for b in range(P):
                    v += AtA[a * P + b] * x[b]
                zz += x[a] * v
                zr += x[a] * (aty[a] - u[a])
            if zz > 0.0:
                S = zr / zz
                if S < 0.0:
                    S = 0.0
            else:
                S = 0.0
        if W != NULL:
            for a in range(P):
                v = 0.0
                for b in range(P):
                    v += W[a * P + b] * x[b]
                u[a] = c0[a] - S * v
        thr = alpha / mu
        r1 = 0.0
        r2 = 0.0
        r3 = 0.0
        for a in range(P):
            v = x[a] - lam[a] / mu
            if v >= 0.0:
                g[a] = v - thr if v > thr else 0.0
            else:
                g[a] = v + thr if -v > thr else 0.0
            v = x[a] - nu[a] / mu
            h[a] = v if v > 0.0 else 0.0
            lam[a] += mu * (g[a] - x[a])
            nu[a] += mu * (h[a] - x[a])
            d = g[a] - x[a]
            r1 += d * d
            d = h[a] - x[a]
            r2 += d * d
            d = x[a] - xo[a]
            r3 += d * d
        mu = rho * mu
        if mu > mu_max:
            mu = mu_max
        res[0] = sqrt(r1)
        res[1] = sqrt(r2)
        res[2] = sqrt(r3)
        if res[0] < eps and res[1] < eps and res[2] < eps:
            S_out[0] = S
            iters[0] = it
            mu_out[0] = mu
            return CONVERGED
    S_out[0] = S
    iters[0] = max_iter
    mu_out[0] = mu
    return MAX_ITER


def admm_columns(AtA, AtY, W, C0, double alpha, double mu0, double mu_max,
                 double rho, double eps, int max_iter, bint scaled):
    cdef cnp.ndarray[double, ndim=2, mode="c"] G = np.ascontiguousarray(AtA, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] R = np.ascontiguousarray(np.asarray(AtY, dtype=np.float64).T)
    cdef int P = G.shape[0], N = R.shape[0], k
    cdef cnp.ndarray[double, ndim=2, mode="c"] Wm
    cdef cnp.ndarray[double, ndim=2, mode="c"] C
    cdef const double* wp = NULL
    cdef bint has_w = W is not None
    if has_w:
        Wm = np.ascontiguousarray(W, dtype=np.float64)
        C = np.ascontiguousarray(np.asarray(C0, dtype=np.float64).T)
        wp = &Wm[0, 0]
    else:
        C = np.zeros((N, P))
    cdef cnp.ndarray[double, ndim=2, mode="c"] X = np.zeros((N, P))
    cdef cnp.ndarray[double, ndim=1] S = np.zeros(N)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.zeros(N, dtype=np.int64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(N, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] res = np.zeros((N, 3))
    cdef cnp.ndarray[double, ndim=1] mu = np.zeros(N)
    cdef double* buf = <double*>malloc(sizeof(double) * (7 * P + P * P + 1))
    cdef int it_k
    cdef double s_k, mu_k
    try:
        with nogil:
            for k in range(N):
                status[k] = _admm_one(&G[0, 0], &R[k, 0], wp, &C[k, 0], P, alpha,
                                      mu0, mu_max, rho, eps, max_iter, scaled,
                                      &X[k, 0], &s_k, &it_k, &res[k, 0], &mu_k, buf)
                S[k] = s_k
                iters[k] = it_k
                mu[k] = mu_k
    finally:
        free(buf)
    return (np.ascontiguousarray(X.T), S, iters, status,
            np.ascontiguousarray(res.T), mu)
