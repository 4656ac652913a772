# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Ricci components, residuals, and the batched solver.

Same algorithm as ``_pykernel``; the solver loop runs without the GIL so
batches can be spread over threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

from .flag_model import chain_table

cnp.import_array()

BACKEND = "compiled"

cdef double MIN_STEP = 2.0 ** -30
cdef double COORD_FLOOR = 1e-12
cdef double DIVERGENCE_BOUND = 1e8
cdef double ARMIJO = 1e-4
cdef double LM_MU0 = 1e-3
cdef double LM_MU_MAX = 1e12
cdef int NEWTON_REJECTS_BEFORE_LM = 2
cdef int POLISH_STEPS = 3


cdef struct Problem:
    int m           # n + 1
    int N           # number of roots
    int K           # chains per root, n - 1
    const int* cb   # (N, K)
    const int* cc   # (N, K)


cdef struct Work:
    double* lam     # N
    double* r       # N
    double* dr      # N * N
    double* F       # nv
    double* J       # nv * nv
    double* xn      # nv
    double* Fn
    double* Jn
    double* d
    double* A       # nv * nv scratch for the linear solve
    double* rhs
    int* piv


cdef void ricci_and_jac(const Problem* P, const double* lam, double* r, double* dr,
                        bint want_jac) noexcept nogil:
    cdef int N = P.N, K = P.K, p, t, ib, ic
    cdef double s = 1.0 / (4.0 * P.m)
    cdef double a, b, c, acc, dacc
    if want_jac:
        memset(dr, 0, N * N * sizeof(double))
    for p in range(N):
        a = lam[p]
        acc = 0.0
        dacc = 0.0
        for t in range(K):
            ib = P.cb[p * K + t]
            ic = P.cc[p * K + t]
            b = lam[ib]
            c = lam[ic]
            acc += a / (b * c) - b / (a * c) - c / (a * b)
            if want_jac:
                dacc += 1.0 / (b * c) + b / (a * a * c) + c / (a * a * b)
                dr[p * N + ib] += s * (-a / (b * b * c) - 1.0 / (a * c) + c / (a * b * b))
                dr[p * N + ic] += s * (-a / (b * c * c) + b / (a * c * c) - 1.0 / (a * b))
        r[p] = 0.5 / a + s * acc
        if want_jac:
            dr[p * N + p] += -0.5 / (a * a) + s * dacc


cdef double eval_point(const Problem* P, Work* w, const double* x, double* F, double* J) noexcept nogil:
    """Fill F (and J) at x; return ||F||^2, or -1 when x is not admissible."""
    cdef int N = P.N, nv = P.N - 1, p, q
    cdef double f = 0.0
    for q in range(nv):
        if not isfinite(x[q]) or x[q] < COORD_FLOOR:
            return -1.0
    w.lam[0] = 1.0
    for q in range(nv):
        w.lam[q + 1] = x[q]
    ricci_and_jac(P, w.lam, w.r, w.dr, 1)
    for p in range(nv):
        F[p] = w.r[p] - w.r[p + 1]
        f += F[p] * F[p]
        for q in range(nv):
            J[p * nv + q] = w.dr[p * N + q + 1] - w.dr[(p + 1) * N + q + 1]
            if not isfinite(J[p * nv + q]):
                return -1.0
    if not isfinite(f):
        return -1.0
    return f


cdef bint lu_solve(int n, double* A, double* b, int* piv) noexcept nogil:
    """Solve A y = b in place (b <- y) by partial-pivot elimination."""
    cdef int i, j, k, kp
    cdef double amax, v, tmp, scale = 0.0
    for i in range(n * n):
        if fabs(A[i]) > scale:
            scale = fabs(A[i])
    if scale == 0.0 or not isfinite(scale):
        return 0
    for k in range(n):
        kp = k
        amax = fabs(A[k * n + k])
        for i in range(k + 1, n):
            v = fabs(A[i * n + k])
            if v > amax:
                amax = v
                kp = i
        if amax <= 1e-14 * scale:
            return 0
        if kp != k:
            for j in range(n):
                tmp = A[k * n + j]
                A[k * n + j] = A[kp * n + j]
                A[kp * n + j] = tmp
            tmp = b[k]
            b[k] = b[kp]
            b[kp] = tmp
        for i in range(k + 1, n):
            v = A[i * n + k] / A[k * n + k]
            if v != 0.0:
                for j in range(k + 1, n):
                    A[i * n + j] -= v * A[k * n + j]
                b[i] -= v * b[k]
    for i in range(n - 1, -1, -1):
        v = b[i]
        for j in range(i + 1, n):
            v -= A[i * n + j] * b[j]
        b[i] = v / A[i * n + i]
    for i in range(n):
        if not isfinite(b[i]):
            return 0
    return 1


cdef bint newton_dir(int nv, Work* w, const double* F, const double* J) noexcept nogil:
    cdef int i
    memcpy(w.A, J, nv * nv * sizeof(double))
    for i in range(nv):
        w.d[i] = -F[i]
    return lu_solve(nv, w.A, w.d, w.piv)


cdef double max_step(int nv, const double* x, const double* d) noexcept nogil:
    cdef double t = 1.0, lim
    cdef int i
    for i in range(nv):
        if d[i] < 0.0:
            lim = (x[i] - COORD_FLOOR) / -d[i]
            if lim < t:
                t = lim
    return t


cdef double maxabs(int nv, const double* v) noexcept nogil:
    cdef double m = 0.0
    cdef int i
    for i in range(nv):
        if fabs(v[i]) > m:
            m = fabs(v[i])
    return m


cdef int solve_single(const Problem* P, Work* w, double* x, double tol, int max_iter,
                      double* res_out, int* it_out) noexcept nogil:
    cdef int nv = P.N - 1, i, j, k, it = 0, rejects = 0
    cdef double f, fn, t, mu = LM_MU0, fmax, best, xmax
    cdef double* F = w.F
    cdef double* J = w.J
    cdef bint accepted
    if nv == 0:
        res_out[0] = 0.0
        it_out[0] = 0
        return 1
    f = eval_point(P, w, x, F, J)
    if f < 0.0:
        res_out[0] = 1e300
        it_out[0] = 0
        return 0
    while True:
        fmax = maxabs(nv, F)
        if fmax < tol:
            # polish: full Newton steps while the max-norm keeps dropping
            best = fmax
            for k in range(POLISH_STEPS):
                if not newton_dir(nv, w, F, J):
                    break
                for i in range(nv):
                    w.xn[i] = x[i] + w.d[i]
                if eval_point(P, w, w.xn, w.Fn, w.Jn) < 0.0:
                    break
                fn = maxabs(nv, w.Fn)
                if not fn < best:
                    break
                best = fn
                memcpy(x, w.xn, nv * sizeof(double))
                memcpy(F, w.Fn, nv * sizeof(double))
                memcpy(J, w.Jn, nv * nv * sizeof(double))
            res_out[0] = best
            it_out[0] = it
            return 1
        if it >= max_iter:
            res_out[0] = fmax
            it_out[0] = it
            return 0
        it += 1
        accepted = 0
        if rejects < NEWTON_REJECTS_BEFORE_LM:
            if newton_dir(nv, w, F, J):
                t = max_step(nv, x, w.d)
                while t >= MIN_STEP:
                    for i in range(nv):
                        w.xn[i] = x[i] + t * w.d[i]
                    fn = eval_point(P, w, w.xn, w.Fn, w.Jn)
                    if fn >= 0.0 and fn <= (1.0 - 2.0 * ARMIJO * t) * f:
                        accepted = 1
                        break
                    t *= 0.5
            if accepted:
                rejects = 0
            else:
                rejects += 1
        else:
            # (J^T J + mu diag(J^T J)) d = -J^T F
            for i in range(nv):
                w.rhs[i] = 0.0
                for k in range(nv):
                    w.rhs[i] -= J[k * nv + i] * F[k]
                for j in range(nv):
                    t = 0.0
                    for k in range(nv):
                        t += J[k * nv + i] * J[k * nv + j]
                    w.A[i * nv + j] = t
            for i in range(nv):
                t = w.A[i * nv + i]
                if t < 1e-12:
                    t = 1e-12
                w.A[i * nv + i] += mu * t
            if lu_solve(nv, w.A, w.rhs, w.piv):
                t = max_step(nv, x, w.rhs)
                for i in range(nv):
                    w.xn[i] = x[i] + t * w.rhs[i]
                fn = eval_point(P, w, w.xn, w.Fn, w.Jn)
                accepted = fn >= 0.0 and fn < f
            if accepted:
                mu = mu / 3.0
                if mu < 1e-12:
                    mu = 1e-12
                rejects = 0
            else:
                mu *= 4.0
                if mu > LM_MU_MAX:
                    res_out[0] = maxabs(nv, F)
                    it_out[0] = it
                    return 0
        if accepted:
            f = fn
            memcpy(x, w.xn, nv * sizeof(double))
            memcpy(F, w.Fn, nv * sizeof(double))
            memcpy(J, w.Jn, nv * nv * sizeof(double))
        xmax = 0.0
        for i in range(nv):
            if x[i] > xmax:
                xmax = x[i]
        if xmax > DIVERGENCE_BOUND:
            res_out[0] = maxabs(nv, F)
            it_out[0] = it
            return 0


cdef Work* alloc_work(int N) noexcept nogil:
    cdef int nv = N - 1
    cdef Work* w = <Work*> malloc(sizeof(Work))
    if w == NULL:
        return NULL
    w.lam = <double*> malloc(N * sizeof(double))
    w.r = <double*> malloc(N * sizeof(double))
    w.dr = <double*> malloc(N * N * sizeof(double))
    w.F = <double*> malloc((nv + 1) * sizeof(double))
    w.J = <double*> malloc((nv * nv + 1) * sizeof(double))
    w.xn = <double*> malloc((nv + 1) * sizeof(double))
    w.Fn = <double*> malloc((nv + 1) * sizeof(double))
    w.Jn = <double*> malloc((nv * nv + 1) * sizeof(double))
    w.d = <double*> malloc((nv + 1) * sizeof(double))
    w.A = <double*> malloc((nv * nv + 1) * sizeof(double))
    w.rhs = <double*> malloc((nv + 1) * sizeof(double))
    w.piv = <int*> malloc((nv + 1) * sizeof(int))
    return w


cdef void free_work(Work* w) noexcept nogil:
    if w == NULL:
        return
    free(w.lam); free(w.r); free(w.dr); free(w.F); free(w.J); free(w.xn)
    free(w.Fn); free(w.Jn); free(w.d); free(w.A); free(w.rhs); free(w.piv)
    free(w)


cdef class _Tables:
    cdef Problem P
    cdef object _b, _c

    def __cinit__(self, int n):
        b, c = chain_table(n)
        self._b = np.ascontiguousarray(b, dtype=np.intc)
        self._c = np.ascontiguousarray(c, dtype=np.intc)
        cdef const int[:, ::1] bv = self._b
        cdef const int[:, ::1] cv = self._c
        self.P.m = n + 1
        self.P.N = n * (n + 1) // 2
        self.P.K = n - 1
        self.P.cb = &bv[0, 0] if self.P.K > 0 else NULL
        self.P.cc = &cv[0, 0] if self.P.K > 0 else NULL


_tables_cache = {}


cdef _Tables _tables(int n):
    tb = _tables_cache.get(n)
    if tb is None:
        tb = _Tables(n)
        _tables_cache[n] = tb
    return tb


def ricci_vector(lam, int n):
    cdef _Tables tb = _tables(n)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    out = np.empty(tb.P.N)
    cdef double[::1] ov = out
    ricci_and_jac(&tb.P, &lv[0], &ov[0], NULL, 0)
    return out


def ricci_jacobian(lam, int n):
    cdef _Tables tb = _tables(n)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    r = np.empty(tb.P.N)
    out = np.empty((tb.P.N, tb.P.N))
    cdef double[::1] rv = r
    cdef double[:, ::1] ov = out
    ricci_and_jac(&tb.P, &lv[0], &rv[0], &ov[0, 0], 1)
    return out


def residual(x, int n):
    r = ricci_vector(np.concatenate(([1.0], np.asarray(x, dtype=float))), n)
    return r[:-1] - r[1:]


def residual_and_jacobian(x, int n):
    lam = np.concatenate(([1.0], np.asarray(x, dtype=float)))
    r = ricci_vector(lam, n)
    dr = ricci_jacobian(lam, n)
    return r[:-1] - r[1:], dr[:-1, 1:] - dr[1:, 1:]


def solve_single_py(x0, int n, double tol, int max_iter):
    X, res, it, ok = solve_batch(n, np.asarray(x0, dtype=float)[None, :], tol, max_iter)
    return X[0], float(res[0]), int(it[0]), bool(ok[0])


def solve_batch(int n, X0, double tol, int max_iter):
    """Solve from every row of ``X0``; returns ``(X, residual_norm, iterations, converged)``."""
    cdef _Tables tb = _tables(n)
    X = np.array(X0, dtype=float, order="C", copy=True)
    if X.ndim != 2 or X.shape[1] != tb.P.N - 1:
        raise ValueError(f"start points must have shape (T, {tb.P.N - 1})")
    cdef Py_ssize_t T = X.shape[0], t
    res = np.empty(T)
    iters = np.zeros(T, dtype=np.intc)
    ok = np.zeros(T, dtype=np.int8)
    if T == 0:
        return X, res, iters, ok
    cdef double[:, ::1] xv = X
    cdef double[::1] rv = res
    cdef int[::1] iv = iters
    cdef signed char[::1] okv = ok
    cdef double dummy = 0.0
    cdef double* xrow
    cdef Work* w
    with nogil:
        w = alloc_work(tb.P.N)
        if w != NULL:
            for t in range(T):
                xrow = &xv[t, 0] if tb.P.N > 1 else &dummy
                okv[t] = solve_single(&tb.P, w, xrow, tol, max_iter, &rv[t], &iv[t])
            free_work(w)
    if w == NULL:
        raise MemoryError()
    return X, res, iters, ok
