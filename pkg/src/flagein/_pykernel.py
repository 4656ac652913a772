"""Pure-numpy kernels: Ricci components, residuals, and the per-trial solver.

Mirrors ``_ckernel.pyx`` step for step. Used when the compiled extension is
unavailable, and as the cross-check for it in the tests.
"""

from __future__ import annotations

import numpy as np

from .flag_model import chain_table

# Solver constants shared with the compiled kernel.
MIN_STEP = 2.0**-30
COORD_FLOOR = 1e-12
DIVERGENCE_BOUND = 1e8
ARMIJO = 1e-4
LM_MU0 = 1e-3
LM_MU_MAX = 1e12
NEWTON_REJECTS_BEFORE_LM = 2
POLISH_STEPS = 3

BACKEND = "python"


def ricci_vector(lam: np.ndarray, n: int) -> np.ndarray:
    b, c = chain_table(n)
    a = lam[:, None]
    lb = lam[b]
    lc = lam[c]
    t = a / (lb * lc) - lb / (a * lc) - lc / (a * lb)
    return 0.5 / lam + t.sum(axis=1) / (4.0 * (n + 1))


def ricci_jacobian(lam: np.ndarray, n: int) -> np.ndarray:
    """d r_p / d lambda_q for the full N-vector of metric coefficients."""
    b, c = chain_table(n)
    N = lam.shape[0]
    s = 1.0 / (4.0 * (n + 1))
    a = lam[:, None]
    lb = lam[b]
    lc = lam[c]
    da = 1.0 / (lb * lc) + lb / (a * a * lc) + lc / (a * a * lb)
    db = -a / (lb * lb * lc) - 1.0 / (a * lc) + lc / (a * lb * lb)
    dc = -a / (lb * lc * lc) + lb / (a * lc * lc) - 1.0 / (a * lb)
    jac = np.zeros((N, N))
    rows = np.arange(N)
    jac[rows, rows] = -0.5 / (lam * lam) + s * da.sum(axis=1)
    rr = np.broadcast_to(rows[:, None], b.shape)
    np.add.at(jac, (rr, b), s * db)
    np.add.at(jac, (rr, c), s * dc)
    return jac


def _full(x: np.ndarray) -> np.ndarray:
    lam = np.empty(x.shape[0] + 1)
    lam[0] = 1.0
    lam[1:] = x
    return lam


def residual(x: np.ndarray, n: int) -> np.ndarray:
    r = ricci_vector(_full(x), n)
    return r[:-1] - r[1:]


def residual_and_jacobian(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    lam = _full(x)
    r = ricci_vector(lam, n)
    dr = ricci_jacobian(lam, n)
    return r[:-1] - r[1:], dr[:-1, 1:] - dr[1:, 1:]


def _max_step(x, d):
    # largest t <= 1 keeping every coordinate >= COORD_FLOOR
    neg = d < 0
    if not neg.any():
        return 1.0
    return min(1.0, float(np.min((x[neg] - COORD_FLOOR) / -d[neg])))


def _trial_eval(x, n):
    if not np.all(np.isfinite(x)) or np.any(x < COORD_FLOOR):
        return None, None, np.inf
    F, J = residual_and_jacobian(x, n)
    f = float(F @ F)
    if not np.isfinite(f) or not np.all(np.isfinite(J)):
        return None, None, np.inf
    return F, J, f


def _lin_solve(A, rhs):
    try:
        d = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)):
        return None
    return d


def _polish(x, F, J, n):
    best = float(np.max(np.abs(F)))
    for _ in range(POLISH_STEPS):
        d = _lin_solve(J, -F)
        if d is None:
            break
        xn = x + d
        Fn, Jn, _ = _trial_eval(xn, n)
        if Fn is None:
            break
        mn = float(np.max(np.abs(Fn)))
        if not mn < best:
            break
        x, F, J, best = xn, Fn, Jn, mn
    return x, best


def solve_single(x0: np.ndarray, n: int, tol: float, max_iter: int):
    """Damped Newton with Levenberg-Marquardt fallback from one start point.

    Returns ``(x, residual_max_norm, iterations, converged)``.
    """
    x = np.array(x0, dtype=float)
    if x.shape[0] == 0:
        return x, 0.0, 0, True
    F, J, f = _trial_eval(x, n)
    if F is None:
        return x, np.inf, 0, False
    rejects = 0
    mu = LM_MU0
    it = 0
    while True:
        fmax = float(np.max(np.abs(F)))
        if fmax < tol:
            x, fmax = _polish(x, F, J, n)
            return x, fmax, it, True
        if it >= max_iter:
            return x, fmax, it, False
        it += 1
        if rejects < NEWTON_REJECTS_BEFORE_LM:
            d = _lin_solve(J, -F)
            accepted = False
            if d is not None:
                t = _max_step(x, d)
                while t >= MIN_STEP:
                    xn = x + t * d
                    Fn, Jn, fn = _trial_eval(xn, n)
                    if Fn is not None and fn <= (1.0 - 2.0 * ARMIJO * t) * f:
                        accepted = True
                        break
                    t *= 0.5
            if accepted:
                x, F, J, f = xn, Fn, Jn, fn
                rejects = 0
            else:
                rejects += 1
        else:
            JtJ = J.T @ J
            scale = np.maximum(np.diag(JtJ), 1e-12)
            d = _lin_solve(JtJ + mu * np.diag(scale), -(J.T @ F))
            accepted = False
            if d is not None:
                xn = x + _max_step(x, d) * d
                Fn, Jn, fn = _trial_eval(xn, n)
                accepted = Fn is not None and fn < f
            if accepted:
                x, F, J, f = xn, Fn, Jn, fn
                mu = max(mu / 3.0, 1e-12)
                rejects = 0
            else:
                mu *= 4.0
                if mu > LM_MU_MAX:
                    return x, float(np.max(np.abs(F))), it, False
        if np.max(x) > DIVERGENCE_BOUND:
            return x, float(np.max(np.abs(F))), it, False


def solve_batch(n: int, X0: np.ndarray, tol: float, max_iter: int):
    """Run :func:`solve_single` over the rows of ``X0``.

    Returns arrays ``(X, residual_norm, iterations, converged)``.
    """
    X0 = np.ascontiguousarray(X0, dtype=float)
    T = X0.shape[0]
    X = np.empty_like(X0)
    res = np.empty(T)
    iters = np.empty(T, dtype=np.intc)
    ok = np.zeros(T, dtype=np.int8)
    for t in range(T):
        x, r, k, conv = solve_single(X0[t], n, tol, max_iter)
        X[t] = x
        res[t] = r
        iters[t] = k
        ok[t] = conv
    return X, res, iters, ok
