"""Reference backward-Euler Picard kernel in pure numpy/scipy.

This is the fallback (and the semantics oracle) for the compiled kernel in
_speedups.pyx: both implement exactly the same sweep so they can be compared
element-wise in tests.  One pair_step call advances both components by one
implicit step, iterating lagged-coefficient sweeps in Jacobi fashion so the
u and v updates are symmetric (each solve sees the other component's
previous iterate, never a half-updated one).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

BACKEND = "python"

SOURCE_COUPLED = 0
SOURCE_NONE = 1
SOURCE_SHIFTED = 2
SOURCE_FROZEN = 3


def thomas_solve(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray,
                 rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system; sub/sup have length M-1."""
    M = diag.size
    ab = np.zeros((3, M))
    ab[0, 1:] = sup
    ab[1, :] = diag
    ab[2, :-1] = sub
    return solve_banded((1, 1), ab, rhs)


def _source_values(other: np.ndarray, expo: float, mode: int,
                   frozen: np.ndarray) -> np.ndarray:
    if mode == SOURCE_NONE:
        return np.zeros_like(other)
    if mode == SOURCE_FROZEN:
        return frozen
    base = np.maximum(other, 0.0)
    if mode == SOURCE_SHIFTED:
        return (base + 1.0) ** expo
    return base**expo


def _implicit_sweep(wk: np.ndarray, w_old: np.ndarray, src: np.ndarray,
                    bc: float, p: float, dt: float, h: float,
                    eps: float) -> np.ndarray:
    """One linearized implicit solve with coefficients lagged at wk."""
    M = wk.size
    ext = np.empty(M + 2)
    ext[0] = ext[-1] = bc
    ext[1:-1] = wk
    g = np.diff(ext) / h
    coef = (g * g + eps) ** (0.5 * (p - 2.0))

    lam = dt / (h * h)
    diag = 1.0 + lam * (coef[:-1] + coef[1:])
    off = -lam * coef[1:-1]
    b = w_old + dt * src
    b[0] += lam * coef[0] * bc
    b[-1] += lam * coef[-1] * bc
    return thomas_solve(off, diag, off, b)


def pair_step(u_old, v_old, bc_u, bc_v, p, q, m, n, dt, h, eps, tol,
              max_iter, source_mode, src_u, src_v):
    """Advance both components one backward-Euler step.

    Returns (u_new, v_new, iters, resid, neg_flag).  resid is the final
    iterate-to-iterate sup change; convergence means
    resid <= tol * (1 + scale) with scale the running sup of the pair.
    Small negative undershoots (roundoff from the linear solver) are clamped
    to zero; anything below -10*tol raises neg_flag instead, since the
    M-matrix structure makes real negativity a solver defect.
    """
    uk = np.asarray(u_old, dtype=float).copy()
    vk = np.asarray(v_old, dtype=float).copy()
    clamp_cap = 10.0 * tol
    neg_flag = False
    resid = np.inf
    iters = 0

    for iters in range(1, max_iter + 1):
        su = _source_values(vk, m, source_mode, src_u)
        sv = _source_values(uk, n, source_mode, src_v)
        u_next = _implicit_sweep(uk, u_old, su, bc_u, p, dt, h, eps)
        v_next = _implicit_sweep(vk, v_old, sv, bc_v, q, dt, h, eps)

        if float(min(u_next.min(), v_next.min())) < -clamp_cap:
            neg_flag = True
        np.maximum(u_next, 0.0, out=u_next)
        np.maximum(v_next, 0.0, out=v_next)

        resid = max(
            float(np.max(np.abs(u_next - uk))),
            float(np.max(np.abs(v_next - vk))),
        )
        uk, vk = u_next, v_next
        scale = max(float(uk.max()), float(vk.max()), bc_u, bc_v)
        if resid <= tol * (1.0 + scale):
            break

    return uk, vk, iters, resid, neg_flag
