# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backward-Euler Picard kernel.

Mirrors _pyref.py sweep for sweep: lagged-coefficient implicit solves in
Jacobi pairing, Thomas elimination for the tridiagonal systems, clamped
power sources.  Keep the two files in lockstep; the test suite compares
them element-wise.
"""

from libc.math cimport fabs, pow

import numpy as np

BACKEND = "compiled"

SOURCE_COUPLED = 0
SOURCE_NONE = 1
SOURCE_SHIFTED = 2
SOURCE_FROZEN = 3


cdef void _thomas(double[::1] sub, double[::1] diag, double[::1] sup,
                  double[::1] rhs, double[::1] out,
                  double[::1] cp, double[::1] dp) noexcept nogil:
    """In-place Thomas elimination; sub[0] and sup[M-1] are ignored."""
    cdef Py_ssize_t M = diag.shape[0]
    cdef Py_ssize_t i
    cdef double denom
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, M):
        denom = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / denom
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / denom
    out[M - 1] = dp[M - 1]
    for i in range(M - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


def thomas_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system; sub/sup have length M-1."""
    M = diag.shape[0]
    sub_full = np.zeros(M)
    sup_full = np.zeros(M)
    sub_full[1:] = sub
    sup_full[:-1] = sup
    out = np.empty(M)
    cp = np.empty(M)
    dp = np.empty(M)
    diag_c = np.ascontiguousarray(diag, dtype=np.float64)
    rhs_c = np.ascontiguousarray(rhs, dtype=np.float64)
    _thomas(sub_full, diag_c, sup_full, rhs_c, out, cp, dp)
    return out


cdef void _fill_source(const double[::1] other, double expo, int mode,
                       const double[::1] frozen, double[::1] out) noexcept nogil:
    cdef Py_ssize_t M = other.shape[0]
    cdef Py_ssize_t i
    cdef double base
    for i in range(M):
        if mode == 1:
            out[i] = 0.0
        elif mode == 3:
            out[i] = frozen[i]
        else:
            base = other[i]
            if base < 0.0:
                base = 0.0
            if mode == 2:
                out[i] = pow(base + 1.0, expo)
            else:
                out[i] = pow(base, expo)


cdef void _implicit_sweep(const double[::1] wk, const double[::1] w_old,
                          const double[::1] src,
                          double bc, double p, double dt, double h, double eps,
                          double[::1] sub, double[::1] diag, double[::1] sup,
                          double[::1] rhs, double[::1] out,
                          double[::1] cp, double[::1] dp) noexcept nogil:
    """One linearized implicit solve with coefficients lagged at wk."""
    cdef Py_ssize_t M = wk.shape[0]
    cdef Py_ssize_t i
    cdef double lam = dt / (h * h)
    cdef double half_pm2 = 0.5 * (p - 2.0)
    cdef double g, c_left, c_right

    # Left face of node 0.
    g = (wk[0] - bc) / h
    c_left = pow(g * g + eps, half_pm2)
    for i in range(M):
        if i + 1 < M:
            g = (wk[i + 1] - wk[i]) / h
        else:
            g = (bc - wk[M - 1]) / h
        c_right = pow(g * g + eps, half_pm2)
        diag[i] = 1.0 + lam * (c_left + c_right)
        sub[i] = -lam * c_left
        sup[i] = -lam * c_right
        rhs[i] = w_old[i] + dt * src[i]
        if i == 0:
            rhs[i] += lam * c_left * bc
        if i == M - 1:
            rhs[i] += lam * c_right * bc
        c_left = c_right
    _thomas(sub, diag, sup, rhs, out, cp, dp)


def pair_step(const double[::1] u_old, const double[::1] v_old,
              double bc_u, double bc_v,
              double p, double q, double m, double n,
              double dt, double h, double eps, double tol, int max_iter,
              int source_mode, const double[::1] src_u, const double[::1] src_v):
    """Advance both components one backward-Euler step.

    Same contract as _pyref.pair_step: returns
    (u_new, v_new, iters, resid, neg_flag).
    """
    cdef Py_ssize_t M = u_old.shape[0]
    u_arr = np.empty(M)
    v_arr = np.empty(M)
    uk_arr = np.array(u_old, dtype=np.float64, copy=True)
    vk_arr = np.array(v_old, dtype=np.float64, copy=True)
    work = np.empty((8, M))

    cdef double[::1] u_next = u_arr
    cdef double[::1] v_next = v_arr
    cdef double[::1] uk = uk_arr
    cdef double[::1] vk = vk_arr
    cdef double[::1] su = work[0]
    cdef double[::1] sv = work[1]
    cdef double[::1] sub = work[2]
    cdef double[::1] diag = work[3]
    cdef double[::1] sup = work[4]
    cdef double[::1] rhs = work[5]
    cdef double[::1] cp = work[6]
    cdef double[::1] dp = work[7]

    cdef double clamp_cap = 10.0 * tol
    cdef bint neg_flag = 0
    cdef double resid = 0.0
    cdef double scale, change
    cdef int iters = 0
    cdef Py_ssize_t i
    cdef double[::1] tmp

    with nogil:
        while iters < max_iter:
            iters += 1
            _fill_source(vk, m, source_mode, src_u, su)
            _fill_source(uk, n, source_mode, src_v, sv)
            _implicit_sweep(uk, u_old, su, bc_u, p, dt, h, eps,
                            sub, diag, sup, rhs, u_next, cp, dp)
            _implicit_sweep(vk, v_old, sv, bc_v, q, dt, h, eps,
                            sub, diag, sup, rhs, v_next, cp, dp)

            resid = 0.0
            scale = bc_u if bc_u > bc_v else bc_v
            for i in range(M):
                if u_next[i] < 0.0:
                    if u_next[i] < -clamp_cap:
                        neg_flag = 1
                    u_next[i] = 0.0
                if v_next[i] < 0.0:
                    if v_next[i] < -clamp_cap:
                        neg_flag = 1
                    v_next[i] = 0.0
                change = fabs(u_next[i] - uk[i])
                if change > resid:
                    resid = change
                change = fabs(v_next[i] - vk[i])
                if change > resid:
                    resid = change
                if u_next[i] > scale:
                    scale = u_next[i]
                if v_next[i] > scale:
                    scale = v_next[i]

            tmp = uk; uk = u_next; u_next = tmp
            tmp = vk; vk = v_next; v_next = tmp
            if resid <= tol * (1.0 + scale):
                break

    # uk/vk views point at whichever buffer holds the accepted iterate.
    u_out = np.asarray(uk).copy()
    v_out = np.asarray(vk).copy()
    return u_out, v_out, iters, resid, neg_flag != 0
