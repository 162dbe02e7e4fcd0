# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled state recursions for pruned second-order simulation."""

import numpy as np
cimport numpy as cnp

from libc.math cimport fabs

cnp.import_array()


def pruned_states(const double[:, ::1] hx, const double[:, ::1] eta, const double[:, :, ::1] hxx,
                  const double[::1] hss, const double[:, ::1] shocks,
                  const double[::1] xf0, const double[::1] xs0):
    """First- and second-order state registers for ``T`` periods.

    Row 0 holds the initial registers; row ``t + 1`` follows innovation ``shocks[t]``.
    """
    cdef Py_ssize_t nx = hx.shape[0]
    cdef Py_ssize_t ne = eta.shape[1]
    cdef Py_ssize_t T = shocks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xf_arr = np.empty((T + 1, nx))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xs_arr = np.empty((T + 1, nx))
    cdef double[:, ::1] xf = xf_arr
    cdef double[:, ::1] xs = xs_arr
    cdef Py_ssize_t t, i, j, k
    cdef double accf, accs, q
    for i in range(nx):
        xf[0, i] = xf0[i]
        xs[0, i] = xs0[i]
    for t in range(T):
        for i in range(nx):
            accf = 0.0
            accs = 0.5 * hss[i]
            for j in range(nx):
                accf = accf + hx[i, j] * xf[t, j]
                accs = accs + hx[i, j] * xs[t, j]
                q = 0.0
                for k in range(nx):
                    q = q + hxx[i, j, k] * xf[t, k]
                accs = accs + 0.5 * q * xf[t, j]
            for k in range(ne):
                accf = accf + eta[i, k] * shocks[t, k]
            xf[t + 1, i] = accf
            xs[t + 1, i] = accs
    return xf_arr, xs_arr


def unpruned_states(const double[:, ::1] hx, const double[:, ::1] eta, const double[:, :, ::1] hxx,
                    const double[::1] hss, const double[:, ::1] shocks, const double[::1] x0):
    """Plain second-order recursion (quadratic terms fed by the full state)."""
    cdef Py_ssize_t nx = hx.shape[0]
    cdef Py_ssize_t ne = eta.shape[1]
    cdef Py_ssize_t T = shocks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x_arr = np.empty((T + 1, nx))
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t t, i, j, k
    cdef double acc, q
    for i in range(nx):
        x[0, i] = x0[i]
    for t in range(T):
        for i in range(nx):
            acc = 0.5 * hss[i]
            for j in range(nx):
                q = 0.0
                for k in range(nx):
                    q = q + hxx[i, j, k] * x[t, k]
                acc = acc + (hx[i, j] + 0.5 * q) * x[t, j]
            for k in range(ne):
                acc = acc + eta[i, k] * shocks[t, k]
            x[t + 1, i] = acc
    return x_arr


def risky_fixed_point(const double[:, ::1] hx, const double[::1] hss, const double[::1] xs0,
                      double tol, long max_iter):
    """Iterate ``xs' = hx xs + hss / 2`` until successive iterates differ by at most ``tol``.

    Returns ``(xs, iterations)``; ``iterations == -1`` signals no convergence.
    """
    cdef Py_ssize_t nx = hx.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cur_arr = np.array(xs0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nxt_arr = np.empty(nx)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef Py_ssize_t i, j
    cdef long it
    cdef double acc, diff
    for it in range(1, max_iter + 1):
        diff = 0.0
        for i in range(nx):
            acc = 0.5 * hss[i]
            for j in range(nx):
                acc = acc + hx[i, j] * cur[j]
            nxt[i] = acc
            if fabs(acc - cur[i]) > diff:
                diff = fabs(acc - cur[i])
        for i in range(nx):
            cur[i] = nxt[i]
        if diff <= tol:
            return cur_arr, it
    return cur_arr, -1
