"""Pure-Python versions of the compiled state recursions in ``_kernels.pyx``.

Same signatures and results; used when the extension is not built.
"""

from __future__ import annotations

import numpy as np


def pruned_states(hx, eta, hxx, hss, shocks, xf0, xs0):
    hx = np.asarray(hx, dtype=float)
    eta = np.asarray(eta, dtype=float)
    hxx = np.asarray(hxx, dtype=float)
    hss = np.asarray(hss, dtype=float)
    shocks = np.asarray(shocks, dtype=float)
    T = shocks.shape[0]
    nx = hx.shape[0]
    hxx_flat = 0.5 * hxx.reshape(nx, nx * nx)
    drift = 0.5 * hss
    loads = shocks @ eta.T
    xf = np.empty((T + 1, nx))
    xs = np.empty((T + 1, nx))
    xf[0] = xf0
    xs[0] = xs0
    for t in range(T):
        f = xf[t]
        xf[t + 1] = hx @ f + loads[t]
        xs[t + 1] = hx @ xs[t] + hxx_flat @ np.outer(f, f).ravel() + drift
    return xf, xs


def unpruned_states(hx, eta, hxx, hss, shocks, x0):
    hx = np.asarray(hx, dtype=float)
    hxx = np.asarray(hxx, dtype=float)
    shocks = np.asarray(shocks, dtype=float)
    T = shocks.shape[0]
    nx = hx.shape[0]
    hxx_flat = 0.5 * hxx.reshape(nx, nx * nx)
    drift = 0.5 * np.asarray(hss, dtype=float)
    loads = shocks @ np.asarray(eta, dtype=float).T
    x = np.empty((T + 1, nx))
    x[0] = x0
    for t in range(T):
        v = x[t]
        x[t + 1] = hx @ v + hxx_flat @ np.outer(v, v).ravel() + drift + loads[t]
    return x


def risky_fixed_point(hx, hss, xs0, tol, max_iter):
    hx = np.asarray(hx, dtype=float)
    drift = 0.5 * np.asarray(hss, dtype=float)
    cur = np.array(xs0, dtype=float)
    for it in range(1, max_iter + 1):
        nxt = hx @ cur + drift
        diff = np.max(np.abs(nxt - cur)) if cur.size else 0.0
        cur = nxt
        if diff <= tol:
            return cur, it
    return cur, -1
