"""Second-order hyper-dual numbers.

A hyper-dual number ``a + b e1 + c e2 + d e1 e2`` with ``e1**2 = e2**2 = 0``
carries a value, two directional first derivatives and the mixed second
derivative.  Seeding input ``i`` along ``e1`` and input ``j`` along ``e2``
gives ``d2f/dxi dxj`` exactly in the ``e1 e2`` part, with no truncation
error.

Components may be numpy arrays, so a single pass evaluates every
``(i, j)`` pair at once when the seeds are laid out along the array axis.
"""

from __future__ import annotations

import math
from numbers import Real

import numpy as np


class HyperDual:
    __slots__ = ("a", "b", "c", "d")
    __array_priority__ = 1000

    def __init__(self, a, b=0.0, c=0.0, d=0.0):
        self.a = a
        self.b = b
        self.c = c
        self.d = d

    def __repr__(self) -> str:
        return f"HyperDual({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"

    def _chain(self, f0, f1, f2) -> HyperDual:
        # f0, f1, f2: value, first and second derivative of g at self.a
        return HyperDual(
            f0,
            f1 * self.b,
            f1 * self.c,
            f1 * self.d + f2 * self.b * self.c,
        )

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)
        return HyperDual(self.a + other, self.b, self.c, self.d)

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.a, -self.b, -self.c, -self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)
        return HyperDual(self.a - other, self.b, self.c, self.d)

    def __rsub__(self, other):
        return HyperDual(other - self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.a * other.a,
                self.a * other.b + self.b * other.a,
                self.a * other.c + self.c * other.a,
                self.a * other.d + self.b * other.c + self.c * other.b + self.d * other.a,
            )
        return HyperDual(self.a * other, self.b * other, self.c * other, self.d * other)

    __rmul__ = __mul__

    def reciprocal(self) -> HyperDual:
        inv = 1.0 / self.a
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        return HyperDual(self.a / other, self.b / other, self.c / other, self.d / other)

    def __rtruediv__(self, other):
        return other * self.reciprocal()

    def __pow__(self, p):
        if isinstance(p, HyperDual):
            return exp(p * log(self))
        if p == 0:
            return HyperDual(np.ones_like(self.a) if isinstance(self.a, np.ndarray) else 1.0)
        if p == 1:
            return self
        if p == 2:
            return self * self
        f0 = self.a**p
        f1 = p * self.a ** (p - 1)
        f2 = p * (p - 1) * self.a ** (p - 2)
        return self._chain(f0, f1, f2)

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def exp(self) -> HyperDual:
        e = np.exp(self.a)
        return self._chain(e, e, e)

    def log(self) -> HyperDual:
        inv = 1.0 / self.a
        return self._chain(np.log(self.a), inv, -inv * inv)

    # comparisons act on the real part only
    def __lt__(self, other):
        return self.a < value(other)

    def __le__(self, other):
        return self.a <= value(other)

    def __gt__(self, other):
        return self.a > value(other)

    def __ge__(self, other):
        return self.a >= value(other)


def value(x):
    """Real part of ``x`` (identity for plain numbers and arrays)."""
    return x.a if isinstance(x, HyperDual) else x


def exp(x):
    if isinstance(x, HyperDual):
        return x.exp()
    if isinstance(x, Real):
        return math.exp(x)
    return np.exp(x)


def log(x):
    if isinstance(x, HyperDual):
        return x.log()
    if isinstance(x, Real):
        return math.log(x)
    return np.log(x)


def pairwise_seeds(point: np.ndarray) -> tuple[list[HyperDual], np.ndarray, np.ndarray]:
    """Seed every input for a one-pass evaluation of all second derivatives.

    Returns the seeded inputs and the row/column index arrays of the
    upper-triangular pairs laid out along the component axis.
    """
    point = np.asarray(point, dtype=float)
    m = point.size
    rows, cols = np.triu_indices(m)
    seeds = []
    for k in range(m):
        seeds.append(
            HyperDual(
                np.full(rows.size, point[k]),
                (rows == k).astype(float),
                (cols == k).astype(float),
                np.zeros(rows.size),
            )
        )
    return seeds, rows, cols


def jacobian_hessian(func, point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, Jacobian and Hessian tensor of a vector function.

    ``func`` maps a sequence of scalars to a sequence of scalars and must
    be written with the arithmetic above (plus :func:`exp`/:func:`log`).
    Output shapes are ``(k,)``, ``(k, m)`` and ``(k, m, m)``.
    """
    point = np.asarray(point, dtype=float)
    m = point.size
    seeds, rows, cols = pairwise_seeds(point)
    out = func(seeds)
    k = len(out)
    f0 = np.empty(k)
    jac = np.zeros((k, m))
    hess = np.zeros((k, m, m))
    diag = np.flatnonzero(rows == cols)
    for i, fi in enumerate(out):
        if not isinstance(fi, HyperDual):
            # constant output row
            f0[i] = float(np.asarray(fi).ravel()[0]) if np.ndim(fi) else float(fi)
            continue
        a = np.broadcast_to(fi.a, rows.shape)
        f0[i] = a[0]
        b = np.broadcast_to(fi.b, rows.shape)
        d = np.broadcast_to(fi.d, rows.shape)
        jac[i, rows[diag]] = b[diag]
        hess[i, rows, cols] = d
        hess[i, cols, rows] = d
    return f0, jac, hess


def jacobian(func, point) -> tuple[np.ndarray, np.ndarray]:
    """Value and Jacobian using ``m`` first-order seeds (cheaper than the Hessian pass)."""
    point = np.asarray(point, dtype=float)
    m = point.size
    eye = np.eye(m)
    seeds = [HyperDual(np.full(m, point[k]), eye[k], 0.0, 0.0) for k in range(m)]
    out = func(seeds)
    k = len(out)
    f0 = np.empty(k)
    jac = np.zeros((k, m))
    for i, fi in enumerate(out):
        if not isinstance(fi, HyperDual):
            f0[i] = float(fi)
            continue
        f0[i] = np.broadcast_to(fi.a, (m,))[0]
        jac[i] = np.broadcast_to(fi.b, (m,))
    return f0, jac
