from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from carbontax import hyperdual as hd
from carbontax.hyperdual import HyperDual, jacobian, jacobian_hessian


def _central_hessian(f, x, h=1e-4):
    m = x.size
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            ei, ej = np.eye(m)[i] * h, np.eye(m)[j] * h
            out[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return out


def test_linear_function_has_zero_second_derivatives():
    a, b = 2.5, -1.25
    f0, jac, hess = jacobian_hessian(lambda z: [a * z[0] + b * z[1]], [0.3, 0.7])
    assert_allclose(jac, [[a, b]])
    assert np.all(hess == 0.0)


def test_polynomial_against_analytic_values():
    # z1^2 z2 at (2, 3): gradient (12, 4), cross derivative 4, d2/dz1^2 = 6
    f0, jac, hess = jacobian_hessian(lambda z: [z[0] ** 2 * z[1]], [2.0, 3.0])
    assert f0[0] == 12.0
    assert_allclose(jac[0], [12.0, 4.0])
    assert_allclose(hess[0], [[6.0, 4.0], [4.0, 0.0]])


def test_jacobian_matches_jacobian_hessian():
    f = lambda z: [hd.exp(z[0]) * z[1], z[0] / z[1], hd.log(z[1]) - z[0] ** 3]
    x = np.array([0.4, 1.7])
    _, j1 = jacobian(f, x)
    _, j2, _ = jacobian_hessian(f, x)
    assert_allclose(j1, j2, rtol=0, atol=1e-15)


def test_constant_output_rows_are_zero():
    f0, jac, hess = jacobian_hessian(lambda z: [z[0] * 0 + 1.0, 5.0], [1.0])
    assert_allclose(f0, [1.0, 5.0])
    assert np.all(jac == 0.0) and np.all(hess == 0.0)


def test_comparison_uses_real_part():
    x = HyperDual(1.0, 5.0)
    assert x < 2.0 and x > 0.5 and x <= 1.0 and x >= 1.0


@given(
    st.floats(0.2, 3.0),
    st.floats(0.2, 3.0),
    st.floats(-2.0, 2.0),
)
def test_elementary_functions_against_finite_differences(x, y, p):
    def f_hd(z):
        return [z[0] ** p * hd.exp(z[1] / 3.0) - hd.log(z[0] + z[1]) / (1.0 + z[1] ** 2), z[0] * z[1] - 2.0 / z[0]]

    def f_np(v, k):
        x0, x1 = v
        out = [x0**p * math.exp(x1 / 3.0) - math.log(x0 + x1) / (1.0 + x1**2), x0 * x1 - 2.0 / x0]
        return out[k]

    point = np.array([x, y])
    _, jac, hess = jacobian_hessian(f_hd, point)
    for k in range(2):
        fd_hess = _central_hessian(lambda v: f_np(v, k), point)
        assert_allclose(hess[k], fd_hess, rtol=1e-5, atol=1e-5)
        h = 1e-6
        fd_grad = [(f_np(point + h * e, k) - f_np(point - h * e, k)) / (2 * h) for e in np.eye(2)]
        assert_allclose(jac[k], fd_grad, rtol=1e-6, atol=1e-8)


@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_power_rules(x, p):
    h = HyperDual(x, 1.0, 1.0, 0.0) ** p
    assert h.a == pytest.approx(x**p)
    assert h.b == pytest.approx(p * x ** (p - 1))
    assert h.d == pytest.approx(p * (p - 1) * x ** (p - 2))
    r = 2.0 ** HyperDual(x, 1.0, 1.0, 0.0)
    assert r.d == pytest.approx(math.log(2.0) ** 2 * 2.0**x)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_hessian_is_symmetric(x, y):
    _, _, hess = jacobian_hessian(lambda z: [z[0] ** 3 * hd.exp(z[1]) / (z[0] + z[1])], [x, y])
    assert abs(hess[0, 0, 1] - hess[0, 1, 0]) <= 1e-12 * max(1.0, abs(hess[0, 0, 1]))
