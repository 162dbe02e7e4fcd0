from __future__ import annotations

import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from carbontax import _kernels_py, kernels

compiled = pytest.importorskip("carbontax._kernels", reason="compiled extension not built")


def _random_system(seed, nx=3, ne=1, steps=60):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((nx, nx)))
    hx = q @ np.diag(rng.uniform(-0.95, 0.95, nx)) @ q.T
    eta = rng.standard_normal((nx, ne)) * 0.01
    hxx = rng.standard_normal((nx, nx, nx)) * 0.05
    hss = rng.standard_normal(nx) * 1e-3
    shocks = rng.standard_normal((steps, ne))
    return hx, eta, hxx, hss, shocks, rng.standard_normal(nx) * 0.01, rng.standard_normal(nx) * 1e-4


def test_backend_is_compiled_when_built():
    assert kernels.BACKEND == "cython"


def test_environment_variable_forces_fallback():
    code = "import carbontax.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, CARBONTAX_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_pruned_backends_agree(seed, ne):
    hx, eta, hxx, hss, shocks, xf0, xs0 = _random_system(seed, ne=ne)
    f_c, s_c = compiled.pruned_states(hx, eta, hxx, hss, shocks, xf0, xs0)
    f_p, s_p = _kernels_py.pruned_states(hx, eta, hxx, hss, shocks, xf0, xs0)
    assert_allclose(np.asarray(f_c), f_p, rtol=1e-13, atol=1e-16)
    assert_allclose(np.asarray(s_c), s_p, rtol=1e-12, atol=1e-16)


@given(st.integers(0, 2**32 - 1))
def test_unpruned_backends_agree(seed):
    hx, eta, hxx, hss, shocks, x0, _ = _random_system(seed)
    a = np.asarray(compiled.unpruned_states(hx, eta, hxx, hss, shocks, x0))
    b = _kernels_py.unpruned_states(hx, eta, hxx, hss, shocks, x0)
    assert_allclose(a, b, rtol=1e-12, atol=1e-16)


def test_pruned_recursion_against_explicit_loop():
    hx, eta, hxx, hss, shocks, xf0, xs0 = _random_system(7)
    xf, xs = compiled.pruned_states(hx, eta, hxx, hss, shocks, xf0, xs0)
    f, s = xf0.copy(), xs0.copy()
    for t, u in enumerate(shocks):
        s = hx @ s + 0.5 * np.einsum("iab,a,b->i", hxx, f, f) + 0.5 * hss
        f = hx @ f + eta @ u
        assert_allclose(xf[t + 1], f, rtol=1e-13, atol=1e-18)
        assert_allclose(xs[t + 1], s, rtol=1e-12, atol=1e-18)
    assert_allclose(xf[0], xf0)


def test_linear_system_pruned_equals_unpruned():
    hx, eta, _, _, shocks, x0, _ = _random_system(3)
    zero = np.zeros((3, 3, 3))
    xf, xs = compiled.pruned_states(hx, eta, zero, np.zeros(3), shocks, x0, np.zeros(3))
    x = compiled.unpruned_states(hx, eta, zero, np.zeros(3), shocks, x0)
    assert np.array_equal(np.asarray(xf), np.asarray(x))
    assert np.all(np.asarray(xs) == 0.0)


@pytest.mark.parametrize("impl", [compiled, _kernels_py], ids=["cython", "python"])
def test_risky_fixed_point(impl):
    hx = np.diag([0.5, 0.9, 0.95])
    hss = np.array([1e-3, -2e-3, 0.0])
    xs, iters = impl.risky_fixed_point(hx, hss, np.zeros(3), 1e-14, 100000)
    assert iters > 0
    assert_allclose(np.asarray(xs), np.linalg.solve(np.eye(3) - hx, 0.5 * hss), rtol=1e-10, atol=1e-15)
    _, fail = impl.risky_fixed_point(hx, hss, np.zeros(3), 1e-14, 3)
    assert fail == -1


def test_fallback_module_reload(monkeypatch):
    monkeypatch.setenv("CARBONTAX_PURE_PYTHON", "1")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.BACKEND == "python"
        assert reloaded.pruned_states is _kernels_py.pruned_states
    finally:
        monkeypatch.delenv("CARBONTAX_PURE_PYTHON")
        importlib.reload(kernels)
