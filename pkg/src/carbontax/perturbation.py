"""First- and second-order perturbation around a certified steady state.

The system ``E_t F(z', z, u') = 0`` is differentiated exactly with
hyper-dual numbers.  The first-order solution comes from an ordered QZ
decomposition; the second-order terms solve the linear (Sylvester-type)
equations obtained by differentiating ``E_t F`` twice with respect to the
states and to the perturbation scale.  Policies take the form::

    x' = hx x + 1/2 hxx (x, x) + 1/2 hss + eta u'
    y  = gx x + 1/2 gxx (x, x) + 1/2 gss

with ``x`` and ``y`` deviations from the steady state and ``eta`` the
loading of a unit-variance innovation (so it already carries ``sigma_eta``).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import ordqz

from . import hyperdual
from .model import Calibration, Scenario, VariableLayout, residuals, variable_layout
from .steady_state import SteadyState

log = logging.getLogger(__name__)

UNIT_CIRCLE = 1.0 - 1e-8
BORDERLINE = 1e-8


class PerturbationError(RuntimeError):
    """The perturbation solution does not exist or is not unique."""


class BlanchardKahnError(PerturbationError):
    def __init__(self, n_stable: int, n_states: int, moduli: np.ndarray):
        kind = "indeterminacy" if n_stable > n_states else "explosiveness"
        super().__init__(f"{kind}: {n_stable} stable generalized eigenvalues for {n_states} predetermined states")
        self.n_stable = n_stable
        self.n_states = n_states
        self.moduli = moduli


class SingularityError(PerturbationError):
    pass


class BorderlineRootWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DerivativeBundle:
    """Derivatives of ``F`` with respect to the stacked ``(z_next, z_curr, u)``.

    ``jac`` has shape ``(n_eq, 2n + n_u)`` and ``hess`` ``(n_eq, 2n + n_u, 2n + n_u)``.
    """

    jac: np.ndarray
    hess: np.ndarray
    n: int
    n_states: int
    n_shocks: int
    ss: SteadyState | None = None
    residual: np.ndarray | None = None
    equations: tuple[str, ...] = ()

    @property
    def f_next(self) -> np.ndarray:
        return self.jac[:, : self.n]

    @property
    def f_curr(self) -> np.ndarray:
        return self.jac[:, self.n : 2 * self.n]

    @property
    def f_shock(self) -> np.ndarray:
        return self.jac[:, 2 * self.n :]


@dataclass(frozen=True)
class PolicySolution:
    hx: np.ndarray
    gx: np.ndarray
    eta: np.ndarray
    eigenvalues: np.ndarray
    n_stable: int
    hxx: np.ndarray | None = None
    gxx: np.ndarray | None = None
    hss: np.ndarray | None = None
    gss: np.ndarray | None = None
    ss: SteadyState | None = None
    borderline: tuple[complex, ...] = ()
    order: int = 1
    diagnostics: dict = field(default_factory=dict)

    @property
    def nx(self) -> int:
        return self.hx.shape[0]

    @property
    def ny(self) -> int:
        return self.gx.shape[0]

    @property
    def blanchard_kahn(self) -> str:
        return "ok" if self.n_stable == self.nx else "failed"

    def quadratic_parts(self):
        nx, ny = self.nx, self.ny
        if self.order < 2:
            return (np.zeros((nx, nx, nx)), np.zeros((ny, nx, nx)), np.zeros(nx), np.zeros(ny))
        return self.hxx, self.gxx, self.hss, self.gss

    def first_order(self) -> PolicySolution:
        return replace(self, hxx=None, gxx=None, hss=None, gss=None, order=1)

    def with_shock_scale(self, k: float) -> PolicySolution:
        """Same solution with the innovation standard deviation multiplied by ``k``."""
        if self.order < 2:
            return replace(self, eta=self.eta * k)
        return replace(self, eta=self.eta * k, hss=self.hss * k * k, gss=self.gss * k * k)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(func, n: int, n_states: int, point: np.ndarray, n_shocks: int = 1, equations=()) -> DerivativeBundle:
    """Exact Jacobian and Hessian of ``func(z_next, z_curr, u)`` at ``point``."""

    def stacked(v):
        return func(v[:n], v[n : 2 * n], v[2 * n] if n_shocks == 1 else v[2 * n :])

    # corner points give infinite derivatives; they are reported below, not warned about
    with np.errstate(divide="ignore", invalid="ignore"):
        f0, jac, hess = hyperdual.jacobian_hessian(stacked, point)
    bad = ~np.isfinite(jac).all(axis=1) | ~np.isfinite(hess).all(axis=(1, 2))
    if bad.any():
        names = [equations[i] if i < len(equations) else str(i) for i in np.flatnonzero(bad)]
        raise SingularityError(f"non-finite derivative in equation(s): {', '.join(names)}")
    return DerivativeBundle(jac, hess, n, n_states, n_shocks, residual=f0, equations=tuple(equations))


def differentiate_system(scenario: Scenario, calib: Calibration, ss: SteadyState) -> DerivativeBundle:
    layout = variable_layout(scenario)
    z = ss.values
    point = np.concatenate([z, z, [0.0]])

    def func(zn, zc, u):
        return residuals(scenario, calib, zn, zc, u)

    bundle = differentiate(func, layout.n, layout.n_states, point, 1, layout.equations)
    return replace(bundle, ss=ss)


# ---------------------------------------------------------------------------
# First order
# ---------------------------------------------------------------------------


def solve_first_order(bundle: DerivativeBundle) -> PolicySolution:
    n, nx = bundle.n, bundle.n_states
    a = bundle.f_next
    b = -bundle.f_curr

    def stable(alpha, beta):
        return np.abs(alpha) < UNIT_CIRCLE * np.abs(beta)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s_mat, t_mat, alpha, beta, _, z_mat = ordqz(b, a, sort=stable, output="complex")
    with np.errstate(divide="ignore", invalid="ignore"):
        eig = np.where(np.abs(beta) > 0, alpha / np.where(beta == 0, 1, beta), np.inf)
    moduli = np.abs(eig)
    n_stable = int(np.sum(stable(alpha, beta)))
    borderline = tuple(complex(e) for e in eig[np.abs(moduli - 1.0) <= BORDERLINE])
    if borderline:
        warnings.warn(f"generalized eigenvalue(s) within {BORDERLINE} of the unit circle: {borderline}", BorderlineRootWarning, stacklevel=2)
    if n_stable != nx:
        raise BlanchardKahnError(n_stable, nx, np.sort(moduli))

    z11 = z_mat[:nx, :nx]
    z21 = z_mat[nx:, :nx]
    if np.linalg.cond(z11) > 1e12:
        raise PerturbationError("states are not identified by the stable block (Z11 singular)")
    z11_inv = np.linalg.inv(z11)
    gx = np.real_if_close(z21 @ z11_inv, tol=1e6).real
    s11 = s_mat[:nx, :nx]
    t11 = t_mat[:nx, :nx]
    hx = np.real_if_close(z11 @ np.linalg.solve(t11, s11) @ z11_inv, tol=1e6).real

    # shock loading: law-of-motion rows must hold for every realization
    f_xn = bundle.f_next[:, :nx]
    eta, *_ = np.linalg.lstsq(f_xn, -bundle.f_shock, rcond=None)
    if np.max(np.abs(f_xn @ eta + bundle.f_shock)) > 1e-10:
        raise PerturbationError("shocks must enter only through the state laws of motion")

    sigma = 1.0
    if bundle.ss is not None:
        sigma = bundle.ss.calib.sigma_eta
    order = np.argsort(moduli)
    return PolicySolution(
        hx=hx,
        gx=gx,
        eta=eta * sigma,
        eigenvalues=eig[order],
        n_stable=n_stable,
        ss=bundle.ss,
        borderline=borderline,
        order=1,
    )


# ---------------------------------------------------------------------------
# Second order
# ---------------------------------------------------------------------------


def _solve_generalized_sylvester(a0: np.ndarray, b0: np.ndarray, c: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``a0 P + b0 P c = rhs`` for ``P`` (n x m) with ``c`` of shape (m, m)."""
    n, m = rhs.shape
    big = np.kron(np.eye(m), a0) + np.kron(c.T, b0)
    cond = np.linalg.cond(big)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularityError(f"singular Sylvester operator (condition {cond:.2e})")
    sol = np.linalg.solve(big, rhs.reshape(-1, order="F"))
    return sol.reshape((n, m), order="F")


def solve_second_order(bundle: DerivativeBundle, first: PolicySolution) -> PolicySolution:
    if first.n_stable != first.nx:
        raise BlanchardKahnError(first.n_stable, first.nx, np.abs(first.eigenvalues))
    n, nx = bundle.n, bundle.n_states
    ny = n - nx
    nu = bundle.n_shocks
    hx, gx, eta = first.hx, first.gx, first.eta

    h = bundle.hess
    if np.max(np.abs(h[:, 2 * n :, :])) > 0.0:
        raise PerturbationError("shocks must enter the residuals linearly and additively")
    h = h[:, : 2 * n, : 2 * n]

    j_next = bundle.f_next
    j_curr = bundle.f_curr
    j_nx, j_ny = j_next[:, :nx], j_next[:, nx:]
    j_cy = j_curr[:, nx:]

    m_x = np.vstack([np.eye(nx), gx])  # dz/dx
    v_x = np.vstack([m_x @ hx, m_x])  # d(z', z)/dx
    q_xx = np.einsum("ia,eij,jb->eab", v_x, h, v_x).reshape(n, nx * nx)

    m1 = j_nx + j_ny @ gx
    a0 = np.hstack([m1, j_cy])
    b0 = np.hstack([np.zeros((n, nx)), j_ny])
    p = _solve_generalized_sylvester(a0, b0, np.kron(hx, hx), -q_xx)
    hxx = p[:nx].reshape(nx, nx, nx)
    gxx = p[nx:].reshape(ny, nx, nx)

    # perturbation-scale terms; innovations are independent with unit variance
    rhs = np.zeros(n)
    for k in range(nu):
        e = eta[:, k]
        v_e = np.concatenate([m_x @ e, np.zeros(n)])
        rhs += np.einsum("i,eij,j->e", v_e, h, v_e)
        rhs += j_ny @ np.einsum("yab,a,b->y", gxx, e, e)
    a_ss = np.hstack([m1, j_ny + j_cy])
    cond = np.linalg.cond(a_ss)
    if cond > 1e14:
        raise SingularityError(f"singular uncertainty-correction system (condition {cond:.2e})")
    s = np.linalg.solve(a_ss, -rhs)
    return replace(first, hxx=hxx, gxx=gxx, hss=s[:nx], gss=s[nx:], order=2)


def solve(scenario: Scenario, calib: Calibration, ss: SteadyState, order: int = 2) -> PolicySolution:
    """Differentiate and solve to the requested order (1 or 2)."""
    bundle = differentiate_system(scenario, calib, ss)
    first = solve_first_order(bundle)
    if order == 1:
        return first
    if order != 2:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return solve_second_order(bundle, first)


def layout_of(policy: PolicySolution) -> VariableLayout:
    return policy.ss.layout
