"""Independent checks on the solver stack.

* :func:`perfect_foresight_path` solves the deterministic model exactly
  over a long horizon by stacked Newton, giving an oracle for the
  perturbation dynamics at small shocks.
* :func:`identity_audit` measures the accounting identities on steady
  states and simulated paths.
* :func:`euler_accuracy` evaluates the expected equilibrium residuals of a
  policy along a simulated path with Gauss-Hermite quadrature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .hyperdual import HyperDual
from .model import Calibration, DomainError, Scenario, abatement_cost, residuals, saver_budget_residual, variable_layout
from .perturbation import PolicySolution
from .simulate import SimulatedPaths, _policy_arrays, observe
from .steady_state import SteadyState, SolverError

log = logging.getLogger(__name__)

PF_TOL = 1e-10
INTERIOR_TOL = 1e-8
TERMINAL_TOL = 1e-6


class TerminalConditionError(SolverError):
    """The stacked path did not return to the steady state within the horizon."""


# ---------------------------------------------------------------------------
# Perfect foresight
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForesightPath:
    """Exact deterministic path; row ``t`` holds period-``t`` levels, ``t = 0..horizon``."""

    horizon: int
    values: np.ndarray
    names: tuple[str, ...]
    terminal: str
    max_residual: float
    terminal_gap: float
    iterations: int

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def deviations(self, ss: SteadyState) -> np.ndarray:
        return self.values - ss.values


def _period_jacobians(scenario: Scenario, calib: Calibration, z_next: np.ndarray, z_curr: np.ndarray, shocks: np.ndarray):
    """Residuals ``(T, n)`` and derivative blocks ``(T, n, n)`` wrt ``z_next`` and ``z_curr``."""
    steps, n = z_curr.shape
    eye = np.eye(2 * n)[:, :, None]
    seeded_next = [HyperDual(z_next[:, i], eye[i], 0.0, 0.0) for i in range(n)]
    seeded_curr = [HyperDual(z_curr[:, i], eye[n + i], 0.0, 0.0) for i in range(n)]
    out = residuals(scenario, calib, seeded_next, seeded_curr, shocks)
    res = np.zeros((steps, n))
    jac = np.zeros((steps, n, 2 * n))
    for e, row in enumerate(out):
        if isinstance(row, HyperDual):
            res[:, e] = np.broadcast_to(row.a, (steps,))
            jac[:, e, :] = np.broadcast_to(row.b, (2 * n, steps)).T
        else:
            res[:, e] = np.broadcast_to(np.asarray(row, dtype=float), (steps,))
    return res, jac[:, :, :n], jac[:, :, n:]


def perfect_foresight_path(
    scenario: Scenario,
    calib: Calibration,
    initial_states: dict[str, float] | np.ndarray,
    shock_path: np.ndarray | None = None,
    horizon: int = 3000,
    *,
    ss: SteadyState | None = None,
    tol: float = PF_TOL,
    max_iter: int = 30,
) -> ForesightPath:
    """Stacked-Newton solution of the deterministic model.

    Parameters
    ----------
    initial_states
        Period-0 levels of ``K``, ``X`` and ``a`` (dict or length-3 array).
    shock_path
        Innovations ``u_1, u_2, ...`` to log TFP, known in advance; shorter
        paths are padded with zeros.
    horizon
        Number of periods ``T``.  Period-``T`` controls are pinned to the
        deterministic steady state; period-``T`` states are free.

    Raises
    ------
    SolverError
        Newton failure (the message carries the residual trace).
    TerminalConditionError
        Period-``T`` states still differ from the steady state by more than
        ``1e-6`` (relative to ``max(1, |level|)``): the horizon is too short.
    """
    from .steady_state import solve_steady_state

    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    if ss is None:
        ss = solve_steady_state(scenario, calib)
    layout = variable_layout(scenario)
    n, nx = layout.n, layout.n_states
    if isinstance(initial_states, dict):
        x0 = np.array([initial_states[s] for s in layout.states], dtype=float)
    else:
        x0 = np.asarray(initial_states, dtype=float)
    u = np.zeros(horizon)
    if shock_path is not None:
        sp_ = np.asarray(shock_path, dtype=float).ravel()[:horizon]
        u[: sp_.size] = sp_

    z = np.tile(ss.values, (horizon + 1, 1))
    z[0, :nx] = x0
    free = np.ones((horizon + 1, n), dtype=bool)
    free[0, :nx] = False
    free[horizon, nx:] = False
    free_idx = np.flatnonzero(free.ravel())

    trace = []
    for it in range(max_iter + 1):
        try:
            res, j_next, j_curr = _period_jacobians(scenario, calib, z[1:], z[:-1], u)
        except (DomainError, FloatingPointError) as exc:
            raise SolverError(f"perfect-foresight residuals undefined at iteration {it}: {exc}; trace {trace}") from exc
        norm = float(np.max(np.abs(res)))
        trace.append(norm)
        if norm <= tol:
            break
        if it == max_iter:
            raise SolverError(f"perfect-foresight Newton did not converge; residual trace {trace}")
        jac = _stacked_jacobian(j_next, j_curr, horizon, n)[:, free_idx]
        step = spsolve(jac.tocsc(), -res.ravel())
        if not np.all(np.isfinite(step)):
            raise SolverError(f"singular stacked Jacobian at iteration {it}; trace {trace}")
        flat = z.ravel().copy()
        flat[free_idx] += step
        z = flat.reshape(horizon + 1, n)

    scale = np.maximum(1.0, np.abs(ss.values[:nx]))
    gap = float(np.max(np.abs(z[horizon, :nx] - ss.values[:nx]) / scale))
    if gap > TERMINAL_TOL:
        raise TerminalConditionError(f"states at period {horizon} are {gap:.2e} from the steady state; lengthen the horizon")
    return ForesightPath(horizon, z, layout.names, "steady-state controls", norm, gap, it)


def _stacked_jacobian(j_next: np.ndarray, j_curr: np.ndarray, horizon: int, n: int) -> sp.csr_matrix:
    """Block-bidiagonal Jacobian of all period residuals wrt the full ``(T+1) x n`` path."""
    t_idx, e_idx, v_idx = np.meshgrid(np.arange(horizon), np.arange(n), np.arange(n), indexing="ij")
    rows = (t_idx * n + e_idx).ravel()
    cols_curr = (t_idx * n + v_idx).ravel()
    cols_next = ((t_idx + 1) * n + v_idx).ravel()
    data = np.concatenate([j_curr.ravel(), j_next.ravel()])
    rr = np.concatenate([rows, rows])
    cc = np.concatenate([cols_curr, cols_next])
    keep = data != 0.0
    return sp.csr_matrix((data[keep], (rr[keep], cc[keep])), shape=(horizon * n, (horizon + 1) * n))


def first_order_response(policy: PolicySolution, x0_dev: np.ndarray, horizon: int) -> np.ndarray:
    """Deviation path ``(horizon + 1, n)`` of the linear policy from state deviation ``x0_dev``."""
    nx = policy.nx
    out = np.zeros((horizon + 1, nx + policy.ny))
    x = np.asarray(x0_dev, dtype=float)
    for t in range(horizon + 1):
        out[t, :nx] = x
        out[t, nx:] = policy.gx @ x
        x = policy.hx @ x
    return out


def deterministic_second_order_step(policy: PolicySolution, x0_dev: np.ndarray) -> np.ndarray:
    """Period-0 controls and period-1 states of the second-order policy without risk terms."""
    hxx, gxx, _, _ = policy.quadratic_parts()
    x = np.asarray(x0_dev, dtype=float)
    y = policy.gx @ x + 0.5 * np.einsum("yab,a,b->y", gxx, x, x)
    x1 = policy.hx @ x + 0.5 * np.einsum("iab,a,b->i", hxx, x, x)
    return np.concatenate([x1, y])


# ---------------------------------------------------------------------------
# Identity audit
# ---------------------------------------------------------------------------

#: Tolerances by object kind.  Relative identities are scaled as documented in ``identity_audit``.
AUDIT_TOLERANCES = MappingProxyType(
    {
        "steady_state": MappingProxyType(
            {"walras": 1e-10, "government_budget": 1e-10, "resource": 1e-10, "aggregation": 1e-10, "tax_rule": 1e-10, "transfer_rule": 1e-10}
        ),
        "path": MappingProxyType(
            {"walras": 1e-8, "government_budget": 1e-10, "resource": 1e-4, "aggregation": 1e-10, "tax_rule": 1e-8, "transfer_rule": 1e-10}
        ),
    }
)


@dataclass(frozen=True)
class AuditReport:
    kind: str
    residuals: MappingProxyType
    tolerances: MappingProxyType

    @property
    def passed(self) -> MappingProxyType:
        return MappingProxyType({k: bool(v <= self.tolerances[k]) for k, v in self.residuals.items()})

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def lines(self) -> list[str]:
        return [
            f"{k:18s} {v:.3e} (tol {self.tolerances[k]:.0e}) {'PASS' if v <= self.tolerances[k] else 'FAIL'}"
            for k, v in self.residuals.items()
        ]


def identity_audit(
    obj: SteadyState | SimulatedPaths | np.ndarray,
    scenario: Scenario | None = None,
    calib: Calibration | None = None,
    *,
    tolerances: dict[str, float] | None = None,
) -> AuditReport:
    """Maximum residual of the accounting identities.

    Reported measures: the omitted saver budget relative to ``C^S``; the
    government budget ``gamma T^H + (1 - gamma) T^S - tau E`` (absolute);
    the resource constraint relative to ``Y``; consumption aggregation
    (absolute); the regime tax rule relative to ``V^X`` (absolute in BAU);
    the transfer rule for ``T^H`` (absolute).
    """
    if isinstance(obj, SteadyState):
        scenario = obj.scenario if scenario is None else scenario
        calib = obj.calib if calib is None else calib
        values = obj.values[None, :]
        kind = "steady_state"
    else:
        if scenario is None or calib is None:
            raise ValueError("scenario and calib are required for paths")
        values = obj.values if isinstance(obj, SimulatedPaths) else np.atleast_2d(obj)
        kind = "path"
    layout = variable_layout(scenario)
    v = {name: values[:, i] for i, name in enumerate(layout.names)}
    g = calib.gamma
    xi = scenario.xi_value(calib)
    f, _ = abatement_cost(np.clip(v["mu"], 0.0, 1.0), calib)
    out = {
        "walras": np.max(np.abs(saver_budget_residual(v, calib)) / np.abs(v["CS"])),
        "government_budget": np.max(np.abs(g * v["TH"] + (1.0 - g) * v["TS"] - v["tau"] * v["E"])),
        "resource": np.max(np.abs(v["Y"] - v["C"] - v["I"] - f * v["Y"]) / np.abs(v["Y"])),
        "aggregation": np.max(np.abs(v["C"] - g * v["CH"] - (1.0 - g) * v["CS"])),
    }
    if scenario.regime == "bau":
        out["tax_rule"] = np.max(np.abs(v["tau"]))
        out["transfer_rule"] = np.max(np.abs(v["TH"]))
    elif scenario.regime == "unconstrained":
        out["tax_rule"] = np.max(np.abs(v["tau"] - v["VX"]) / np.abs(v["VX"]))
        out["transfer_rule"] = np.max(np.abs(v["TH"] - v["tau"] * v["E"] - v["D"]))
    else:
        out["tax_rule"] = np.max(np.abs(v["tau"] * (1.0 + (xi / g) * v["lamH"]) - v["VX"]) / np.abs(v["VX"]))
        out["transfer_rule"] = np.max(np.abs(v["TH"] - (xi / g) * v["tau"] * v["E"]))
    tol = dict(AUDIT_TOLERANCES[kind])
    if tolerances:
        tol.update(tolerances)
    return AuditReport(kind, MappingProxyType({k: float(x) for k, x in out.items()}), MappingProxyType(tol))


# ---------------------------------------------------------------------------
# Expected-residual accuracy
# ---------------------------------------------------------------------------


def euler_accuracy(
    policy: PolicySolution,
    xf: np.ndarray,
    xs: np.ndarray,
    *,
    nodes: int = 3,
) -> np.ndarray:
    """Mean absolute expected residual per equation along given registers.

    For every period the next-period registers are formed at each
    Gauss-Hermite node of the innovation, observed without identity
    enforcement, and the residuals are averaged with the quadrature
    weights.  Returns one value per equation.
    """
    hx, eta, hxx, hss, _, _ = _policy_arrays(policy)
    nx = policy.nx
    ss = policy.ss
    knots, weights = np.polynomial.hermite_e.hermegauss(nodes)
    weights = weights / weights.sum()
    z_now = observe(policy, xf, xs, enforce_identities=False)
    quad = (xf[:, :, None] * xf[:, None, :]).reshape(len(xf), nx * nx)
    xs_next = xs @ hx.T + 0.5 * quad @ hxx.reshape(nx, nx * nx).T + 0.5 * hss
    expected = np.zeros((len(xf), ss.layout.n))
    for k, w in zip(knots, weights):
        # eta carries sigma_eta; the residual wants the innovation to log TFP itself
        shock = np.full(len(xf), k * ss.calib.sigma_eta)
        xf_next = xf @ hx.T + eta[:, 0] * k
        z_next = observe(policy, xf_next, xs_next, enforce_identities=False)
        rows = residuals(ss.scenario, ss.calib, z_next.T, z_now.T, shock)
        expected += w * np.column_stack(rows)
    return np.mean(np.abs(expected), axis=0)
