"""Deterministic steady states for each regime.

BAU is closed form.  The unconstrained planner tax ``beta chi / (1 - beta eta)``
is closed form and the remaining block is a short fixed point in output.
The constrained planner couples the tax, the marginal-utility gap and the
social cost of carbon, so the rest point is a root of a scalar equation in
the tax.  Every candidate is then polished by damped Newton on the full
residual system with an exact Jacobian and certified against it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import hyperdual
from .model import (
    Calibration,
    DomainError,
    Scenario,
    UtilityDomainError,
    VariableLayout,
    marginal_utility,
    period_utility,
    residuals,
    variable_layout,
)

log = logging.getLogger(__name__)

CERTIFY_TOL = 1e-10
NEWTON_TOL = 1e-12


class SolverError(RuntimeError):
    """Nonlinear solver failed to converge."""


@dataclass(frozen=True)
class SteadyState:
    scenario: Scenario
    calib: Calibration
    layout: VariableLayout
    values: np.ndarray
    iterations: int = 0
    residual_norm: float = 0.0
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.layout.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.layout.names, self.values)}


def ss_scc(lambda_h: float, calib: Calibration) -> float:
    """Steady-state social cost of carbon given the marginal-utility gap."""
    if lambda_h < 0:
        raise DomainError(f"lambda_h must be non-negative, got {lambda_h!r}")
    be = calib.beta * calib.eta_pollution
    if be >= 1.0:
        raise DomainError("beta * eta_pollution must be below one")
    return calib.beta / (1.0 - be) * calib.chi * (1.0 + lambda_h)


def unconstrained_tax(calib: Calibration) -> float:
    return ss_scc(0.0, calib)


def _fill(calib: Calibration, regime: str, xi: float, tau: float) -> dict[str, float]:
    """All steady-state values implied by a given tax rate."""
    p = calib
    g = p.gamma
    if tau > 0.0:
        y = 1.0
        for _ in range(200):
            mu = (tau * p.phi1 * y ** (-p.phi2) / (p.theta1 * p.theta2)) ** (1.0 / (p.theta2 - 1.0))
            if mu > 1.0:
                raise DomainError(f"steady-state abatement share {mu:.4f} exceeds one")
            f = p.theta1 * mu**p.theta2
            e = (1.0 - mu) * p.phi1 * y ** (1.0 - p.phi2)
            varrho = 1.0 - f - tau * (1.0 - p.phi2) * e / y
            k_over_y = p.alpha * varrho / (1.0 / p.beta - 1.0 + p.delta)
            y_new = (p.A * k_over_y**p.alpha * p.N ** (1.0 - p.alpha)) ** (1.0 / (1.0 - p.alpha))
            if abs(y_new - y) < 1e-15:
                y = y_new
                break
            y = y_new
    else:
        mu, f, varrho = 0.0, 0.0, 1.0
        k_over_y = p.alpha / (1.0 / p.beta - 1.0 + p.delta)
        y = (p.A * k_over_y**p.alpha * p.N ** (1.0 - p.alpha)) ** (1.0 / (1.0 - p.alpha))
    e = (1.0 - mu) * p.phi1 * y ** (1.0 - p.phi2)
    k = k_over_y * y
    inv = p.delta * k
    c = y - inv - f * y
    w = (1.0 - p.alpha) * varrho * y / p.N
    t = tau * e
    d = y - w * p.N - inv - f * y - t
    x = e / (1.0 - p.eta_pollution)
    if regime == "unconstrained":
        ch = cs = c
        th = t + d
    else:
        th = (xi / g) * t if regime == "constrained" else 0.0
        ch = w * p.N + th
        cs = (c - g * ch) / (1.0 - g)
    ts = (t - g * th) / (1.0 - g)
    lam_s = marginal_utility(cs, x, p)
    lam_h = g * (marginal_utility(ch, x, p) - lam_s) / lam_s
    vx = ss_scc(0.0 if regime == "unconstrained" else max(lam_h, 0.0), p)
    if regime != "unconstrained" and lam_h < 0:
        vx = p.beta / (1.0 - p.beta * p.eta_pollution) * p.chi * (1.0 + lam_h)
    uh = period_utility(ch, x, p) / (1.0 - p.beta)
    us = period_utility(cs, x, p) / (1.0 - p.beta)
    return dict(
        K=k, X=x, a=0.0, Y=y, C=c, CH=ch, CS=cs, I=inv, W=w, D=d, E=e, mu=mu, tau=tau,
        lamS=lam_s, lamH=lam_h, VE=tau, VX=vx, Q=1.0, varrho=varrho, T=t, TH=th, TS=ts,
        UH=uh, US=us, Wel=g * uh + (1.0 - g) * us, Pb=p.beta, Ps=p.beta * d / (1.0 - p.beta),
    )  # fmt: skip


def _static_system(scenario: Scenario, calib: Calibration):
    def func(z):
        return residuals(scenario, calib, z, z, 0.0)

    return func


def newton_polish(scenario: Scenario, calib: Calibration, z0: np.ndarray, *, tol: float = NEWTON_TOL, max_iter: int = 50):
    """Damped Newton on ``F(z, z, 0) = 0`` with an exact Jacobian.

    Returns ``(z, iterations, residual_inf_norm)``.
    """
    func = _static_system(scenario, calib)
    z = np.array(z0, dtype=float)
    r = np.asarray(func(z), dtype=float)
    norm = np.max(np.abs(r))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return z, it - 1, norm
        _, jac = hyperdual.jacobian(func, z)
        step = np.linalg.solve(jac, -r)
        s = 1.0
        while True:
            trial = z + s * step
            try:
                r_trial = np.asarray(func(trial), dtype=float)
                n_trial = np.max(np.abs(r_trial))
            except (DomainError, FloatingPointError):
                n_trial = np.inf
            if np.isfinite(n_trial) and n_trial < norm * (1.0 - 1e-4 * s) or (n_trial <= tol):
                break
            s *= 0.5
            if s < 1e-10:
                if norm < 1e3 * tol:
                    # rounding floor reached
                    return z, it, norm
                raise SolverError(f"damping floor reached; residual norm {norm:.3e}")
        z, r, norm = trial, r_trial, n_trial
    if norm <= tol:
        return z, max_iter, norm
    raise SolverError(f"Newton did not converge in {max_iter} iterations; residual norm {norm:.3e}")


def _certify(scenario: Scenario, calib: Calibration, vals: dict[str, float], iterations: int = 0) -> SteadyState:
    layout = variable_layout(scenario)
    z0 = layout.pack(**vals)
    z, it, _ = newton_polish(scenario, calib, z0)
    res = np.asarray(residuals(scenario, calib, z, z, 0.0), dtype=float)
    norm = float(np.max(np.abs(res)))
    if norm > CERTIFY_TOL:
        raise SolverError(f"steady state for {scenario.label} not certified: residual {norm:.3e}")
    ss = SteadyState(scenario, calib, layout, z, iterations + it, norm)
    _check_invariants(ss)
    return ss


def _check_invariants(ss: SteadyState) -> None:
    p = ss.calib
    if not (-1e-12 <= ss["mu"] <= 1.0):
        raise DomainError(f"abatement share {ss['mu']} outside [0, 1]")
    for c in ("CH", "CS"):
        if ss[c] - p.chi * ss["X"] <= 0.0:
            raise UtilityDomainError(f"non-positive surplus consumption for {c}")
    if ss["E"] < 0:
        raise DomainError("negative emissions")


def solve_ss_bau(calib: Calibration) -> SteadyState:
    vals = _fill(calib, "bau", 0.0, 0.0)
    return _certify(Scenario.bau(), calib, vals)


def solve_ss_unconstrained(calib: Calibration) -> SteadyState:
    tau = unconstrained_tax(calib)
    vals = _fill(calib, "unconstrained", 0.0, tau)
    return _certify(Scenario.unconstrained(), calib, vals)


def _constrained_tax_gap(calib: Calibration, xi: float):
    g = calib.gamma

    def gap(tau: float) -> float:
        v = _fill(calib, "constrained", xi, tau)
        return tau * (1.0 + (xi / g) * v["lamH"]) - v["VX"]

    return gap


def solve_ss_constrained(calib: Calibration, xi: float | str, warm_start: SteadyState | None = None) -> SteadyState:
    """Constrained-planner rest point for revenue share ``xi`` (``"gamma"`` for uniform)."""
    scenario = Scenario.constrained(xi)
    if calib.gamma <= 0.0:
        raise DomainError("constrained regime requires gamma > 0")
    xi_v = scenario.xi_value(calib)
    gap = _constrained_tax_gap(calib, xi_v)
    tau0 = warm_start["tau"] if warm_start is not None else unconstrained_tax(calib)
    # bracket the root around the warm start; gap(0) < 0 whenever chi > 0
    lo, hi = 0.0, max(tau0, 1e-8)
    n_eval = 0
    try:
        while gap(hi) < 0.0:
            lo, hi = hi, 2.0 * hi
            n_eval += 1
            if n_eval > 60:
                raise SolverError("could not bracket the constrained tax")
    except (DomainError, FloatingPointError) as exc:
        raise SolverError(f"constrained tax bracket failed: {exc}") from exc
    if calib.chi == 0.0:
        tau = 0.0
    elif gap(hi) == 0.0:
        tau = hi
    else:
        tau, info = brentq(gap, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, full_output=True)
        n_eval += info.iterations
    vals = _fill(calib, "constrained", xi_v, tau)
    return _certify(scenario, calib, vals, iterations=n_eval)


def solve_steady_state(scenario: Scenario, calib: Calibration, warm_start: SteadyState | None = None) -> SteadyState:
    if scenario.regime == "bau":
        return solve_ss_bau(calib)
    if scenario.regime == "unconstrained":
        return solve_ss_unconstrained(calib)
    return solve_ss_constrained(calib, scenario.xi, warm_start=warm_start)
