"""Pruned second-order simulation, moments, stochastic steady state and IRFs.

Simulation keeps two state registers, as in the usual pruning scheme::

    xf' = hx xf + eta u'
    xs' = hx xs + 1/2 hxx (xf, xf) + 1/2 hss
    y   = gx (xf + xs) + 1/2 gxx (xf, xf) + 1/2 gss

so the quadratic terms are only ever fed by the first-order register.
The recursion itself runs in :mod:`carbontax.kernels`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import kernels
from .model import abatement_cost, scenario_definitions
from .perturbation import PolicySolution

log = logging.getLogger(__name__)

SSS_TOL = 1e-12
SSS_MAX_ITER = 1_000_000
N_BATCHES = 50

#: Variables whose log standard deviation Table-3-style reports carry.
LOG_STD_VARIABLES = ("Y", "I", "C", "CS", "CH", "lamH", "tau", "E", "VX")
#: Extra columns computed from the path: abatement spending and tax revenue.
DERIVED = ("fY", "tauE")


class SimulationError(RuntimeError):
    pass


class DivergenceError(SimulationError):
    """The zero-shock pruned recursion did not settle."""


class PathError(SimulationError):
    """A simulated path left the utility domain."""

    def __init__(self, period: int, variable: str, value: float):
        super().__init__(f"surplus consumption of {variable} is {value:.3e} <= 0 in period {period}")
        self.period = period
        self.variable = variable
        self.value = value


# ---------------------------------------------------------------------------
# Observation map
# ---------------------------------------------------------------------------


def _policy_arrays(policy: PolicySolution):
    hxx, gxx, hss, gss = policy.quadratic_parts()
    nx = policy.nx
    return (
        np.ascontiguousarray(policy.hx, dtype=float),
        np.ascontiguousarray(policy.eta, dtype=float),
        np.ascontiguousarray(hxx, dtype=float),
        np.ascontiguousarray(hss, dtype=float),
        np.asarray(gxx, dtype=float).reshape(policy.ny, nx * nx),
        np.asarray(gss, dtype=float),
    )


def observe(policy: PolicySolution, xf: np.ndarray, xs: np.ndarray, *, enforce_identities: bool = True) -> np.ndarray:
    """Levels of every layout variable given the two state registers.

    ``xf`` and ``xs`` have shape ``(T, nx)``.  With ``enforce_identities`` the
    tax, transfer and regime-fixed slots are recomputed exactly from the
    other observations.
    """
    xf = np.atleast_2d(xf)
    xs = np.atleast_2d(xs)
    nx = policy.nx
    _, _, _, _, gxx_flat, gss = _policy_arrays(policy)
    quad = (xf[:, :, None] * xf[:, None, :]).reshape(len(xf), nx * nx)
    y = (xf + xs) @ policy.gx.T + 0.5 * quad @ gxx_flat.T + 0.5 * gss
    levels = np.hstack([xf + xs, y]) + policy.ss.values
    if enforce_identities:
        levels = _apply_definitions(policy, levels)
    return levels


def _apply_definitions(policy: PolicySolution, levels: np.ndarray) -> np.ndarray:
    layout = policy.ss.layout
    cols = {name: levels[:, i] for i, name in enumerate(layout.names)}
    fixed = scenario_definitions(policy.ss.scenario, policy.ss.calib)(cols)
    out = levels.copy()
    for name, col in fixed.items():
        out[:, layout.index(name)] = col
    return out


# ---------------------------------------------------------------------------
# Stochastic steady state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StochasticSteadyState:
    """Rest point of the pruned dynamics with zero realized shocks."""

    values: np.ndarray
    xs: np.ndarray
    iterations: int
    names: tuple[str, ...]

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def stochastic_steady_state(policy: PolicySolution, *, tol: float = SSS_TOL, max_iter: int = SSS_MAX_ITER) -> StochasticSteadyState:
    """Iterate the zero-shock pruned transition from the deterministic steady state.

    Raises
    ------
    DivergenceError
        If successive states still differ by more than ``tol`` after ``max_iter`` steps.
    """
    hx, _, _, hss, _, _ = _policy_arrays(policy)
    xs, iters = kernels.risky_fixed_point(hx, hss, np.zeros(policy.nx), float(tol), int(max_iter))
    if iters < 0:
        raise DivergenceError(f"stochastic steady state not reached in {max_iter} iterations")
    xs = np.asarray(xs)
    values = observe(policy, np.zeros((1, policy.nx)), xs[None, :])[0]
    return StochasticSteadyState(values, xs, int(iters), policy.ss.layout.names)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedPaths:
    """Post-burn-in paths in levels, one row per period."""

    values: np.ndarray
    names: tuple[str, ...]
    scenario_label: str
    seed: int | None
    horizon: int
    burn_in: int
    order: int
    pruned: bool = True
    identities_enforced: bool = True

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: self.values[:, i] for i, n in enumerate(self.names)}


def draw_shocks(seed: int | np.random.SeedSequence | None, periods: int, n_shocks: int = 1) -> np.ndarray:
    """Standard normal innovations from a seeded PCG64 stream."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((periods, n_shocks))


def ergodic_first_order_covariance(policy: PolicySolution) -> np.ndarray:
    """Unconditional covariance of the first-order state register."""
    return solve_discrete_lyapunov(policy.hx, policy.eta @ policy.eta.T)


def ergodic_second_order_mean(policy: PolicySolution) -> np.ndarray:
    """Unconditional mean of the second-order register ``xs``."""
    hx, _, hxx, hss, _, _ = _policy_arrays(policy)
    nx = policy.nx
    sigma = ergodic_first_order_covariance(policy)
    drift = 0.5 * hxx.reshape(nx, nx * nx) @ sigma.reshape(-1) + 0.5 * hss
    return np.linalg.solve(np.eye(nx) - hx, drift)


def _ergodic_start(policy: PolicySolution, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    sigma = ergodic_first_order_covariance(policy)
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    root = v * np.sqrt(np.clip(w, 0.0, None))
    xf0 = root @ rng.standard_normal(policy.nx)
    return xf0, ergodic_second_order_mean(policy)


def check_utility_domain(policy: PolicySolution, levels: np.ndarray, first_period: int = 0) -> None:
    names = policy.ss.layout.names
    chi_x = policy.ss.calib.chi * levels[:, names.index("X")]
    for var in ("CH", "CS"):
        surplus = levels[:, names.index(var)] - chi_x
        bad = np.flatnonzero(surplus <= 0.0)
        if bad.size:
            t = int(bad[0])
            raise PathError(first_period + t, var, float(surplus[t]))


def simulate_pruned(
    policy: PolicySolution,
    horizon: int = 100_000,
    burn_in: int = 1_000,
    seed: int | None = 0,
    *,
    shocks: np.ndarray | None = None,
    start: str = "ergodic",
    enforce_identities: bool = True,
) -> SimulatedPaths:
    """Simulate the pruned second-order (or first-order) solution.

    Parameters
    ----------
    horizon, burn_in
        Periods kept and periods discarded.
    seed
        Seed of the innovation stream; the same seed gives bit-identical paths.
    shocks
        Optional standard-normal innovations of shape ``(burn_in + horizon, n_shocks)``;
        overrides ``seed`` for the innovations.
    start
        ``"ergodic"`` draws the first-order register from its unconditional
        distribution and sets the second-order register to its unconditional
        mean; ``"stochastic"`` starts at the stochastic steady state;
        ``"deterministic"`` at the deterministic steady state.

    Raises
    ------
    PathError
        If surplus consumption turns non-positive for either agent.
    """
    supplied = shocks is not None
    xf, xs = _pruned_registers(policy, horizon, burn_in, seed, shocks, start)
    levels = observe(policy, xf, xs, enforce_identities=enforce_identities)
    check_utility_domain(policy, levels, first_period=burn_in + 1)
    return SimulatedPaths(
        levels, policy.ss.layout.names, policy.ss.scenario.label, None if supplied else seed,
        horizon, burn_in, policy.order, True, enforce_identities,
    )  # fmt: skip


def _pruned_registers(policy: PolicySolution, horizon: int, burn_in: int, seed, shocks, start: str):
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be non-negative, got {burn_in}")
    total = horizon + burn_in
    ne = policy.eta.shape[1]
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    start_seq, shock_seq = root.spawn(2)
    if shocks is None:
        shocks = draw_shocks(shock_seq, total, ne)
    shocks = np.ascontiguousarray(shocks, dtype=float)
    if shocks.shape != (total, ne):
        raise ValueError(f"shocks must have shape {(total, ne)}, got {shocks.shape}")
    xf0, xs0 = _initial_registers(policy, start, np.random.default_rng(start_seq))
    hx, eta, hxx, hss, _, _ = _policy_arrays(policy)
    xf, xs = kernels.pruned_states(hx, eta, hxx, hss, shocks, xf0, xs0)
    return np.asarray(xf)[burn_in + 1 :], np.asarray(xs)[burn_in + 1 :]


def _initial_registers(policy: PolicySolution, start: str, rng: np.random.Generator):
    nx = policy.nx
    if start == "ergodic":
        return _ergodic_start(policy, rng)
    if start == "stochastic":
        return np.zeros(nx), stochastic_steady_state(policy).xs
    if start == "deterministic":
        return np.zeros(nx), np.zeros(nx)
    raise ValueError(f"unknown start {start!r}; use 'ergodic', 'stochastic' or 'deterministic'")


def simulate_unpruned(
    policy: PolicySolution, horizon: int, burn_in: int = 0, seed: int | None = 0, *, shocks: np.ndarray | None = None
) -> SimulatedPaths:
    """Second-order simulation without pruning, from the deterministic steady state.

    Used for comparison only; the unpruned recursion can explode.
    """
    total = horizon + burn_in
    if shocks is None:
        shocks = draw_shocks(np.random.SeedSequence(seed).spawn(2)[1], total, policy.eta.shape[1])
    shocks = np.ascontiguousarray(shocks, dtype=float)
    hx, eta, hxx, hss, _, _ = _policy_arrays(policy)
    x = np.asarray(kernels.unpruned_states(hx, eta, hxx, hss, shocks, np.zeros(policy.nx)))[burn_in + 1 :]
    # the observation map of the unpruned scheme feeds the full state into gxx
    levels = observe(policy, x, np.zeros_like(x))
    return SimulatedPaths(levels, policy.ss.layout.names, policy.ss.scenario.label, seed, horizon, burn_in, policy.order, False)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


def _freeze(d: dict) -> MappingProxyType:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class SimulationReport:
    """Means (levels), log standard deviations (percent) and their Monte-Carlo errors.

    ``log_std`` entries are exactly ``0.0`` for variables that are constant
    along the path.  Variables that are not strictly positive but do move
    get ``nan`` and a message in ``flags``.
    """

    scenario_label: str
    means: MappingProxyType
    mean_se: MappingProxyType
    log_std: MappingProxyType
    log_std_se: MappingProxyType
    stochastic_ss: MappingProxyType
    seed: int | None
    horizon: int
    burn_in: int
    order: int
    flags: tuple[str, ...] = ()
    diagnostics: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @property
    def welfare(self) -> dict[str, float]:
        return {k: self.means[k] for k in ("Wel", "UH", "US")}


def batch_means_se(x: np.ndarray, n_batches: int = N_BATCHES) -> float:
    """Standard error of the sample mean of a serially correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    size = len(x) // n_batches
    if size < 1 or n_batches < 2:
        return float("nan")
    batch = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(batch.std(ddof=1) / np.sqrt(n_batches))


def _derived_columns(paths: SimulatedPaths, policy_calib) -> dict[str, np.ndarray]:
    f, _ = abatement_cost(np.clip(paths["mu"], 0.0, 1.0), policy_calib)
    return {"fY": f * paths["Y"], "tauE": paths["tau"] * paths["E"]}


def moments(
    paths: SimulatedPaths,
    calib,
    *,
    stochastic_ss: StochasticSteadyState | None = None,
    log_variables: tuple[str, ...] = LOG_STD_VARIABLES,
    n_batches: int = N_BATCHES,
) -> SimulationReport:
    """Summarize simulated paths.

    Parameters
    ----------
    paths
        Output of :func:`simulate_pruned`.
    calib
        Calibration the paths were generated with (needed for ``f(mu) Y``).
    """
    if len(paths.values) == 0:
        raise ValueError("empty paths")
    cols = paths.as_dict()
    cols.update(_derived_columns(paths, calib))
    means, mean_se = {}, {}
    for name, col in cols.items():
        means[name] = float(np.mean(col))
        mean_se[name] = batch_means_se(col, n_batches)
    log_std, log_std_se, flags = {}, {}, []
    for name in log_variables:
        col = cols[name]
        if np.all(col == col[0]):
            log_std[name] = 0.0
            log_std_se[name] = 0.0
            continue
        if np.any(col <= 0.0):
            n_bad = int(np.sum(col <= 0.0))
            flags.append(f"log({name}): {n_bad} non-positive values")
            log_std[name] = float("nan")
            log_std_se[name] = float("nan")
            continue
        lg = np.log(col)
        log_std[name] = 100.0 * float(np.std(lg))
        log_std_se[name] = 100.0 * _std_se(lg, n_batches)
    mu = cols["mu"]
    if np.any((mu < 0.0) | (mu > 1.0)):
        flags.append(f"mu outside [0, 1] in {int(np.sum((mu < 0.0) | (mu > 1.0)))} periods")
    sss = stochastic_ss.as_dict() if stochastic_ss is not None else {}
    return SimulationReport(
        paths.scenario_label, _freeze(means), _freeze(mean_se), _freeze(log_std), _freeze(log_std_se), _freeze(sss),
        paths.seed, paths.horizon, paths.burn_in, paths.order, tuple(flags),
    )  # fmt: skip


def _std_se(x: np.ndarray, n_batches: int) -> float:
    """Batch-means standard error of the sample standard deviation."""
    m = x.mean()
    dev2 = (x - m) ** 2
    var = dev2.mean()
    se_var = batch_means_se(dev2, n_batches)
    return float(se_var / (2.0 * np.sqrt(var))) if var > 0 else 0.0


# ---------------------------------------------------------------------------
# Impulse responses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrfSet:
    """Absolute deviations times 100, rows are horizons ``0..H``."""

    deviations: np.ndarray
    names: tuple[str, ...]
    scenario_label: str
    shock_sds: float
    mode: str = "sss"

    @property
    def horizon(self) -> int:
        return len(self.deviations) - 1

    def __getitem__(self, name: str) -> np.ndarray:
        return self.deviations[:, self.names.index(name)]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: self.deviations[:, i] for i, n in enumerate(self.names)}


def _pruned_paths_batch(policy: PolicySolution, xf0: np.ndarray, xs0: np.ndarray, shocks: np.ndarray):
    """Vectorized zero-or-given-shock pruned recursion for a batch of starts.

    ``xf0``/``xs0`` have shape ``(B, nx)``; ``shocks`` ``(H, B, ne)``.
    Returns registers of shape ``(H + 1, B, nx)``.
    """
    hx, eta, hxx, hss, _, _ = _policy_arrays(policy)
    nx = policy.nx
    hxx_flat = 0.5 * hxx.reshape(nx, nx * nx)
    steps = shocks.shape[0]
    xf = np.empty((steps + 1,) + xf0.shape)
    xs = np.empty_like(xf)
    xf[0], xs[0] = xf0, xs0
    for t in range(steps):
        f = xf[t]
        quad = (f[:, :, None] * f[:, None, :]).reshape(len(f), nx * nx)
        xf[t + 1] = f @ hx.T + shocks[t] @ eta.T
        xs[t + 1] = xs[t] @ hx.T + quad @ hxx_flat.T + 0.5 * hss
    return xf, xs


def irf(
    policy: PolicySolution,
    stoch_ss: StochasticSteadyState | None = None,
    shock_sds: float = 1.0,
    horizon: int = 40,
    *,
    girf: bool = False,
    n_draws: int = 500,
    seed: int | None = 0,
    shock_index: int = 0,
) -> IrfSet:
    """Responses to a one-time innovation of ``shock_sds`` standard deviations.

    The default difference-of-paths construction starts both paths at the
    stochastic steady state; the innovation moves the exogenous state in
    period 0, so the predetermined stocks respond from period 1 on.  With
    ``girf=True`` the response is averaged over ``n_draws`` histories sampled
    every 50 periods from a pruned simulation, with common future innovations.
    """
    nx = policy.nx
    ne = policy.eta.shape[1]
    impulse = np.zeros(ne)
    impulse[shock_index] = shock_sds
    kick = policy.eta @ impulse
    if not girf:
        if stoch_ss is None:
            stoch_ss = stochastic_steady_state(policy)
        xs0 = stoch_ss.xs[None, :]
        zero = np.zeros((horizon, 1, ne))
        base_f, base_s = _pruned_paths_batch(policy, np.zeros((1, nx)), xs0, zero)
        shock_f, shock_s = _pruned_paths_batch(policy, kick[None, :], xs0, zero)
        base = observe(policy, base_f[:, 0], base_s[:, 0])
        hit = observe(policy, shock_f[:, 0], shock_s[:, 0])
        dev = 100.0 * (hit - base)
        return IrfSet(dev, policy.ss.layout.names, policy.ss.scenario.label, float(shock_sds), "sss")

    spacing = 50
    hist_seq, future_seq = np.random.SeedSequence(seed).spawn(2)
    xf_h, xs_h = _pruned_registers(policy, spacing * n_draws, 1_000, hist_seq, None, "ergodic")
    xf0 = np.ascontiguousarray(xf_h[spacing - 1 :: spacing])
    xs0 = np.ascontiguousarray(xs_h[spacing - 1 :: spacing])
    future = np.random.default_rng(future_seq).standard_normal((horizon, n_draws, ne))
    # histories already contain their own period-0 innovation; the impulse adds on top
    base_f, base_s = _pruned_paths_batch(policy, xf0, xs0, future)
    shock_f, shock_s = _pruned_paths_batch(policy, xf0 + kick, xs0, future)
    dev = np.zeros((horizon + 1, len(policy.ss.values)))
    for t in range(horizon + 1):
        dev[t] = np.mean(observe(policy, shock_f[t], shock_s[t]) - observe(policy, base_f[t], base_s[t]), axis=0)
    return IrfSet(100.0 * dev, policy.ss.layout.names, policy.ss.scenario.label, float(shock_sds), "girf")
