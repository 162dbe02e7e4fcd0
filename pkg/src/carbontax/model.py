"""Two-agent RBC economy with a greenhouse-gas externality in utility.

Hand-to-mouth (HtM) households consume wages plus transfers; savers own
the firms.  Utility is ``(C - chi X)**(1 - sigma) / (1 - sigma)`` so the
externality bites harder on low consumers.  Three regimes share one
variable layout:

* ``bau``            decentralized economy, no carbon tax, no abatement;
* ``unconstrained``  utilitarian planner with free lump-sum redistribution;
* ``constrained``    planner that may only rebate tax revenue, a share
                     ``xi`` of it to HtM households.

The residual system is written as ``F(z_next, z_curr, u_next)`` with the
TFP innovation entering only the law of motion of log TFP.  Expectation
operators belong to the solvers; here ``z_next`` is a realization.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .hyperdual import HyperDual, exp, value


class CalibrationError(ValueError):
    """Invalid calibration: unknown name, bad value or invariant violation."""


class DomainError(ValueError):
    """Argument outside the domain of a model primitive."""


class UtilityDomainError(DomainError):
    """Surplus consumption ``C - chi X`` is not positive."""


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

_BASELINE = dict(
    gamma=0.20,
    beta=0.98267,
    sigma=4.199,
    chi=4e-4,
    alpha=0.36,
    delta=0.025,
    eps_adj=0.0,
    rho_A=0.95,
    sigma_eta=0.007,
    eta_pollution=0.9979,
    theta1=0.05607,
    theta2=2.8,
    phi1=1.0,
    phi2=0.304,
    xi=0.0,
    N=1.0,
)

PRESETS: dict[str, dict[str, float]] = {
    "baseline": {},
    "gamma_low": {"gamma": 0.11},
    "gamma_high": {"gamma": 0.33},
    "theta1_high": {"theta1": 0.05607 * 3.5},
    "sigma_low": {"sigma": 2.0},
    "chi_high": {"chi": 8.7360e-4},
    "eps_high": {"eps_adj": 1.5},
}

SENSITIVITY_PRESETS = ("gamma_low", "gamma_high", "theta1_high", "sigma_low", "chi_high", "eps_high")


@dataclass(frozen=True)
class Calibration:
    """Structural parameters plus the derived constants ``A``, ``b1``, ``b2``.

    Build through :func:`build_calibration`, which computes the derived
    constants and validates the invariants.
    """

    gamma: float
    beta: float
    sigma: float
    chi: float
    alpha: float
    delta: float
    eps_adj: float
    rho_A: float
    sigma_eta: float
    eta_pollution: float
    theta1: float
    theta2: float
    phi1: float
    phi2: float
    xi: float = 0.0
    N: float = 1.0
    A: float = field(default=float("nan"))
    b1: float = field(default=float("nan"))
    b2: float = field(default=float("nan"))
    preset: str = "custom"

    def replace(self, **changes) -> Calibration:
        """Copy with changed structural parameters; derived constants are recomputed."""
        return build_calibration(self.preset, {**self.structural(), **changes})

    def structural(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in _BASELINE}

    @property
    def K_bau(self) -> float:
        return self.alpha / (1.0 / self.beta - 1.0 + self.delta)


STRUCTURAL_NAMES = tuple(_BASELINE)


def _validate(p: dict[str, float]) -> None:
    checks = [
        ("gamma", 0.0 <= p["gamma"] < 1.0, "0 <= gamma < 1"),
        ("beta", 0.0 < p["beta"] < 1.0, "0 < beta < 1"),
        ("eta_pollution", 0.0 < p["eta_pollution"] < 1.0, "0 < eta_pollution < 1"),
        ("theta2", p["theta2"] > 1.0, "theta2 > 1"),
        ("xi", 0.0 <= p["xi"] <= 1.0, "0 <= xi <= 1"),
        ("delta", 0.0 < p["delta"] < 1.0, "0 < delta < 1"),
        ("alpha", 0.0 < p["alpha"] < 1.0, "0 < alpha < 1"),
        ("sigma", p["sigma"] > 0.0 and p["sigma"] != 1.0, "sigma > 0, sigma != 1"),
        ("chi", p["chi"] >= 0.0, "chi >= 0"),
        ("theta1", p["theta1"] > 0.0, "theta1 > 0"),
        ("phi1", p["phi1"] > 0.0, "phi1 > 0"),
        ("sigma_eta", p["sigma_eta"] >= 0.0, "sigma_eta >= 0"),
        ("rho_A", abs(p["rho_A"]) < 1.0, "|rho_A| < 1"),
        ("N", p["N"] > 0.0, "N > 0"),
        ("eps_adj", p["eps_adj"] != 1.0, "eps_adj != 1 (unsupported curvature)"),
    ]
    for name, ok, rule in checks:
        if not ok or not math.isfinite(p[name]):
            raise CalibrationError(f"invalid {name}={p[name]!r}: requires {rule}")


def build_calibration(preset: str = "baseline", overrides: dict[str, float] | None = None) -> Calibration:
    """Calibration for a named preset with optional parameter overrides.

    Derived constants are recomputed after the overrides, with ``A``
    anchored so that output equals one in the BAU deterministic steady
    state of the same parameter set.
    """
    if preset not in PRESETS and preset != "custom":
        raise CalibrationError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    params = dict(_BASELINE)
    params.update(PRESETS.get(preset, {}))
    for name, val in (overrides or {}).items():
        if name not in _BASELINE:
            raise CalibrationError(f"unknown parameter {name!r}")
        params[name] = float(val)
    _validate(params)

    eps = params["eps_adj"]
    delta = params["delta"]
    b1 = delta**eps
    b2 = -delta * eps / (1.0 - eps)
    k_bau = params["alpha"] / (1.0 / params["beta"] - 1.0 + delta)
    A = 1.0 / (params["N"] ** (1.0 - params["alpha"]) * k_bau ** params["alpha"])
    return Calibration(**params, A=A, b1=b1, b2=b2, preset=preset)


# ---------------------------------------------------------------------------
# Scenarios and layout
# ---------------------------------------------------------------------------

REGIMES = ("bau", "unconstrained", "constrained")


@dataclass(frozen=True)
class Scenario:
    """Policy regime tag.

    ``xi`` is the HtM share of tax revenue under the constrained planner;
    the string ``"gamma"`` stands for uniform redistribution ``xi = gamma``.
    """

    regime: str
    xi: float | str | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise CalibrationError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.regime == "constrained":
            if self.xi is None:
                raise CalibrationError("constrained regime needs xi")
            if self.xi != "gamma" and not (0.0 <= float(self.xi) <= 1.0):
                raise CalibrationError(f"invalid xi={self.xi!r}: requires 0 <= xi <= 1")

    @classmethod
    def bau(cls) -> Scenario:
        return cls("bau")

    @classmethod
    def unconstrained(cls) -> Scenario:
        return cls("unconstrained")

    @classmethod
    def constrained(cls, xi: float | str) -> Scenario:
        return cls("constrained", xi)

    @classmethod
    def parse(cls, text: str) -> Scenario:
        """Parse ``bau``, ``unconstrained`` or ``constrained:<xi>`` (``xi`` may be ``gamma``)."""
        text = text.strip().lower()
        if text in ("bau", "unconstrained"):
            return cls(text)
        if text.startswith("constrained"):
            _, _, arg = text.partition(":")
            arg = arg.strip()
            if not arg:
                raise CalibrationError(f"scenario {text!r} lacks a xi value")
            if arg == "gamma":
                return cls("constrained", "gamma")
            try:
                return cls("constrained", float(arg))
            except ValueError:
                raise CalibrationError(f"bad xi in scenario {text!r}") from None
        raise CalibrationError(f"unknown scenario {text!r}")

    def xi_value(self, calib: Calibration) -> float:
        if self.regime != "constrained":
            return 0.0
        return calib.gamma if self.xi == "gamma" else float(self.xi)

    @property
    def label(self) -> str:
        if self.regime == "constrained":
            return "constrained:gamma" if self.xi == "gamma" else f"constrained:{float(self.xi):g}"
        return self.regime


STATES = ("K", "X", "a")
CONTROLS = (
    "Y", "C", "CH", "CS", "I", "W", "D", "E", "mu", "tau",
    "lamS", "lamH", "VE", "VX", "Q", "varrho", "T", "TH", "TS",
    "UH", "US", "Wel", "Pb", "Ps",
)  # fmt: skip

EQUATIONS_COMMON = (
    "production", "emissions", "ghg_motion", "capital_motion", "tfp_motion",
    "resource", "aggregate_consumption", "marginal_cost", "wage", "investment_foc",
    "capital_euler", "dividends", "government_budget", "value_htm", "value_saver",
    "welfare", "bond_price", "stock_price",
)  # fmt: skip

_REGIME_EQUATIONS = {
    "bau": ("no_abatement", "no_tax", "emission_price", "saver_mu", "mu_gap",
            "scc", "htm_budget", "htm_transfer", "saver_transfer"),
    "unconstrained": ("abatement_foc", "tax_rule", "emission_price", "saver_mu", "mu_gap",
                      "scc", "equal_consumption", "htm_transfer", "saver_transfer"),
    "constrained": ("abatement_foc", "tax_rule", "emission_price", "saver_mu", "mu_gap",
                    "scc", "htm_budget", "htm_transfer", "saver_transfer"),
}  # fmt: skip


@dataclass(frozen=True)
class VariableLayout:
    """Ordered variable and equation names; states come first."""

    names: tuple[str, ...]
    states: tuple[str, ...]
    equations: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def unpack(self, z) -> SimpleNamespace:
        return SimpleNamespace(**{name: z[i] for i, name in enumerate(self.names)})

    def pack(self, **values) -> np.ndarray:
        return np.array([values[name] for name in self.names], dtype=float)


def variable_layout(scenario: Scenario) -> VariableLayout:
    eqs = EQUATIONS_COMMON + _REGIME_EQUATIONS[scenario.regime]
    layout = VariableLayout(STATES + CONTROLS, STATES, eqs)
    assert layout.n == len(eqs)
    return layout


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def adjustment_cost(i_over_k, calib: Calibration):
    """Capital adjustment function ``Phi(I/K)`` and its derivative.

    Returns ``(Phi, Phi')``; for ``eps_adj = 0`` this is exactly ``(I/K, 1)``.
    """
    if value(i_over_k) <= 0:
        raise DomainError(f"investment ratio must be positive, got {value(i_over_k)!r}")
    eps = calib.eps_adj
    if eps == 1.0:
        raise DomainError("eps_adj = 1 makes the adjustment cost degenerate")
    if eps == 0.0:
        return i_over_k, 1.0
    phi = calib.b1 / (1.0 - eps) * i_over_k ** (1.0 - eps) + calib.b2
    dphi = calib.b1 * i_over_k ** (-eps)
    return phi, dphi


def abatement_cost(mu, calib: Calibration):
    """Abatement cost share ``f(mu) = theta1 mu**theta2`` and ``f'(mu)``."""
    m = value(mu)
    if np.any(np.asarray(m) < 0.0) or np.any(np.asarray(m) > 1.0):
        raise DomainError(f"abatement share must lie in [0, 1], got {m!r}")
    th1, th2 = calib.theta1, calib.theta2
    return th1 * mu**th2, th1 * th2 * mu ** (th2 - 1.0)


def marginal_utility(c, x, calib: Calibration):
    surplus = c - calib.chi * x
    if np.any(np.asarray(value(surplus)) <= 0.0):
        raise UtilityDomainError("surplus consumption C - chi X must be positive")
    return surplus ** (-calib.sigma)


def period_utility(c, x, calib: Calibration):
    surplus = c - calib.chi * x
    if np.any(np.asarray(value(surplus)) <= 0.0):
        raise UtilityDomainError("surplus consumption C - chi X must be positive")
    return surplus ** (1.0 - calib.sigma) / (1.0 - calib.sigma)


def marginal_disutility_ghg(c, x, calib: Calibration):
    """``u_X = -chi (C - chi X)**(-sigma)``."""
    return -calib.chi * marginal_utility(c, x, calib)


def marginal_utility_gap(ch, cs, x, calib: Calibration):
    """Population-weighted relative gap between HtM and saver marginal utility."""
    lam_s = marginal_utility(cs, x, calib)
    return calib.gamma * (marginal_utility(ch, x, calib) - lam_s) / lam_s


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def _abatement(mu, calib: Calibration, regime: str):
    if regime == "bau":
        # mu is pinned at zero by its own row; keep the cost terms smooth
        return 0.0 * mu, 0.0 * mu
    m = np.asarray(value(mu))
    if np.any(m < 0.0) or np.any(m > 1.0):
        raise DomainError(f"abatement share must lie in [0, 1], got {value(mu)!r}")
    return calib.theta1 * mu**calib.theta2, calib.theta1 * calib.theta2 * mu ** (calib.theta2 - 1.0)


def _adjustment(i, k, calib: Calibration):
    ratio = i / k
    if np.any(np.asarray(value(ratio)) <= 0.0):
        raise DomainError("investment ratio must be positive")
    eps = calib.eps_adj
    if eps == 0.0:
        return ratio, 1.0 + 0.0 * ratio, ratio
    phi = calib.b1 / (1.0 - eps) * ratio ** (1.0 - eps) + calib.b2
    dphi = calib.b1 * ratio ** (-eps)
    return phi, dphi, ratio


def residuals(scenario: Scenario, calib: Calibration, z_next, z_curr, shock=0.0):
    """Equilibrium residuals ``F(z_next, z_curr, u_next)``.

    Inputs may be floats, arrays (evaluated elementwise, e.g. along a
    path) or hyper-dual numbers.  Returns a list for non-float input and
    a float array otherwise.
    """
    layout = variable_layout(scenario)
    out = _residual_list(scenario.regime, scenario.xi_value(calib), calib, layout.unpack(z_next), layout.unpack(z_curr), shock)
    if all(isinstance(r, (float, int, np.floating)) for r in out):
        return np.array(out, dtype=float)
    if not any(isinstance(r, HyperDual) for r in out):
        return [np.asarray(r, dtype=float) for r in out]
    return out


def _residual_list(regime: str, xi: float, p: Calibration, n, c, u) -> list:
    g = p.gamma
    beta = p.beta

    f_c, fprime_c = _abatement(c.mu, p, regime)
    f_n, _ = _abatement(n.mu, p, regime)
    phi_c, dphi_c, ratio_c = _adjustment(c.I, c.K, p)
    phi_n, dphi_n, ratio_n = _adjustment(n.I, n.K, p)

    mu_s_c = marginal_utility(c.CS, c.X, p)
    mu_h_c = marginal_utility(c.CH, c.X, p)
    sdf = beta * n.lamS / c.lamS

    res = [
        # production
        c.Y - exp(c.a) * p.A * c.K**p.alpha * p.N ** (1.0 - p.alpha),
        # emissions
        c.E - (1.0 - c.mu) * p.phi1 * c.Y ** (1.0 - p.phi2),
        # GHG stock
        n.X - p.eta_pollution * c.X - c.E,
        # capital stock
        n.K - (1.0 - p.delta) * c.K - phi_c * c.K,
        # log TFP
        n.a - p.rho_A * c.a - u,
        # goods market
        c.Y - c.C - c.I - f_c * c.Y,
        # aggregate consumption
        c.C - g * c.CH - (1.0 - g) * c.CS,
        # real marginal cost
        c.varrho - (1.0 - f_c - c.VE * (1.0 - p.phi2) * c.E / c.Y),
        # competitive wage
        c.W - (1.0 - p.alpha) * c.varrho * c.Y / p.N,
        # investment FOC
        c.Q * p.b1 * ratio_c ** (-p.eps_adj) - 1.0 if p.eps_adj != 0.0 else c.Q - 1.0,
        # capital Euler under the regime SDF
        c.Q - sdf * (n.varrho * p.alpha * n.Y / n.K + n.Q * (1.0 - p.delta + phi_n - dphi_n * ratio_n)),
        # dividends
        c.D - (c.Y - c.W * p.N - c.I - f_c * c.Y - c.tau * c.E),
        # government budget
        c.T - c.tau * c.E,
        # lifetime utilities
        c.UH - period_utility(c.CH, c.X, p) - beta * n.UH,
        c.US - period_utility(c.CS, c.X, p) - beta * n.US,
        c.Wel - g * c.UH - (1.0 - g) * c.US,
        # asset prices (saver SDF)
        c.Pb - sdf,
        c.Ps - sdf * (n.D + n.Ps),
    ]

    if regime == "bau":
        res += [
            c.mu,
            c.tau,
            c.VE - c.tau,
        ]
    else:
        res.append(c.VE * c.E / (1.0 - c.mu) - fprime_c * c.Y)
        if regime == "unconstrained":
            res.append(c.tau - c.VX)
        else:
            res.append(c.tau * (1.0 + (xi / g) * c.lamH) - c.VX)
        res.append(c.VE - c.tau)

    res += [
        c.lamS - mu_s_c,
        c.lamH - g * (mu_h_c - c.lamS) / c.lamS,
    ]
    if regime == "unconstrained":
        res.append(c.VX - sdf * (p.eta_pollution * n.VX + p.chi))
        res += [
            c.CH - c.CS,
            c.TH - (c.tau * c.E + c.D),
        ]
    else:
        res.append(c.VX - sdf * (p.eta_pollution * n.VX + p.chi * (1.0 + n.lamH)))
        res.append(c.CH - c.W * p.N - c.TH)
        res.append(c.TH - ((xi / g) * c.tau * c.E if (regime == "constrained") else 0.0 * c.tau))
    res.append((1.0 - g) * c.TS - (c.T - g * c.TH))
    return res


def scenario_definitions(scenario: Scenario, calib: Calibration):
    """Static identities the observation map enforces exactly.

    Returns a function mapping a dict of (approximated) current values to
    exact values for the tax and transfer slots and for the variables the
    regime pins down (zero abatement in BAU, equal consumption and a zero
    marginal-utility gap in the unconstrained regime).
    """
    regime = scenario.regime
    xi = scenario.xi_value(calib)
    g = calib.gamma

    def apply(v: dict) -> dict:
        out = dict(v)
        if regime == "bau":
            tau = np.zeros_like(np.asarray(v["tau"], dtype=float))
            out["mu"] = np.zeros_like(tau)
            out["VE"] = tau
        elif regime == "unconstrained":
            tau = v["VX"]
            out["CH"] = v["CS"]
            out["lamH"] = np.zeros_like(np.asarray(v["lamH"], dtype=float))
        else:
            tau = v["VX"] / (1.0 + (xi / g) * v["lamH"])
        out["tau"] = tau
        out["T"] = tau * v["E"]
        if regime == "unconstrained":
            out["TH"] = out["T"] + v["D"]
        elif regime == "constrained":
            out["TH"] = (xi / g) * out["T"]
        else:
            out["TH"] = np.zeros_like(out["T"])
        out["TS"] = (out["T"] - g * out["TH"]) / (1.0 - g)
        return out

    return apply


def saver_budget_residual(v, calib: Calibration):
    """Omitted saver budget (Walras): ``C^S - W N - D/(1-gamma) - T^S`` with constant share holdings."""
    g = calib.gamma
    return v["CS"] - v["W"] * calib.N - v["D"] / (1.0 - g) - v["TS"]


def effective_rra(c: float, x: float, calib: Calibration) -> float:
    """Effective relative risk aversion ``sigma / (1 - chi x / c)``."""
    if c - calib.chi * x <= 0.0:
        raise DomainError(f"c={c!r} must exceed chi*x={calib.chi * x!r}")
    return calib.sigma / (1.0 - calib.chi * x / c)


def calibration_table(calib: Calibration) -> dict[str, float]:
    return {f.name: getattr(calib, f.name) for f in dataclasses.fields(calib) if f.name != "preset"}
