from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carbontax.model import DomainError, Scenario, build_calibration, effective_rra, residuals
from carbontax.steady_state import (
    SolverError,
    newton_polish,
    solve_ss_bau,
    solve_ss_constrained,
    solve_ss_unconstrained,
    solve_steady_state,
    ss_scc,
)

ALL_SCENARIOS = ("bau", "unconstrained", "constrained:0", "constrained:gamma", "constrained:1")

# Frozen from the certified solves at the baseline calibration
FROZEN = {
    "bau": dict(K=8.44364300334, C=0.788908924917, CS=0.826136156146, lamH=0.656766738233, VX=0.033579209286, Wel=-108.049004257),
    "unconstrained": dict(K=8.28682943179, Y=0.9932740131, mu=0.321042073329, E=0.675776270864, X=321.798224221, Wel=-69.8040607034),
    "constrained:0": dict(tau=0.0321522573327, lamH=0.586362265241, mu=0.41509476944, E=0.580781268579, CH=0.622179688735, CS=0.819378908813),
    "constrained:gamma": dict(tau=0.0202679161231, lamH=0.496217429535, VX=0.0303252093637, CH=0.641810630656, Wel=-77.6696754935),
    "constrained:1": dict(tau=0.00995902067489, lamH=0.349132322034, E=0.781877404074, CH=0.672736084044, Wel=-81.4500330444),
}


def closed_form_tax(c):
    return c.beta * c.chi / (1.0 - c.beta * c.eta_pollution)


class TestBau:
    def test_closed_form_chain(self, calib):
        ss = solve_ss_bau(calib)
        k = calib.alpha / (1.0 / calib.beta - 1.0 + calib.delta)
        assert ss["K"] == pytest.approx(k, abs=1e-9)
        assert ss["Y"] == pytest.approx(1.0, abs=1e-9)
        assert ss["I"] == pytest.approx(calib.delta * k, abs=1e-9)
        assert ss["C"] == pytest.approx(1.0 - calib.delta * k, abs=1e-9)
        assert ss["CH"] == pytest.approx(1.0 - calib.alpha, abs=1e-9)
        assert ss["CS"] == pytest.approx((ss["C"] - calib.gamma * ss["CH"]) / (1 - calib.gamma), abs=1e-9)
        assert ss["E"] == pytest.approx(1.0, abs=1e-9)
        assert ss["X"] == pytest.approx(1.0 / (1.0 - calib.eta_pollution), abs=1e-9)
        assert ss["mu"] == 0.0 and ss["tau"] == 0.0
        assert ss["Q"] == pytest.approx(1.0, abs=1e-12)

    def test_printed_values(self, calib):
        ss = solve_ss_bau(calib)
        # the printed capital stock 8.4435 sits 1.4e-4 below the closed form 8.44364
        for name, printed, tol in [("K", 8.4435, 2e-4), ("I", 0.2111, 1e-4), ("C", 0.7889, 1e-4), ("CH", 0.64, 1e-4), ("CS", 0.8261, 1e-4), ("X", 476.19, 1e-2)]:
            assert abs(ss[name] - printed) <= tol, name

    def test_effective_risk_aversion(self, calib):
        ss = solve_ss_bau(calib)
        assert effective_rra(ss["CS"], ss["X"], calib) == pytest.approx(5.46, abs=0.005)
        assert effective_rra(ss["CH"], ss["X"], calib) == pytest.approx(5.98, abs=0.005)
        assert effective_rra(0.7, 0.0, calib) == calib.sigma
        with pytest.raises(DomainError):
            effective_rra(0.1, 476.0, calib)

    def test_zero_externality_leaves_consumption(self, calib):
        ss0 = solve_ss_bau(build_calibration("baseline", {"chi": 0.0}))
        ss = solve_ss_bau(calib)
        assert ss0["CH"] == pytest.approx(ss["CH"], abs=1e-12)
        assert ss0["CS"] == pytest.approx(ss["CS"], abs=1e-12)

    def test_newton_from_perturbed_guess_matches_closed_form(self, calib, rng):
        ss = solve_ss_bau(calib)
        guess = ss.values * (1.0 + 1e-3 * rng.standard_normal(ss.values.size))
        guess[ss.layout.index("mu")] = 0.0
        z, _, norm = newton_polish(ss.scenario, calib, guess)
        assert norm <= 1e-12
        assert np.max(np.abs(z - ss.values)) <= 1e-9


class TestPlanners:
    def test_unconstrained_tax_closed_form(self, calib):
        ss = solve_ss_unconstrained(calib)
        assert ss["tau"] == pytest.approx(closed_form_tax(calib), abs=1e-12)
        assert abs(ss["tau"] - 0.020268) <= 5e-7
        assert ss["CH"] == ss["CS"] == ss["C"]
        assert ss["mu"] == pytest.approx(0.322, abs=0.001)
        assert ss["E"] == pytest.approx(0.676, abs=0.001)
        assert ss["X"] == pytest.approx(321.5, abs=0.5)

    def test_zero_externality_collapses_to_bau(self):
        c = build_calibration("baseline", {"chi": 0.0})
        ss, bau = solve_ss_unconstrained(c), solve_ss_bau(c)
        assert ss["tau"] == 0.0 and ss["mu"] == 0.0
        for name in ("K", "Y", "C", "I", "E", "X"):
            assert ss[name] == pytest.approx(bau[name], abs=1e-10)

    def test_uniform_redistribution_matches_unconstrained_tax(self, calib):
        ss = solve_ss_constrained(calib, "gamma")
        assert abs(ss["tau"] - solve_ss_unconstrained(calib)["tau"]) <= 1e-10
        assert ss["lamH"] > 0.0

    @pytest.mark.parametrize(
        "xi, tau, mu, e, ch, cs",
        [(0.0, 0.032, 0.417, 0.580, 0.623, 0.820), (1.0, 0.010, None, 0.780, 0.675, None)],
    )
    def test_constrained_printed_values(self, calib, xi, tau, mu, e, ch, cs):
        ss = solve_ss_constrained(calib, xi)
        assert ss["tau"] == pytest.approx(tau, abs=5e-4)
        assert ss["E"] == pytest.approx(e, abs=2e-3)
        assert ss["CH"] == pytest.approx(ch, abs=3e-3)
        if mu is not None:
            assert ss["mu"] == pytest.approx(mu, abs=3e-3)
        if cs is not None:
            assert ss["CS"] == pytest.approx(cs, abs=1e-3)

    def test_orderings_in_xi(self, calib):
        sol = {xi: solve_ss_constrained(calib, xi) for xi in (0.0, "gamma", 1.0)}
        assert sol[0.0]["tau"] > sol["gamma"]["tau"] > sol[1.0]["tau"]
        assert sol[0.0]["E"] < sol["gamma"]["E"] < sol[1.0]["E"]
        assert all(s["lamH"] > 0 for s in sol.values())

    def test_scc_closed_form(self, calib):
        assert ss_scc(0.0, calib) == pytest.approx(0.020268, abs=5e-7)
        assert ss_scc(0.0, build_calibration("baseline", {"chi": 0.0})) == 0.0
        ss = solve_ss_constrained(calib, 0.0)
        assert ss_scc(ss["lamH"], calib) == pytest.approx(ss["VX"], rel=1e-10)
        assert ss["VX"] == pytest.approx(0.032, abs=5e-4)
        with pytest.raises(DomainError):
            ss_scc(-0.1, calib)

    def test_warm_start_gives_same_point(self, calib):
        cold = solve_ss_constrained(calib, 1.0)
        warm = solve_ss_constrained(calib, 1.0, warm_start=solve_ss_constrained(calib, "gamma"))
        assert np.max(np.abs(cold.values - warm.values)) <= 1e-10

    def test_bad_scenario(self):
        c = build_calibration("baseline", {"gamma": 0.0})
        with pytest.raises((DomainError, SolverError)):
            solve_ss_constrained(c, 0.5)


@pytest.mark.parametrize("label", ALL_SCENARIOS)
def test_certification_and_frozen_values(calib, label):
    ss = solve_steady_state(Scenario.parse(label), calib)
    assert ss.residual_norm <= 1e-10
    assert np.max(np.abs(residuals(ss.scenario, calib, ss.values, ss.values, 0.0))) <= 1e-10
    assert 0.0 <= ss["mu"] <= 1.0
    assert ss["CH"] > calib.chi * ss["X"] and ss["CS"] > calib.chi * ss["X"]
    assert ss["X"] == pytest.approx(ss["E"] / (1.0 - calib.eta_pollution), rel=1e-12)
    for name, value in FROZEN[label].items():
        assert ss[name] == pytest.approx(value, rel=1e-9), name


@pytest.mark.parametrize("preset", ["gamma_low", "gamma_high", "theta1_high", "sigma_low", "chi_high", "eps_high"])
def test_every_preset_solves(preset):
    c = build_calibration(preset)
    prev = None
    for label in ALL_SCENARIOS:
        ss = solve_steady_state(Scenario.parse(label), c, warm_start=prev)
        assert ss.residual_norm <= 1e-10
        prev = ss if ss.scenario.regime != "bau" else prev


@given(st.floats(0.05, 0.5), st.floats(1e-4, 1.2e-3))
def test_uniform_identity_holds_across_parameters(gamma, chi):
    c = build_calibration("baseline", {"gamma": gamma, "chi": chi})
    ss = solve_ss_constrained(c, "gamma")
    assert abs(ss["tau"] - closed_form_tax(c)) <= 1e-10
