from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from carbontax.harness import ExperimentConfig, run_experiment
from carbontax.model import Scenario, build_calibration
from carbontax.perturbation import solve
from carbontax.reference import SCENARIO_COLUMNS
from carbontax.simulate import stochastic_steady_state
from carbontax.steady_state import solve_steady_state

settings.register_profile("carbontax", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("carbontax")


@pytest.fixture(scope="session")
def calib():
    return build_calibration("baseline")


@pytest.fixture(scope="session")
def solved(calib):
    """``{label: (steady state, second-order policy, stochastic steady state)}`` at baseline."""
    out = {}
    for label in SCENARIO_COLUMNS:
        scen = Scenario.parse(label)
        ss = solve_steady_state(scen, calib)
        policy = solve(scen, calib, ss, order=2)
        out[label] = (ss, policy, stochastic_steady_state(policy))
    return out


@pytest.fixture(scope="session")
def bau(solved):
    return solved["bau"]


@pytest.fixture(scope="session")
def baseline_run():
    """Full default experiment (100,000 periods per scenario), kept in memory."""
    return run_experiment(ExperimentConfig(), write=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store the one-line verdict of an acceptance criterion and fail the test if it is red."""

    def record(number: int, title: str, failures: list[str]) -> None:
        verdict = "PASS" if not failures else "FAIL"
        detail = "" if not failures else ": " + "; ".join(failures)
        line = f"criterion {number} {verdict} {title}{detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert not failures, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
