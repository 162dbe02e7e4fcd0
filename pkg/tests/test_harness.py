from __future__ import annotations

import json
from types import MappingProxyType

import numpy as np
import pytest

from carbontax.harness import (
    ConfigError,
    ExperimentConfig,
    cell_tolerance,
    compare_to_reference,
    default_output_root,
    inequality_tax_effects,
    load_config,
    parse_config,
    qualitative_checks,
    read_table_csv,
    run_experiment,
)
from carbontax.reference import MEAN_ROW_LABELS, SCENARIO_COLUMNS, STD_ROW_LABELS

SHORT = ExperimentConfig(horizon=3000, burn_in=200, irf_horizon=12, seed=5)

CONFIG_TEXT = """
[experiment]
preset = gamma_low
scenarios = bau, constrained:gamma
output = out
compare = yes
order = 2

[overrides]
sigma_eta = 0.006

[simulation]
horizon = 2000
burn_in = 100
seed = 77

[irf]
horizon = 10
shock_sds = 2
girf = false
"""


class TestConfig:
    def test_parse_full_config(self, tmp_path):
        cfg = parse_config(CONFIG_TEXT, base_dir=tmp_path)
        assert cfg.preset == "gamma_low"
        assert [s.label for s in cfg.scenarios] == ["bau", "constrained:gamma"]
        assert cfg.output == tmp_path / "out"
        assert cfg.compare is True and cfg.order == 2
        assert dict(cfg.overrides) == {"sigma_eta": 0.006}
        assert (cfg.horizon, cfg.burn_in, cfg.seed) == (2000, 100, 77)
        assert (cfg.irf_horizon, cfg.shock_sds, cfg.girf) == (10, 2.0, False)
        c = cfg.calibration()
        assert c.gamma == 0.11 and c.sigma_eta == 0.006

    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.preset == "baseline"
        assert [s.label for s in cfg.scenarios] == list(SCENARIO_COLUMNS)
        assert (cfg.horizon, cfg.burn_in) == (100_000, 1_000)

    @pytest.mark.parametrize(
        "text",
        [
            "[experiment]\nscenarios = bau, planner\n",
            "[experiment]\npreset = nowhere\n",
            "[overrides]\nkappa = 1\n",
            "[overrides]\ngamma = 1.4\n",
            "[experiment]\nscenarios = \n",
            "[experiment]\norder = 3\n",
            "[simulation]\nhorizon = many\n",
            "[plotting]\ncolor = red\n",
            "[irf]\ngirf = perhaps\n",
            "[simulation]\nperiods = 3\n",
            "not an ini file",
        ],
    )
    def test_invalid_configs(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")

    def test_output_root_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("CARBONTAX_OUTPUT_ROOT", str(tmp_path))
        assert default_output_root() == tmp_path
        assert ExperimentConfig(preset="chi_high").output_dir == tmp_path / "chi_high"


class TestBundle:
    def test_bundle_files_and_layout(self, tmp_path):
        res = run_experiment(SHORT.with_changes(output=tmp_path / "b"))
        assert res.ok
        out = tmp_path / "b"
        names = {p.name for p in out.iterdir()}
        expected = {"means.csv", "means_se.csv", "stds.csv", "stds_se.csv", "steady_state.csv", "stochastic_ss.csv", "manifest.txt"}
        expected |= {f"irf_{c.replace(':', '_')}.csv" for c in SCENARIO_COLUMNS}
        assert expected <= names
        means = read_table_csv(out / "means.csv")
        assert list(means) == list(MEAN_ROW_LABELS.values())
        assert list(means["Y_t"]) == list(SCENARIO_COLUMNS)
        stds = read_table_csv(out / "stds.csv")
        assert list(stds) == list(STD_ROW_LABELS.values())
        for p in out.glob("*.csv"):
            assert p.read_text().startswith("# ") and "seed=5" in p.read_text().splitlines()[0]
        manifest = (out / "manifest.txt").read_text()
        assert "seed = 5" in manifest and "kernel_backend" in manifest
        assert "scenario.constrained:1.status = ok" in manifest
        assert "calibration.sigma = 4.199" in manifest

    def test_values_are_six_significant_digits(self, tmp_path):
        run_experiment(SHORT.with_changes(output=tmp_path))
        row = (tmp_path / "means.csv").read_text().splitlines()[2].split(",")
        assert row[0] == "Y_t"
        assert all(len(v.replace("-", "").replace(".", "").lstrip("0")) <= 6 for v in row[1:])

    def test_csvs_are_byte_identical_on_rerun(self, tmp_path):
        run_experiment(SHORT.with_changes(output=tmp_path / "a"))
        run_experiment(SHORT.with_changes(output=tmp_path / "b"))
        for p in (tmp_path / "a").glob("*.csv"):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name

    def test_cells_trace_to_report_fields(self):
        res = run_experiment(SHORT, write=False)
        r = res.by_label()["constrained:0"]
        cmp_ = compare_to_reference(res, "means")
        cell = next(c for c in cmp_.cells if c.variable == "tau" and c.scenario == "constrained:0")
        assert cell.simulated == r.report.means["tau"]
        assert cell.se == r.report.mean_se["tau"]

    def test_irf_csv(self, tmp_path):
        run_experiment(SHORT.with_changes(output=tmp_path))
        rows = (tmp_path / "irf_bau.csv").read_text().splitlines()
        assert rows[1].startswith("horizon,K,X,a,Y")
        assert len(rows) == 2 + 13
        assert rows[2].split(",")[1] == "0"

    def test_failed_scenario_is_isolated(self, tmp_path, monkeypatch):
        from carbontax import harness

        real = harness.solve

        def flaky(scenario, calib, ss, order=2):
            if scenario.label == "constrained:0":
                raise harness.PerturbationError("forced failure")
            return real(scenario, calib, ss, order)

        monkeypatch.setattr(harness, "solve", flaky)
        res = run_experiment(SHORT.with_changes(output=tmp_path))
        assert not res.ok
        bad = res.by_label()["constrained:0"]
        assert "forced failure" in bad.error
        assert sum(r.ok for r in res.results) == 4
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "scenario.constrained:0.status = failed" in manifest
        assert "constrained:0" not in read_table_csv(tmp_path / "means.csv")["Y_t"]

    def test_parallel_workers_match_serial(self):
        serial = run_experiment(SHORT, write=False)
        parallel = run_experiment(SHORT.with_changes(workers=2), write=False)
        for a, b in zip(serial.results, parallel.results):
            assert a.report.means == b.report.means


class TestComparison:
    def test_tolerance_schedule(self):
        assert cell_tolerance("means", "Y", 1.002, 3) == (pytest.approx(0.01002), "rel or rounding")
        assert cell_tolerance("means", "fY", 0.002, 3)[0] == pytest.approx(5e-4)
        assert cell_tolerance("means", "tau", 0.020, 3) == (0.002, "abs")
        assert cell_tolerance("means", "Wel", -108.65, 2)[0] == pytest.approx(5.4325)
        assert cell_tolerance("stds", "Y", 3.62, 2)[0] == pytest.approx(0.543)
        assert cell_tolerance("stds", "tau", 0.0, 2) == (0.0, "structural zero")

    def test_bundle_round_trip(self, tmp_path):
        res = run_experiment(SHORT.with_changes(output=tmp_path))
        from_disk = compare_to_reference(tmp_path, "means")
        in_memory = compare_to_reference(res, "means")
        assert from_disk.preset == "baseline"
        assert len(from_disk.cells) == len(in_memory.cells) == 75
        for a, b in zip(from_disk.cells, in_memory.cells):
            assert a.simulated == pytest.approx(b.simulated, rel=1e-5)

    def test_missing_cells_are_listed(self, tmp_path):
        cfg = SHORT.with_changes(output=tmp_path, scenarios=SHORT.scenarios[:2])
        run_experiment(cfg)
        cmp_ = compare_to_reference(tmp_path, "stds")
        assert not cmp_.ok
        assert "tau/constrained:0" in cmp_.missing and len(cmp_.missing) == 27
        summary = json.loads(json.dumps(cmp_.summary()))
        assert summary["missing"] == list(cmp_.missing)
        assert any(line.startswith("MISSING") for line in cmp_.lines())

    def test_zero_externality_fails(self):
        res = run_experiment(SHORT.with_changes(overrides=MappingProxyType({"chi": 0.0})), write=False)
        assert res.by_label()["bau"].ok
        assert "abatement_foc" in res.by_label()["unconstrained"].error
        cmp_ = compare_to_reference(res, "means")
        assert not cmp_.ok
        for row in ("tau", "mu", "E"):
            assert f"{row}/unconstrained" in cmp_.missing

    def test_tiny_externality_fails_on_policy_rows(self):
        res = run_experiment(SHORT.with_changes(overrides=MappingProxyType({"chi": 1e-7})), write=False)
        assert res.ok
        failed = {c.variable for c in compare_to_reference(res, "means").cells if not c.passed}
        assert {"tau", "mu", "E"} <= failed


class TestQualitative:
    def test_inequality_effects_baseline(self):
        res = run_experiment(SHORT, write=False)
        d_unc, d_one = inequality_tax_effects(res)
        assert d_unc > 0.0 and d_one > d_unc

    def test_checks_flag_reversed_ordering(self):
        base = run_experiment(SHORT, write=False)
        # handing the same result in for both gamma presets cannot be monotone
        checks = qualitative_checks({"baseline": base, "gamma_low": base, "gamma_high": base})
        assert len(checks) == 2 and not any(c.passed for c in checks)
