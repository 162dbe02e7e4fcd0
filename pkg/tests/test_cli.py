from __future__ import annotations

import json

import pytest

from carbontax.cli import main

FAST = "[simulation]\nhorizon = 2000\nburn_in = 100\nseed = 3\n[irf]\nhorizon = 8\n"


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[experiment]\noutput = bundle\n" + FAST)
    return path


def test_run_then_compare(config, tmp_path, capsys):
    assert main(["run", str(config)]) == 0
    bundle = tmp_path / "bundle"
    assert (bundle / "means.csv").exists()
    capsys.readouterr()
    code = main(["compare", str(bundle), "--table", "means", "--json"])
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["table"] == "means" and summary["cells"] == 75
    assert code == (0 if summary["ok"] else 3)


def test_flags_override_config(config, tmp_path):
    out = tmp_path / "flagged"
    assert main(["run", str(config), "--seed", "9", "--horizon", "1500", "--burn-in", "50", "--order", "1", "--output", str(out)]) == 0
    manifest = (out / "manifest.txt").read_text()
    assert "seed = 9" in manifest and "horizon = 1500" in manifest and "order = 1" in manifest


def test_compare_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\noutput = b\nscenarios = bau\n" + FAST)
    assert main(["run", str(cfg)]) == 0
    assert main(["compare", str(tmp_path / "b"), "--table", "stds"]) == 3


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nscenarios = bau, planner\n")
    assert main(["run", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_solver_failure_exit_code(tmp_path):
    cfg = tmp_path / "chi0.ini"
    cfg.write_text("[experiment]\noutput = b\n[overrides]\nchi = 0\n" + FAST)
    assert main(["run", str(cfg)]) == 1


def test_compare_unknown_preset(config, tmp_path):
    main(["run", str(config)])
    assert main(["compare", str(tmp_path / "bundle"), "--preset", "nowhere"]) == 1


def test_irf_subcommand(config, tmp_path, capsys):
    out = tmp_path / "irfs"
    assert main(["irf", str(config), "--horizon", "5", "--shock-sds", "2", "--output", str(out)]) == 0
    rows = (out / "irf_unconstrained.csv").read_text().splitlines()
    assert "shock_sds=2.0" in rows[0] and len(rows) == 2 + 6
    assert main(["irf", str(config), "--horizon", "3", "--girf", "--output", str(tmp_path / "g")]) == 0
    assert "mode=girf" in (tmp_path / "g" / "irf_bau.csv").read_text().splitlines()[0]


def test_sensitivity_subcommand(tmp_path, capsys):
    code = main(["sensitivity", str(tmp_path / "sens"), "--horizon", "2000", "--burn-in", "100"])
    assert code in (0, 3)
    text = (tmp_path / "sens" / "qualitative.txt").read_text()
    assert text.count("\n") == 5
    for preset in ("baseline", "gamma_low", "gamma_high", "theta1_high", "sigma_low", "chi_high", "eps_high"):
        assert (tmp_path / "sens" / preset / "means.csv").exists()


def test_module_entry_point(config, tmp_path):
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "carbontax.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "sensitivity" in out.stdout
