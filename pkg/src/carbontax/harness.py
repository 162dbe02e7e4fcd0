"""Experiment configuration, report bundles on disk, and reference comparisons.

A config file is flat INI text::

    [experiment]
    preset = baseline
    scenarios = bau, unconstrained, constrained:0, constrained:gamma, constrained:1
    output = runs/baseline
    compare = true
    order = 2

    [overrides]
    chi = 4e-4

    [simulation]
    horizon = 100000
    burn_in = 1000
    seed = 20240

    [irf]
    horizon = 40
    shock_sds = 1.0
    girf = false

A report bundle is a directory holding ``means.csv``, ``means_se.csv``,
``stds.csv``, ``stds_se.csv``, ``stochastic_ss.csv``, ``steady_state.csv``,
one ``irf_<scenario>.csv`` per scenario and ``manifest.txt``.
"""

from __future__ import annotations

import configparser
import copyreg
import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType

import numpy as np

from . import kernels
from .model import SENSITIVITY_PRESETS, Calibration, CalibrationError, DomainError, Scenario, build_calibration
from .perturbation import PerturbationError, PolicySolution, solve
from .reference import (
    MEAN_ROW_LABELS,
    PRICE_ROWS,
    QUANTITY_ROWS,
    SCENARIO_COLUMNS,
    STD_ROW_LABELS,
    WELFARE_ROWS,
    reference_table,
)
from .simulate import (
    IrfSet,
    SimulationError,
    SimulationReport,
    StochasticSteadyState,
    irf,
    moments,
    simulate_pruned,
    stochastic_steady_state,
)
from .steady_state import SolverError, SteadyState, solve_steady_state

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "CARBONTAX_OUTPUT_ROOT"
DEFAULT_SCENARIOS = SCENARIO_COLUMNS

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_COMPARE = 3


class ConfigError(ValueError):
    pass


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "carbontax-output"))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "baseline"
    overrides: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    scenarios: tuple[Scenario, ...] = tuple(Scenario.parse(s) for s in DEFAULT_SCENARIOS)
    horizon: int = 100_000
    burn_in: int = 1_000
    seed: int = 20240
    irf_horizon: int = 40
    shock_sds: float = 1.0
    girf: bool = False
    order: int = 2
    output: Path | None = None
    compare: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("scenario list is empty")
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if self.horizon < 1 or self.burn_in < 0 or self.irf_horizon < 0:
            raise ConfigError("horizon must be positive and burn_in, irf horizon non-negative")

    def calibration(self) -> Calibration:
        try:
            return build_calibration(self.preset, dict(self.overrides))
        except CalibrationError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def output_dir(self) -> Path:
        return Path(self.output) if self.output is not None else default_output_root() / self.preset

    def with_changes(self, **changes) -> ExperimentConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse and validate config text; every error is a :class:`ConfigError`."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    known = {"experiment", "overrides", "simulation", "irf"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    sim = cp["simulation"] if cp.has_section("simulation") else {}
    irf_s = cp["irf"] if cp.has_section("irf") else {}
    allowed = {
        "experiment": {"preset", "scenarios", "output", "compare", "order", "workers"},
        "simulation": {"horizon", "burn_in", "seed"},
        "irf": {"horizon", "shock_sds", "girf"},
    }
    for sec, keys in allowed.items():
        if cp.has_section(sec):
            extra = set(cp[sec]) - keys
            if extra:
                raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    try:
        overrides = {k: float(v) for k, v in cp["overrides"].items()} if cp.has_section("overrides") else {}
        scen_text = exp.get("scenarios", ", ".join(DEFAULT_SCENARIOS))
        scenarios = tuple(Scenario.parse(s) for s in scen_text.split(",") if s.strip())
        output = exp.get("output")
        if output is not None and base_dir is not None and not Path(output).is_absolute():
            output = base_dir / output
        cfg = ExperimentConfig(
            preset=exp.get("preset", "baseline").strip(),
            overrides=MappingProxyType(overrides),
            scenarios=scenarios,
            horizon=int(sim.get("horizon", 100_000)),
            burn_in=int(sim.get("burn_in", 1_000)),
            seed=int(sim.get("seed", 20240)),
            irf_horizon=int(irf_s.get("horizon", 40)),
            shock_sds=float(irf_s.get("shock_sds", 1.0)),
            girf=_parse_bool(irf_s.get("girf", "false"), "girf"),
            order=int(exp.get("order", 2)),
            output=Path(output) if output is not None else None,
            compare=_parse_bool(exp.get("compare", "false"), "compare"),
            workers=int(exp.get("workers", 1)),
        )
    except (CalibrationError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    cfg.calibration()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    ss: SteadyState | None = None
    policy: PolicySolution | None = None
    stochastic_ss: StochasticSteadyState | None = None
    report: SimulationReport | None = None
    irf: IrfSet | None = None
    error: str | None = None
    timings: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    calib: Calibration
    results: tuple[ScenarioResult, ...]
    output_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def by_label(self) -> dict[str, ScenarioResult]:
        return {r.scenario.label: r for r in self.results}

    def reports(self) -> dict[str, SimulationReport]:
        return {r.scenario.label: r.report for r in self.results if r.ok}


def run_scenario(config: ExperimentConfig, calib: Calibration, scenario: Scenario, warm_start: SteadyState | None = None) -> ScenarioResult:
    """Steady state, perturbation, simulation, moments and IRF for one scenario.

    Solver failures are captured in ``error`` rather than raised.
    """
    timings = {}
    t0 = time.perf_counter()
    try:
        ss = solve_steady_state(scenario, calib, warm_start=warm_start)
        timings["steady_state"] = time.perf_counter() - t0
        t = time.perf_counter()
        policy = solve(scenario, calib, ss, order=config.order)
        timings["perturbation"] = time.perf_counter() - t
        t = time.perf_counter()
        sss = stochastic_steady_state(policy)
        paths = simulate_pruned(policy, config.horizon, config.burn_in, config.seed)
        report = moments(paths, calib, stochastic_ss=sss)
        timings["simulation"] = time.perf_counter() - t
        t = time.perf_counter()
        response = irf(policy, sss, config.shock_sds, config.irf_horizon, girf=config.girf, seed=config.seed)
        timings["irf"] = time.perf_counter() - t
    except (SolverError, PerturbationError, SimulationError, DomainError, np.linalg.LinAlgError) as exc:
        log.warning("scenario %s failed: %s", scenario.label, exc)
        return ScenarioResult(scenario, error=f"{type(exc).__name__}: {exc}", timings=MappingProxyType(timings))
    timings["total"] = time.perf_counter() - t0
    return ScenarioResult(scenario, ss, policy, sss, report, response, None, MappingProxyType(timings))


# Read-only mappings travel to worker processes as plain dicts.
def _frozen_mapping(items: dict) -> MappingProxyType:
    return MappingProxyType(items)


copyreg.pickle(MappingProxyType, lambda m: (_frozen_mapping, (dict(m),)))


def _run_one(args):
    config, calib, scenario = args
    return run_scenario(config, calib, scenario)


def run_experiment(config: ExperimentConfig, *, write: bool = True) -> ExperimentResult:
    """Run every scenario of ``config`` and (optionally) write the report bundle.

    Raises
    ------
    ConfigError
        If the calibration cannot be built.
    """
    calib = config.calibration()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = tuple(pool.map(_run_one, [(config, calib, s) for s in config.scenarios]))
    else:
        results = []
        warm = None
        for scen in config.scenarios:
            res = run_scenario(config, calib, scen, warm_start=warm if scen.regime == "constrained" else None)
            if res.ok and scen.regime != "bau":
                warm = res.ss
            results.append(res)
        results = tuple(results)
    out = ExperimentResult(config, calib, results, config.output_dir if write else None)
    if write:
        write_bundle(out, config.output_dir)
    return out


# ---------------------------------------------------------------------------
# Bundle I/O
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return f"{x:.6g}"


def _write_table(path: Path, header_comment: str, columns: list[str], rows: list[tuple[str, list[float]]]) -> None:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable"] + columns)
    for label, values in rows:
        w.writerow([label] + [_fmt(v) for v in values])
    path.write_text(buf.getvalue())


def write_bundle(result: ExperimentResult, outdir: Path) -> Path:
    """Write CSV tables, IRFs and the manifest.  CSVs depend only on inputs and the seed."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    ok = [r for r in result.results if r.ok]
    cols = [r.scenario.label for r in ok]
    stamp = f"preset={cfg.preset} seed={cfg.seed} horizon={cfg.horizon} burn_in={cfg.burn_in} order={cfg.order}"

    def table(getter, labels):
        return [(labels[k], [getter(r)[k] for r in ok]) for k in labels]

    _write_table(outdir / "means.csv", stamp, cols, table(lambda r: r.report.means, MEAN_ROW_LABELS))
    _write_table(outdir / "means_se.csv", stamp, cols, table(lambda r: r.report.mean_se, MEAN_ROW_LABELS))
    _write_table(outdir / "stds.csv", stamp, cols, table(lambda r: r.report.log_std, STD_ROW_LABELS))
    _write_table(outdir / "stds_se.csv", stamp, cols, table(lambda r: r.report.log_std_se, STD_ROW_LABELS))
    if ok:
        names = ok[0].ss.layout.names
        _write_table(outdir / "steady_state.csv", stamp, cols, [(n, [r.ss[n] for r in ok]) for n in names])
        _write_table(outdir / "stochastic_ss.csv", stamp, cols, [(n, [r.stochastic_ss[n] for r in ok]) for n in names])
    for r in ok:
        write_irf_csv(r.irf, outdir / f"irf_{_file_label(r.scenario.label)}.csv", stamp + f" shock_sds={cfg.shock_sds} mode={r.irf.mode}")
    write_manifest(result, outdir / "manifest.txt")
    return outdir


def _file_label(label: str) -> str:
    return label.replace(":", "_")


def write_irf_csv(response: IrfSet, path: Path, header_comment: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["horizon"] + list(response.names))
    for h, row in enumerate(response.deviations):
        w.writerow([h] + [_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def write_manifest(result: ExperimentResult, path: Path) -> None:
    cfg = result.config
    lines = [
        f"preset = {cfg.preset}",
        f"seed = {cfg.seed}",
        f"horizon = {cfg.horizon}",
        f"burn_in = {cfg.burn_in}",
        f"order = {cfg.order}",
        f"irf_horizon = {cfg.irf_horizon}",
        f"shock_sds = {cfg.shock_sds}",
        f"girf = {cfg.girf}",
        f"kernel_backend = {kernels.BACKEND}",
        f"scenarios = {', '.join(s.label for s in cfg.scenarios)}",
    ]
    for k, v in cfg.overrides.items():
        lines.append(f"override.{k} = {v!r}")
    for k, v in result.calib.__dict__.items():
        lines.append(f"calibration.{k} = {v!r}")
    for r in result.results:
        p = f"scenario.{r.scenario.label}"
        lines.append(f"{p}.status = {'ok' if r.ok else 'failed'}")
        if not r.ok:
            lines.append(f"{p}.error = {r.error}")
        else:
            lines.append(f"{p}.ss_iterations = {r.ss.iterations}")
            lines.append(f"{p}.ss_residual = {r.ss.residual_norm:.3e}")
            lines.append(f"{p}.blanchard_kahn = {r.policy.blanchard_kahn} ({r.policy.n_stable} stable)")
            lines.append(f"{p}.largest_stable_root = {np.max(np.abs(r.policy.eigenvalues[: r.policy.n_stable])):.10f}")
            lines.append(f"{p}.sss_iterations = {r.stochastic_ss.iterations}")
            if r.report.flags:
                lines.append(f"{p}.flags = {'; '.join(r.report.flags)}")
        for k, v in r.timings.items():
            lines.append(f"{p}.time.{k} = {v:.3f}s")
    Path(path).write_text("\n".join(lines) + "\n")


def read_table_csv(path: str | Path) -> dict[str, dict[str, float]]:
    """Read a bundle CSV into ``{row_label: {column: value}}``."""
    text = Path(path).read_text().splitlines()
    rows = list(csv.reader(line for line in text if not line.startswith("#")))
    header = rows[0][1:]
    return {r[0]: {c: float(v) for c, v in zip(header, r[1:])} for r in rows[1:]}


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

#: Tolerance schedule: relative for quantities, standard deviations and welfare; absolute for prices.
DEFAULT_TOLERANCES = MappingProxyType({"quantity_rel": 0.01, "price_abs": 0.002, "welfare_rel": 0.05, "std_rel": 0.15})


@dataclass(frozen=True)
class CellComparison:
    variable: str
    scenario: str
    simulated: float
    reference: float
    tolerance: float
    se: float | None
    passed: bool
    rule: str
    source: str

    @property
    def diff(self) -> float:
        return self.simulated - self.reference


@dataclass(frozen=True)
class Comparison:
    table: str
    preset: str
    cells: tuple[CellComparison, ...]
    missing: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.missing and all(c.passed for c in self.cells)

    def summary(self) -> dict:
        return {
            "table": self.table,
            "preset": self.preset,
            "cells": len(self.cells),
            "failed": sum(not c.passed for c in self.cells),
            "missing": list(self.missing),
            "ok": self.ok,
        }

    def lines(self) -> list[str]:
        out = []
        for c in self.cells:
            se = "" if c.se is None else f" se={c.se:.2g}"
            out.append(
                f"{'PASS' if c.passed else 'FAIL'} {c.variable:5s} {c.scenario:18s} sim={c.simulated:.6g} "
                f"ref={c.reference:.6g} diff={c.diff:+.3g} tol={c.tolerance:.3g} ({c.rule}){se}"
            )
        out += [f"MISSING {m}" for m in self.missing]
        return out


def cell_tolerance(table: str, variable: str, reference: float, decimals: int, tolerances=DEFAULT_TOLERANCES) -> tuple[float, str]:
    """Tolerance for one cell and the rule that produced it.

    Printed cells are rounded, so relative rules never demand more than
    half a unit in the last printed decimal.
    """
    half = 0.5 * 10.0 ** (-decimals)
    if table == "stds":
        if reference == 0.0:
            return 0.0, "structural zero"
        return max(tolerances["std_rel"] * abs(reference), half), "std rel"
    if variable in PRICE_ROWS:
        return tolerances["price_abs"], "abs"
    if variable in WELFARE_ROWS:
        return max(tolerances["welfare_rel"] * abs(reference), half), "welfare rel"
    return max(tolerances["quantity_rel"] * abs(reference), half), "rel or rounding"


def compare_to_reference(
    source: ExperimentResult | str | Path,
    table: str = "means",
    preset: str | None = None,
    tolerances=DEFAULT_TOLERANCES,
) -> Comparison:
    """Compare simulated moments with the embedded reference table.

    ``source`` is either an in-memory result or a bundle directory.  Cells
    present in the reference but absent from the simulation are listed in
    ``missing``.
    """
    if isinstance(source, ExperimentResult):
        preset = preset or source.config.preset
        sim, se = _tables_from_result(source, table)
    else:
        sim, se = _tables_from_bundle(Path(source), table)
        if preset is None:
            preset = _bundle_preset(Path(source))
    ref = reference_table(table, preset)
    cells, missing = [], []
    for cell in ref.cells:
        value = sim.get(cell.variable, {}).get(cell.scenario)
        if value is None or (isinstance(value, float) and np.isnan(value)):
            missing.append(f"{cell.variable}/{cell.scenario}")
            continue
        tol, rule = cell_tolerance(table, cell.variable, cell.value, cell.decimals, tolerances)
        cell_se = se.get(cell.variable, {}).get(cell.scenario)
        passed = abs(value - cell.value) <= tol
        cells.append(CellComparison(cell.variable, cell.scenario, value, cell.value, tol, cell_se, bool(passed), rule, cell.source))
    return Comparison(table, preset, tuple(cells), tuple(missing))


def _tables_from_result(result: ExperimentResult, table: str):
    sim, se = {}, {}
    for label, rep in result.reports().items():
        vals = rep.log_std if table == "stds" else rep.means
        errs = rep.log_std_se if table == "stds" else rep.mean_se
        for k, v in vals.items():
            sim.setdefault(k, {})[label] = v
            se.setdefault(k, {})[label] = errs.get(k)
    return sim, se


def _tables_from_bundle(path: Path, table: str):
    labels = STD_ROW_LABELS if table == "stds" else MEAN_ROW_LABELS
    inverse = {v: k for k, v in labels.items()}
    name = "stds" if table == "stds" else "means"
    raw = read_table_csv(path / f"{name}.csv")
    sim = {inverse[row]: cols for row, cols in raw.items() if row in inverse}
    se = {}
    se_path = path / f"{name}_se.csv"
    if se_path.exists():
        se = {inverse[row]: cols for row, cols in read_table_csv(se_path).items() if row in inverse}
    return sim, se


def _bundle_preset(path: Path) -> str:
    manifest = path / "manifest.txt"
    if manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.startswith("preset = "):
                return line.split("=", 1)[1].strip()
    return "baseline"


# ---------------------------------------------------------------------------
# Sensitivity suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QualitativeCheck:
    name: str
    passed: bool
    detail: str


def inequality_tax_effects(result: ExperimentResult) -> tuple[float, float]:
    """Mean-tax gaps ``tau(xi=0) - tau(unconstrained)`` and ``tau(xi=0) - tau(xi=1)``."""
    m = {k: v.means for k, v in result.reports().items()}
    t0 = m["constrained:0"]["tau"]
    return t0 - m["unconstrained"]["tau"], t0 - m["constrained:1"]["tau"]


def _procyclical(result: ExperimentResult) -> tuple[bool, str]:
    details, ok = [], True
    for r in result.results:
        if not r.ok:
            return False, f"{r.scenario.label} failed"
        for var in ("VX", "tau"):
            if var == "tau" and r.scenario.regime == "bau":
                continue
            path = r.irf[var]
            sign_ok = path[0] > 0 and path[int(np.argmax(np.abs(path)))] > 0
            ok &= bool(sign_ok)
            details.append(f"{r.scenario.label}.{var} impact={path[0]:+.3g}")
    return ok, "; ".join(details)


def qualitative_checks(results: dict[str, ExperimentResult]) -> list[QualitativeCheck]:
    """Orderings reported for the sensitivity presets, relative to ``results['baseline']``."""
    checks = []
    base = results.get("baseline")
    if base is not None and "gamma_low" in results and "gamma_high" in results:
        lo, b, hi = (inequality_tax_effects(results[k]) for k in ("gamma_low", "baseline", "gamma_high"))
        for i, what in enumerate(("tau(xi=0) - tau_unconstrained", "tau(xi=0) - tau(xi=1)")):
            ok = lo[i] < b[i] < hi[i]
            checks.append(QualitativeCheck(f"gamma monotone: {what}", ok, f"gamma_low {lo[i]:.5f} < baseline {b[i]:.5f} < gamma_high {hi[i]:.5f}"))
    if "theta1_high" in results:
        m = results["theta1_high"].reports()
        w1, w0 = m["constrained:1"].means["Wel"], m["constrained:0"].means["Wel"]
        checks.append(QualitativeCheck("theta1_high: W(xi=1) > W(xi=0)", w1 > w0, f"{w1:.4f} vs {w0:.4f}"))
    if "chi_high" in results:
        tau = results["chi_high"].reports()["unconstrained"].means["tau"]
        checks.append(QualitativeCheck("chi_high: unconstrained tau = 0.045 +- 0.003", abs(tau - 0.045) <= 0.003, f"{tau:.5f}"))
    if "eps_high" in results:
        ok, detail = _procyclical(results["eps_high"])
        checks.append(QualitativeCheck("eps_high: V^X and tau IRFs positive", ok, detail))
    return checks


def sensitivity_suite(
    outdir: str | Path | None = None,
    *,
    presets: tuple[str, ...] = SENSITIVITY_PRESETS,
    include_baseline: bool = True,
    base_config: ExperimentConfig | None = None,
) -> tuple[dict[str, ExperimentResult], list[QualitativeCheck]]:
    """Run the sensitivity presets (plus the baseline) and the qualitative checks.

    Each preset is written to ``outdir/<preset>``; the checks go to
    ``outdir/qualitative.txt``.
    """
    outdir = Path(outdir) if outdir is not None else default_output_root() / "sensitivity"
    base_config = base_config or ExperimentConfig()
    names = (("baseline",) if include_baseline else ()) + tuple(presets)
    results = {}
    for name in names:
        cfg = base_config.with_changes(preset=name, output=outdir / name)
        results[name] = run_experiment(cfg)
    checks = qualitative_checks(results)
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in checks]
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "qualitative.txt").write_text("\n".join(lines) + "\n")
    return results, checks
