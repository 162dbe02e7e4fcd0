"""Command-line entry point.

Exit codes: 0 success, 1 solver failure, 2 config error, 3 comparison failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (
    EXIT_COMPARE,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    ConfigError,
    compare_to_reference,
    load_config,
    run_experiment,
    sensitivity_suite,
    write_irf_csv,
    ExperimentConfig,
    _file_label,
)
from .perturbation import solve
from .simulate import irf, stochastic_steady_state
from .steady_state import SolverError, solve_steady_state


def _add_run_flags(p: argparse.ArgumentParser, *, irf_only: bool = False) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int, help="IRF horizon" if irf_only else "simulated periods kept")
    if not irf_only:
        p.add_argument("--burn-in", type=int)
    p.add_argument("--shock-sds", type=float)
    p.add_argument("--girf", action="store_true", default=None, help="ensemble (generalized) IRFs")
    p.add_argument("--order", type=int, choices=(1, 2))
    p.add_argument("--output", type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carbontax", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario of a config and write a report bundle")
    run.add_argument("config", type=Path)
    _add_run_flags(run)

    cmp_ = sub.add_parser("compare", help="compare a report bundle with the embedded reference tables")
    cmp_.add_argument("bundle", type=Path)
    cmp_.add_argument("--table", choices=("means", "stds"), default="means")
    cmp_.add_argument("--preset")
    cmp_.add_argument("--json", action="store_true", help="print the machine-readable summary only")

    sens = sub.add_parser("sensitivity", help="run the six sensitivity presets")
    sens.add_argument("outdir", type=Path, nargs="?")
    _add_run_flags(sens)

    irf_p = sub.add_parser("irf", help="write impulse responses only")
    irf_p.add_argument("config", type=Path)
    _add_run_flags(irf_p, irf_only=True)
    return parser


def _overrides(cfg: ExperimentConfig, args, *, irf_only: bool = False) -> ExperimentConfig:
    changes = dict(
        seed=args.seed,
        shock_sds=args.shock_sds,
        girf=args.girf,
        order=args.order,
        output=args.output,
    )
    if irf_only:
        changes["irf_horizon"] = args.horizon
    else:
        changes["horizon"] = args.horizon
        changes["burn_in"] = args.burn_in
    return cfg.with_changes(**changes)


def _print_comparisons(result) -> bool:
    ok = True
    for table in ("means", "stds"):
        try:
            cmp_ = compare_to_reference(result, table)
        except KeyError as exc:
            print(f"no reference: {exc}")
            continue
        print("\n".join(cmp_.lines()))
        print(json.dumps(cmp_.summary()))
        ok &= cmp_.ok
    return ok


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _overrides(load_config(args.config), args)
            result = run_experiment(cfg)
            for r in result.results:
                print(f"{r.scenario.label}: {'ok' if r.ok else r.error}")
            print(f"bundle written to {cfg.output_dir}")
            if not result.ok:
                return EXIT_SOLVER
            if cfg.compare and not _print_comparisons(result):
                return EXIT_COMPARE
            return EXIT_OK

        if args.command == "compare":
            cmp_ = compare_to_reference(args.bundle, args.table, args.preset)
            if not args.json:
                print("\n".join(cmp_.lines()))
            print(json.dumps(cmp_.summary()))
            return EXIT_OK if cmp_.ok else EXIT_COMPARE

        if args.command == "sensitivity":
            base = _overrides(ExperimentConfig(), args)
            results, checks = sensitivity_suite(args.outdir, base_config=base.with_changes(output=None))
            for c in checks:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
            if not all(r.ok for r in results.values()):
                return EXIT_SOLVER
            return EXIT_OK if all(c.passed for c in checks) else EXIT_COMPARE

        if args.command == "irf":
            cfg = _overrides(load_config(args.config), args, irf_only=True)
            calib = cfg.calibration()
            outdir = cfg.output_dir
            outdir.mkdir(parents=True, exist_ok=True)
            for scen in cfg.scenarios:
                ss = solve_steady_state(scen, calib)
                policy = solve(scen, calib, ss, order=cfg.order)
                response = irf(policy, stochastic_steady_state(policy), cfg.shock_sds, cfg.irf_horizon, girf=cfg.girf, seed=cfg.seed)
                path = outdir / f"irf_{_file_label(scen.label)}.csv"
                write_irf_csv(response, path, f"preset={cfg.preset} seed={cfg.seed} shock_sds={cfg.shock_sds} mode={response.mode}")
                print(path)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
