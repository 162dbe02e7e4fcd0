"""Time the compiled state-recursion kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--periods N] [--repeat R]

Both backends receive the baseline constrained-planner policy and identical
shocks; the script also checks that their outputs agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from carbontax import _kernels_py
from carbontax.model import Scenario, build_calibration
from carbontax.perturbation import solve
from carbontax.steady_state import solve_steady_state


def _policy_arrays():
    calib = build_calibration("baseline")
    scen = Scenario.constrained("gamma")
    pol = solve(scen, calib, solve_steady_state(scen, calib), order=2)
    return (
        np.ascontiguousarray(pol.hx),
        np.ascontiguousarray(pol.eta),
        np.ascontiguousarray(pol.hxx),
        np.ascontiguousarray(pol.hss),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--periods", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    try:
        from carbontax import _kernels as compiled
    except ImportError:
        print("compiled extension not built; only the fallback can be timed")
        compiled = None

    hx, eta, hxx, hss = _policy_arrays()
    nx = hx.shape[0]
    shocks = np.random.default_rng(0).standard_normal((args.periods, eta.shape[1]))
    zero = np.zeros(nx)
    backends = {"python": _kernels_py}
    if compiled is not None:
        backends["cython"] = compiled

    timings, outputs = {}, {}
    for name, mod in backends.items():
        outputs[name] = mod.pruned_states(hx, eta, hxx, hss, shocks, zero, zero)
        timer = timeit.Timer(lambda mod=mod: mod.pruned_states(hx, eta, hxx, hss, shocks, zero, zero))
        timings[name] = min(timer.repeat(repeat=args.repeat, number=1))
        print(f"{name:7s} pruned_states  {args.periods} periods  best of {args.repeat}: {timings[name] * 1e3:9.2f} ms")

    if compiled is not None:
        gap = max(np.max(np.abs(a - b)) for a, b in zip(outputs["python"], outputs["cython"]))
        print(f"speed-up {timings['python'] / timings['cython']:.1f}x, max output difference {gap:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
