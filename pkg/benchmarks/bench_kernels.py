#!/usr/bin/env python3
"""Benchmark the hot kernels with numba enabled vs the pure-numpy fallback.

Run directly for the current mode, or with --both to spawn one subprocess
per mode (CASCPATH_NO_NUMBA toggles the fallback) and print the comparison.
Outputs one JSON object per mode.
"""

import argparse
import json
import os
import subprocess
import sys
import time

WARMUP = 3
REPEAT = 50


def bench(fn, repeat=REPEAT, warmup=WARMUP):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), sum(times) / len(times)


def run_mode():
    import numpy as np

    from cascpath import NUMBA_ENABLED, build_gsdf, rts79_wind_case
    from cascpath.dcopf import build_lp_blocks, solve_baseline
    from cascpath.lsd import Lsd

    case = rts79_wind_case()
    gsdf = build_gsdf(case)
    blocks = build_lp_blocks(case, gsdf, gen_nonnegative=True)
    caps = case.arr.gen_pmax.copy()
    caps[case.arr.gen_is_wind] = 150.0
    phi = np.concatenate([caps, 0.9 * case.arr.base_load])

    results = {"mode": "numba" if NUMBA_ENABLED else "numpy", "kernels": {}}

    best, mean = bench(lambda: solve_baseline(blocks, phi))
    results["kernels"]["dispatch_solve_ms"] = {"min": best * 1e3, "mean": mean * 1e3}

    lsd = Lsd(case, gen_nonnegative=True)
    state = gsdf.line_state
    lsd.solve(state, phi)  # prime the region
    best, mean = bench(lambda: lsd.solve(state, phi), repeat=500)
    results["kernels"]["dispatch_cached_us"] = {"min": best * 1e6, "mean": mean * 1e6}

    flows_p = np.zeros(case.n_bus)
    best, mean = bench(lambda: gsdf.values @ flows_p, repeat=2000)
    results["kernels"]["flow_matvec_us"] = {"min": best * 1e6, "mean": mean * 1e6}

    print(json.dumps(results, indent=1))
    return results


def run_both():
    out = []
    for disable in ("0", "1"):
        env = dict(os.environ, CASCPATH_NO_NUMBA=disable)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__)],
            env=env, capture_output=True, text=True, check=True,
        )
        out.append(json.loads(proc.stdout))
    jit, plain = out
    print(json.dumps({"numba": jit, "numpy_fallback": plain}, indent=1))
    solve_ratio = (plain["kernels"]["dispatch_solve_ms"]["min"]
                   / jit["kernels"]["dispatch_solve_ms"]["min"])
    print(f"\ndispatch solve: numba {solve_ratio:.1f}x faster than the fallback",
          file=sys.stderr)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--both", action="store_true",
                    help="benchmark numba and fallback in subprocesses")
    args = ap.parse_args()
    if args.both:
        run_both()
    else:
        run_mode()


if __name__ == "__main__":
    main()
