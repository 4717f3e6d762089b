#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the pure-Python twin.

Both lanes run identical algorithms and produce bit-identical streams; this
script measures the speed gap on the scalar generators and the fused Monte
Carlo kernels that dominate harness runtime.

Usage: python benchmarks/bench_kernels.py [--scale N]
  --scale divides the work (default 1); use e.g. 10 for a quick look.
"""

import argparse
import time

import numpy as np

from dpsample._kernels import lanes


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return time.perf_counter() - t0, out


def bench_case(name, build_args, work, sizes):
    print(f"\n{name}")
    print(f"  {'case':<28} {'pure':>10} {'ext':>10} {'speedup':>9}")
    lanes_map = lanes()
    if "ext" not in lanes_map:
        print("  compiled lane not built; nothing to compare")
        return
    for label, n in sizes:
        results = {}
        for lane_name, lane in lanes_map.items():
            args = build_args(lane, n)
            dt, out = timed(work, lane, *args)
            results[lane_name] = (dt, out)
        pure_t, pure_out = results["pure"]
        ext_t, ext_out = results["ext"]
        same = (
            np.array_equal(pure_out, ext_out)
            if isinstance(pure_out, np.ndarray)
            else pure_out == ext_out
        )
        flag = "" if same else "  *** MISMATCH ***"
        print(
            f"  {label:<28} {pure_t:>9.3f}s {ext_t:>9.3f}s "
            f"{pure_t / max(ext_t, 1e-9):>8.1f}x{flag}"
        )


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--scale", type=int, default=1)
    args = parser.parse_args()
    s = max(args.scale, 1)

    bench_case(
        "scalar uniforms",
        lambda lane, n: (lane.make_state(1, 2), n),
        lambda lane, st, n: lane.uniforms(st, n),
        [("1e6 draws", 1_000_000 // s)],
    )
    bench_case(
        "Poisson draws (both paths)",
        lambda lane, n: (lane.make_state(3, 4), n),
        lambda lane, st, n: [lane.poisson(st, 5.0) for _ in range(n)]
        + [lane.poisson(st, 80.0) for _ in range(n)],
        [("2e5 draws", 100_000 // s)],
    )
    bench_case(
        "binomial draws (both paths)",
        lambda lane, n: (lane.make_state(5, 6), n),
        lambda lane, st, n: [lane.binomial(st, 40, 0.2) for _ in range(n)]
        + [lane.binomial(st, 5000, 0.4) for _ in range(n)],
        [("2e5 draws", 100_000 // s)],
    )
    emp = np.array([0.6, 0.4])
    bench_case(
        "k-ary sampler trials (fixed data, k=2, n=10)",
        lambda lane, n: (n,),
        lambda lane, n: lane.kary_mc_fixed(7, 8, emp, 10, 1.0, n),
        [("1e5 trials", 100_000 // s)],
    )
    pvec = np.full(10, 0.1)
    bench_case(
        "k-ary sampler trials (fresh data, k=10, n=200)",
        lambda lane, n: (n,),
        lambda lane, n: lane.kary_mc_fresh(9, 10, pvec, 200, 1.0, n),
        [("2e4 trials", 20_000 // s)],
    )
    biases = np.linspace(1 / 3, 2 / 3, 64)
    bench_case(
        "clipped product trials (d=64, n=595)",
        lambda lane, n: (n,),
        lambda lane, n: lane.clip_product_mc(11, 12, biases, 595, n),
        [("1e4 trials", 10_000 // s)],
    )


if __name__ == "__main__":
    main()
