"""Time the compiled and NumPy kernel backends on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 8]
"""

import argparse
import timeit

import numpy as np

from flowmech import Scenario, TypeSpace, kernels
from flowmech.mechanism import check_incentive_compatible, max_efficiency_mechanism


def inputs(points, seed=0):
    rng = np.random.default_rng(seed)
    loads = rng.uniform(0.0, 4.0, 512)
    weight = rng.dirichlet(np.ones(512))
    grid = np.linspace(0.0, 5.0, points)
    tau = np.linspace(0.1, 1.0, 16)
    own = rng.uniform(0.1, 1.0, (16, 256))
    load = rng.uniform(0.0, 3.0, (16, 256))
    w = rng.dirichlet(np.ones(256))
    return grid, loads, weight, tau, own, load + own, w


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=8)
    args = ap.parse_args()

    grid, loads, weight, tau, own, load, w = inputs(args.points)
    sc = Scenario(args.n, TypeSpace.uniform((0.1, 0.4, 0.7, 1.0)))
    mech = max_efficiency_mechanism(sc)
    cases = {
        "deviation_values": lambda: kernels.deviation_values(
            grid, 0.5, 5.0, loads, np.full(512, 0.4), np.full(512, 1.5), np.full(512, 4.0), weight
        ),
        "misreport_matrix": lambda: kernels.misreport_matrix(tau, 5.0, own, load, w),
        f"ic_check(n={args.n})": lambda: check_incentive_compatible(sc, mech, 2000),
    }
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    timings = {}
    for name in backends:
        previous = kernels.use_backend(name)
        try:
            for case, fn in cases.items():
                fn()
                t = min(timeit.repeat(fn, number=1, repeat=args.repeat))
                timings[case, name] = t
        finally:
            kernels.use_backend(previous)
    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for case in cases:
        row = f"{case:<24}" + "".join(f"{timings[case, b] * 1e3:>10.3f}ms" for b in backends)
        if "cython" in backends and "python" in backends:
            row += f"{timings[case, 'python'] / timings[case, 'cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
