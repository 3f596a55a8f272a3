"""Compare the compiled candidate-scoring kernel with the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--bins 20,100,400] [--repeat 50]``
"""

import argparse
import sys
import time

import numpy as np

from taskdesign import kernels
from taskdesign.designer import DesignConfig, run_design
from taskdesign.environments import SyntheticEnvironment, SyntheticSpec
from taskdesign.posterior import init_uniform_prior
from taskdesign.rewards import RewardSpec

KINDS = {"mse": kernels.MSE, "ate": kernels.ATE, "auq": kernels.AUQ, "erupt": kernels.ERUPT}


def median_time(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def kernel_table(sizes, repeat, rng):
    compiled = kernels.compiled_candidate_values()
    rows = []
    for k in sizes:
        p = rng.dirichlet(np.ones(k))
        alpha = np.ones((k, 2))
        theta = rng.uniform(0.05, 0.95, (k, 2))
        n = rng.integers(0, 50, (k, 2)).astype(float)
        for name, kind in KINDS.items():
            args = (kind, p, alpha, alpha, theta, n, 0.1)
            py = median_time(lambda: kernels.python_candidate_values(*args), repeat)
            cy = median_time(lambda: compiled(*args), repeat) if compiled else float("nan")
            if compiled:
                np.testing.assert_allclose(compiled(*args), kernels.python_candidate_values(*args), rtol=1e-9, atol=1e-12)
            rows.append((k, name, py, cy))
    return rows


def design_timing(n, seed=0):
    env = SyntheticEnvironment(SyntheticSpec())
    t0 = time.perf_counter()
    run_design(env, init_uniform_prior(env.n_bins), DesignConfig(n, RewardSpec("auq"), seed=seed))
    return time.perf_counter() - t0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--bins", default="20,100,400")
    parser.add_argument("--repeat", type=int, default=50)
    parser.add_argument("--design-n", type=int, default=3000)
    args = parser.parse_args(argv)
    sizes = [int(v) for v in args.bins.split(",")]
    rng = np.random.default_rng(0)

    print(f"active backend: {kernels.BACKEND}")
    if kernels.compiled_candidate_values() is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'bins':>5} {'reward':>6} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for k, name, py, cy in kernel_table(sizes, args.repeat, rng):
        print(f"{k:>5} {name:>6} {py * 1e6:>10.1f} {cy * 1e6:>10.1f} {py / cy:>8.1f}")
    print(f"AUQ design, n={args.design_n}, 20 bins, {kernels.BACKEND} backend: {design_timing(args.design_n):.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
