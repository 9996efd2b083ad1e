"""Compare the compiled kernels against their uncompiled Python bodies.

The package selects the path at import time: the default is numba's
nopython JIT; exporting SMALLGAIN_DISABLE_NJIT=1 keeps the plain
NumPy/Python implementations.  This script always times the Python
bodies directly and, when the JIT is active, the compiled dispatchers
as well, so one invocation shows the speedup.

Usage: python benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from smallgain.models.chemostat import default_params
from smallgain.sim import kernels


def chemostat_args(n_steps: int):
    params = default_params(r=5.0)
    h = 0.1
    m = 50
    s_full = np.zeros(m + n_steps + 1)
    s_full[: m + 1] = 6.0 + np.linspace(-1.0, 1.0, m + 1)
    mu_full = np.zeros_like(s_full)
    for j in range(m + 1):
        mu_full[j] = params.mu(float(s_full[j]))
    d_half = np.tile(np.array([0.0, 1.0]), n_steps + 1)[: 2 * n_steps + 1]
    return (
        h, n_steps, m, 2.0, s_full, mu_full,
        kernels.GROWTH_MONOD, 1.0, 0.5, 0.0, np.zeros(0), np.zeros(0),
        kernels.YIELD_CONSTANT, 0.5, np.zeros(0), np.zeros(0),
        10.0, 0.05, 0.5, 0.75, 2.0,
        kernels.P_WINDOW_MIN, 0.0, 1.0, np.zeros(0), np.zeros(0), np.zeros(1),
        d_half, True, 0.0,
    )


def run_once(fn, args):
    fresh = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)
    t0 = time.perf_counter()
    _, _, status, _ = fn(*fresh)
    dt = time.perf_counter() - t0
    assert status == kernels.STATUS_OK
    return dt


def bench(fn, args, repeat):
    return min(run_once(fn, args) for _ in range(repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    ns = parser.parse_args()

    args = chemostat_args(ns.steps)
    print(f"bioreactor loop, {ns.steps} steps, window of 51 samples")

    t_py = bench(kernels._chemostat_loop_py, args, ns.repeat)
    print(f"  python/numpy body : {t_py * 1e3:10.2f} ms")

    if kernels.NUMBA_ENABLED:
        run_once(kernels.chemostat_loop, args)  # compile outside the timer
        t_jit = bench(kernels.chemostat_loop, args, ns.repeat)
        print(f"  numba njit        : {t_jit * 1e3:10.2f} ms")
        print(f"  speedup           : {t_py / t_jit:10.1f}x")
    else:
        print("  numba njit        : disabled (SMALLGAIN_DISABLE_NJIT set)")


if __name__ == "__main__":
    main()
