"""Time each hot kernel in its numba and numpy flavour.

    python benchmarks/bench_kernels.py [--repeat 5]

The numba flavour is compiled (or loaded from cache) before timing. When
numba is not installed, or EPSENSE_DISABLE_NUMBA is set, only the numpy
column is filled.
"""

import argparse
import timeit

import numpy as np

from epsense import _kernels as k
from epsense._accel import NUMBA_AVAILABLE
from epsense.dynamics import liouvillian
from epsense.model import make_params

W0 = 1.2325


def cases():
    t = np.linspace(0.0, 2.0, 200_001)
    t81 = np.linspace(0.0, 2.0, 81)
    y = k.model_pe_np(0.9, -0.05, 4.93, t81)
    w = np.full(81, 1 / 81)
    u = k.uniforms_np(k.trajectory_seeds(0, 0, 100_000), 2)
    n_iter = k.bisection_iterations(2.0, 1e-6)
    gen = liouvillian(make_params(W0, 0.07, 5.0))
    x0 = np.zeros(9, dtype=complex)
    x0[4] = 1.0
    seeds = k.trajectory_seeds(0, 0, 1_000_000)
    return {
        "amplitudes (2e5 times)": lambda f: f(W0 * 1.1, 0.07, 5.0, 1 + 0j, 0j, t),
        "weighted_rss x1000 (81 pts)": lambda f: [f(0.9, -0.05, 4.93, t81, y, w) for _ in range(1000)],
        "uniforms (1e6 x 2)": lambda f: f(seeds, 2),
        "first_jumps (1e5 traj)": lambda f: f(W0, 0.07, 5.0, 1 + 0j, 0j, 2.0, n_iter, u),
        "rk4_linear (1000 steps x 81)": lambda f: f(gen, x0, 0.002, 1000 // 81 + 1, 81),
    }


FLAVOURS = {
    "amplitudes (2e5 times)": (k.amplitudes_nb, k.amplitudes_np),
    "weighted_rss x1000 (81 pts)": (k.weighted_rss_nb, k.weighted_rss_np),
    "uniforms (1e6 x 2)": (k.uniforms_nb, k.uniforms_np),
    "first_jumps (1e5 traj)": (k.first_jumps_nb, k.first_jumps_np),
    "rk4_linear (1000 steps x 81)": (k.rk4_linear_nb, k.rk4_linear_np),
}


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    print(f"{'kernel':<30}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, call in cases().items():
        nb, npy = FLAVOURS[name]
        t_np = best_of(lambda: call(npy), args.repeat)
        if NUMBA_AVAILABLE:
            t_nb = best_of(lambda: call(nb), args.repeat)
            print(f"{name:<30}{t_nb * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<30}{'-':>12}{t_np * 1e3:>12.3f}{'-':>10}")


if __name__ == "__main__":
    main()
