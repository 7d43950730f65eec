"""Time the numba loop kernels against their pure-numpy counterparts.

Run: python3 benchmarks/bench_kernels.py [--steps K] [--modes N] [--repeat R]
With SWITCHSPDE_DISABLE_NUMBA=1 the loop kernels run as plain Python.
"""
import argparse
import time

import numpy as np

from switchspde import _accel, kernels


def make_inputs(steps, modes, seed=0):
    rng = np.random.default_rng(seed)
    lam = (np.arange(1, modes + 1) ** 2).astype(float)
    u = np.zeros(modes)
    u[0] = 1.0
    dt = np.full(steps, 1e-2)
    dW = rng.standard_normal(steps) * np.sqrt(dt)
    drift = rng.choice([3.0, -1.0], steps)
    beta = np.full(steps, 0.3)
    jump_log = np.where(rng.random(steps) < 0.01, np.log1p(0.2), 0.0)
    return lam, u, dt, dW, drift, beta, jump_log


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--modes", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    inputs = make_inputs(args.steps, args.modes)
    print(f"backend: {_accel.backend_name()}, steps={args.steps}, modes={args.modes}")
    pairs = [("exact_lognorm", kernels.exact_lognorm_loop, kernels.exact_lognorm_numpy),
             ("euler_linear", kernels.euler_linear_loop, kernels.euler_linear_numpy)]
    for name, loop, vec in pairs:
        t_loop = best_of(loop, inputs, args.repeat)
        t_vec = best_of(vec, inputs, args.repeat)
        gap = np.max(np.abs(loop(*inputs)[0] - vec(*inputs)[0]))
        print(f"{name:14s} loop {t_loop * 1e3:9.2f} ms   numpy {t_vec * 1e3:9.2f} ms   "
              f"speedup {t_vec / t_loop:6.2f}x   max |diff| {gap:.2e}")


if __name__ == "__main__":
    main()
