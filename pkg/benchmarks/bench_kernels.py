"""Timing comparison of the two proximal-kernel backends.

Runs the hot inner kernel (prox_batch) and a full saddle-point solve with the
active backend.  Launch twice to compare:

    python3 benchmarks/bench_kernels.py
    TMIX_NO_NUMBA=1 python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

import tmix
from tmix.replica import BACKEND, prox_batch


def bench_prox(n=2000, reps=200):
    rng = np.random.default_rng(0)
    t = rng.standard_normal(n) * 3.0
    prox_batch(1.0, 2.0, t, 1.0)  # warm up (jit compile on the numba path)
    t0 = time.perf_counter()
    for k in range(reps):
        prox_batch(1.0 if k % 2 else -1.0, 2.0, t, 1.3)
    dt = time.perf_counter() - t0
    print(f"prox_batch   {BACKEND:>5}: {dt / reps * 1e3:8.3f} ms per call "
          f"({n} nodes)")


def bench_solve():
    gen = tmix.GenerativeParams(
        rho=0.3, delta_plus=0.5, delta_minus=2.5, m_tilde_plus=0.2,
        m_tilde_minus=0.2, q_teacher=0.8, alpha=0.5,
    )
    tmix.fixed_point_solve(gen, 0.05)  # warm up
    t0 = time.perf_counter()
    sol = tmix.fixed_point_solve(gen, 0.05)
    dt = time.perf_counter() - t0
    print(f"fixed point  {BACKEND:>5}: {dt * 1e3:8.1f} ms "
          f"({sol.sweeps} sweeps, converged={sol.converged})")


if __name__ == "__main__":
    bench_prox()
    bench_solve()
