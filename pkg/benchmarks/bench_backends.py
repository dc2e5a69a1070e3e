"""Compare the numba kernels against the pure-numpy fallback.

Times the two hot paths of the estimator core: batched iteration of the
recursion and the inversion-based iterate-density rows.  Run directly:

    python3 benchmarks/bench_backends.py --steps 256 --outer 200 --inner 2000
"""
import argparse
import time

import numpy as np

from picardmc import RngStream, TimeGrid, constant_gaussian_message
from picardmc import kernels
from picardmc.engine import sample_brownian_batch


def _time(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--outer", type=int, default=200)
    ap.add_argument("--inner", type=int, default=2000)
    ap.add_argument("--order", type=int, default=3)
    args = ap.parse_args()

    grid = TimeGrid(1.0, args.steps)
    law = constant_gaussian_message(grid)
    gen = RngStream(0).generator()
    X = np.asarray(law.sample_batch(gen, args.outer), dtype=float)
    W = sample_brownian_batch(grid, gen, args.outer)
    Xin = np.asarray(law.sample_batch(gen, args.inner), dtype=float)

    if "numba" in kernels.available_backends():
        kernels.set_backend("numba")  # trigger compilation outside the timing
        kernels.picard_final(X, W, grid.dt, 0.0, 1.0, 0.5, np.inf, args.order)
        kernels.iterate_logdens_rows(Xin, W[0], grid.dt, 0.0, 1.0, 0.5, np.inf, args.order)

    results = {}
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        t_picard = _time(
            lambda: kernels.picard_final(X, W, grid.dt, 0.0, 1.0, 0.5, np.inf, args.order)
        )
        t_rows = _time(
            lambda: [
                kernels.iterate_logdens_rows(
                    Xin, W[b], grid.dt, 0.0, 1.0, 0.5, np.inf, args.order
                )
                for b in range(min(args.outer, 20))
            ]
        )
        results[backend] = (t_picard, t_rows)

    print(f"steps={args.steps} outer={args.outer} inner={args.inner} order={args.order}")
    print(f"{'backend':8s} {'picard_final':>14s} {'iterate_rows x20':>18s}")
    for backend, (tp, tr) in results.items():
        print(f"{backend:8s} {tp * 1e3:>12.2f}ms {tr * 1e3:>16.2f}ms")
    if len(results) == 2:
        np_t, nb_t = results["numpy"], results["numba"]
        print(
            f"speedup  {np_t[0] / nb_t[0]:>12.1f}x {np_t[1] / nb_t[1]:>16.1f}x"
        )


if __name__ == "__main__":
    main()
