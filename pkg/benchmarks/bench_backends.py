"""Benchmark the compiled Gibbs kernel against the pure-numpy fallback.

Usage:
    python benchmarks/bench_backends.py [--rows N] [--cols N] [--batch N]
                                        [--sweeps N] [--repeat N]

Reports nanoseconds per site update for each available backend on the same
pre-generated uniform variates (both backends consume them identically, so
the outputs are bitwise equal and the comparison is pure speed), plus an
end-to-end timing of a debiased likelihood estimate on the Ising model.

The Gaussian-model hot path is shared numpy code, so it is backend-
independent and not benchmarked here.
"""

import argparse
import importlib
import time

import numpy as np

from exactabc import _core_np
from exactabc.debias import TruncationSchedule, debiased_likelihood
from exactabc.ising import conditional_ptable
from exactabc.streams import STREAM_TEST, derive

try:
    from exactabc import _core
except ImportError:
    _core = None


def bench_kernel(impl, spins, ptable, u, repeat):
    """Best-of-``repeat`` wall time for one full sweep pass."""
    best = float("inf")
    for _ in range(repeat):
        work = spins.copy()
        start = time.perf_counter()
        impl.gibbs_sweeps(work, ptable, u)
        best = min(best, time.perf_counter() - start)
    return best, work


def bench_end_to_end(backend_name, rows, cols, repeat):
    """Median time for one debiased likelihood estimate on the Ising model.

    Reloads the backend module under EXACTABC_BACKEND so the chosen kernel
    is the one actually used by the estimator.
    """
    import os

    from exactabc import backend, ising

    os.environ["EXACTABC_BACKEND"] = backend_name
    importlib.reload(backend)
    importlib.reload(ising)
    model = ising.IsingModel(rows, cols, observed_stat=0, sweeps=200)
    sched = TruncationSchedule(rho=0.6, tau=0.6, dim=1, max_level=1, cap_action="truncate")
    times = []
    for i in range(repeat):
        rng = derive(99, STREAM_TEST, i)
        start = time.perf_counter()
        debiased_likelihood(model, np.array([0.5]), sched, rng)
        times.append(time.perf_counter() - start)
    return sorted(times)[len(times) // 2]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=16)
    parser.add_argument("--cols", type=int, default=16)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--sweeps", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = derive(98, STREAM_TEST, 0)
    spins = np.where(
        rng.random((args.rows, args.cols, args.batch)) < 0.5, 1, -1
    ).astype(np.int8)
    ptable = conditional_ptable(0.5)
    u = rng.random((args.sweeps, args.rows, args.cols, args.batch))
    updates = args.sweeps * args.rows * args.cols * args.batch

    print(f"lattice {args.rows}x{args.cols}, batch {args.batch}, "
          f"{args.sweeps} sweeps -> {updates} site updates per pass\n")

    t_np, out_np = bench_kernel(_core_np, spins, ptable, u, args.repeat)
    print(f"python (numpy) : {1e9 * t_np / updates:8.2f} ns/update"
          f"  ({t_np * 1e3:.1f} ms per pass)")

    if _core is not None:
        t_c, out_c = bench_kernel(_core, spins, ptable, u, args.repeat)
        agree = np.array_equal(out_np, out_c)
        print(f"compiled       : {1e9 * t_c / updates:8.2f} ns/update"
              f"  ({t_c * 1e3:.1f} ms per pass)")
        print(f"speedup        : {t_np / t_c:8.1f}x   outputs bitwise equal: {agree}")
        if not agree:
            raise SystemExit("backend outputs differ — benchmark aborted")
    else:
        print("compiled       : extension not built (pip install -e . rebuilds it)")

    print("\nend-to-end: one debiased likelihood estimate, 4x4 Ising, "
          "rho=tau=0.6, cap 1 (median of 9):")
    for name in ("python",) + (("compiled",) if _core is not None else ()):
        t = bench_end_to_end(name, 4, 4, 9)
        print(f"  {name:8s} : {t * 1e3:7.2f} ms/estimate")


if __name__ == "__main__":
    main()
