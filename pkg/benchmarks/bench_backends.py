#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the hot path (terminal_batch over a path block) on every available
backend, checks that outputs agree bit for bit, and prints the speedup.

    python benchmarks/bench_backends.py --paths 4096 --steps 4096
"""

import argparse
import time

import numpy as np

from cirmil import PAR1
from cirmil._kernels import available_backends, get_backend
from cirmil.stochastic import gaussian_block


def bench(backend_name: str, dw, dt: float, repeats: int):
    kernels = get_backend(backend_name)
    args = (PAR1.alpha, PAR1.mu, PAR1.sigma, 1.0, dt, PAR1.x0, dw)
    kernels.terminal_batch(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        terminal, running_min = kernels.terminal_batch(*args)
        best = min(best, time.perf_counter() - t0)
    return best, terminal, running_min


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=4096)
    parser.add_argument("--steps", type=int, default=4096)
    parser.add_argument("--dt", type=float, default=2.0**-12)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    dw = gaussian_block(args.seed, 0, args.paths, args.steps, args.dt)
    n_updates = args.paths * args.steps

    results = {}
    for name in available_backends():
        elapsed, terminal, running_min = bench(name, dw, args.dt, args.repeats)
        results[name] = (elapsed, terminal, running_min)
        rate = n_updates / elapsed / 1e6
        print(f"{name:>8}: {elapsed * 1e3:9.2f} ms   {rate:8.1f} M steps/s")

    names = list(results)
    if len(names) == 2:
        (t_a, term_a, min_a), (t_b, term_b, min_b) = results[names[0]], results[names[1]]
        identical = np.array_equal(term_a, term_b) and np.array_equal(min_a, min_b)
        print(f"bit-identical outputs: {identical}")
        slow, fast = max(names, key=lambda n: results[n][0]), min(names, key=lambda n: results[n][0])
        print(f"speedup {fast} vs {slow}: {results[slow][0] / results[fast][0]:.2f}x")
        if not identical:
            raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
