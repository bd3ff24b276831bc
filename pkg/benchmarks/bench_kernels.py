"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Prints the median time per kernel and backend, and the speed-up.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from elosslab import kernels
from elosslab.rigidity import random_k_regular


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cases(rng):
    pred = rng.standard_normal((1, 2000, 3))
    target = rng.standard_normal((1, 2000, 3))
    yield "pair_energy n=2000", lambda b: b.pair_energy(pred, target, 3, 1.0, 1e-12)
    big_p = rng.standard_normal((1, 100_000, 3))
    big_t = rng.standard_normal((1, 100_000, 3))
    edges = random_k_regular(100_000, 6, rng).edges
    yield "edge_energy n=1e5 k=6", lambda b: b.edge_energy(big_p, big_t, edges, 3, 1.0, 1e-12)
    batch_p = rng.standard_normal((128, 5, 2))
    batch_t = rng.standard_normal((128, 5, 2))
    yield "pair_energy batch 128x5", lambda b: b.pair_energy(batch_p, batch_t, 3, 1.0, 1e-12)
    for side in (4, 5):
        jh = rng.uniform(-1, 1, (side, side - 1))
        jv = rng.uniform(-1, 1, (side - 1, side))
        yield f"ising_ground_state {side}x{side}", lambda b, jh=jh, jv=jv: b.ising_ground_state(jh, jv)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; reinstall with Cython available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'compiled (s)':>13s} {'numpy (s)':>11s} {'speed-up':>9s}")
    for name, call in cases(rng):
        repeats = 1 if "5x5" in name else args.repeats
        fast = _median_time(lambda: call(kernels.compiled_backend), args.repeats)
        slow = _median_time(lambda: call(kernels.python_backend), repeats)
        print(f"{name:28s} {fast:13.5f} {slow:11.5f} {slow / fast:9.1f}x")


if __name__ == "__main__":
    main()
