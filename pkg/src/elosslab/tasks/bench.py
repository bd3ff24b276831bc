"""Wall-time of loss evaluation (value and gradient) as the cloud grows."""
from __future__ import annotations

import time

import numpy as np

from ..energy_loss import (CoefficientScheme, DenseLossMemoryError, energy_loss, kabsch_mse_loss,
                           mse_loss, sparse_energy_loss)
from ..rigidity import pool_degree, random_k_regular

BENCH_HEADER = ["loss", "n", "median_seconds", "iqr_seconds", "repeats", "status"]
BENCH_LOSSES = ("mse", "energy", "sparse-energy", "kabsch")
DEFAULT_SIZES = (100, 300, 1000, 3000, 10_000, 30_000, 100_000)


def _time(fn, repeats):
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return np.array(times)


def benchmark_losses(sizes=DEFAULT_SIZES, repeats: int = 5, d: int = 2, seed: int = 0,
                     losses=BENCH_LOSSES, scheme: CoefficientScheme | None = None) -> list[dict]:
    """One row per ``(loss, n)`` with median and interquartile range in seconds.

    The dense energy loss is recorded with status ``memory-guard`` when it
    refuses the size.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    scheme = scheme or CoefficientScheme.exponential()
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        target = rng.standard_normal((n, d))
        pred = target + 0.1 * rng.standard_normal((n, d))
        edges = random_k_regular(n, pool_degree(n, d), rng)
        calls = {
            "mse": lambda: mse_loss(pred, target),
            "energy": lambda: energy_loss(pred, target, scheme),
            "sparse-energy": lambda: sparse_energy_loss(pred, target, scheme, edges),
            "kabsch": lambda: kabsch_mse_loss(pred, target),
        }
        for name in losses:
            try:
                t = _time(calls[name], repeats)
            except DenseLossMemoryError:
                rows.append({"loss": name, "n": n, "median_seconds": float("nan"),
                             "iqr_seconds": float("nan"), "repeats": repeats, "status": "memory-guard"})
                continue
            q1, med, q3 = np.percentile(t, [25, 50, 75])
            rows.append({"loss": name, "n": n, "median_seconds": float(med),
                         "iqr_seconds": float(q3 - q1), "repeats": repeats, "status": "ok"})
    return rows


def scaling_exponent(rows, loss: str = "sparse-energy") -> float:
    """Least-squares slope of log(median time) against log(n)."""
    pts = [(r["n"], r["median_seconds"]) for r in rows if r["loss"] == loss and r["status"] == "ok"]
    if len(pts) < 2:
        raise ValueError(f"need timings at two or more sizes for {loss}")
    n, t = np.array(pts, dtype=np.float64).T
    return float(np.polyfit(np.log(n), np.log(t), 1)[0])
