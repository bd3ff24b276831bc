"""Command runners shared by the CLI and manifest replay.

Each runner takes a flat ``{key: str}`` config and an output directory,
writes its artifacts there and returns the metrics recorded in the
manifest. Replaying a manifest calls the same runner with the saved config.
"""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..rigidity import EdgeSet, edge_pool, is_globally_rigid, is_rigid
from ..score_lab import SCORE_LAB_HEADER, ToyDensity, ToyDiffusionConfig, bias_variance_experiment
from .bench import BENCH_HEADER, benchmark_losses, scaling_exponent
from .config import ConfigError, TrainConfig
from .io import read_arrays, write_arrays, write_csv
from .manifest import RunManifest
from .shapes import SHAPES_HEADER, ShapeDataset, evaluate_shapes, gen_shape_dataset, train_shape
from .spins import SPINS_HEADER, SpinDataset, evaluate_spins, gen_spin_dataset, train_spin
from .svg import line_plot

CHECKPOINT_NAME = "checkpoint.bin"


def _get(config, key, kind, default=None):
    if key not in config:
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        return kind(config[key])
    except ValueError:
        raise ConfigError(f"bad value for {key}: {config[key]!r}") from None


def _seed(config) -> int:
    if "seed" not in config:
        raise ConfigError("an explicit seed is required (--seed or 'seed' in the config)")
    seed = _get(config, "seed", int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _train_config(config, task) -> TrainConfig:
    # "svg" is an output switch, not a hyperparameter
    return TrainConfig.from_mapping({k: v for k, v in config.items() if k != "svg"}, task=task)


def _save_params(path, seed, params):
    write_arrays(path, seed, {f"param_{i:02d}": p for i, p in enumerate(params)})


def _load_params(path):
    _, arrays = read_arrays(path)
    return [arrays[k] for k in sorted(arrays)]


def shapes_gen(config, out: Path) -> dict:
    seed = _seed(config)
    data = gen_shape_dataset(_get(config, "n_vertices", int, 5), _get(config, "theta_aug", float, math.pi),
                             _get(config, "size", int, 10_000), seed)
    write_arrays(out / "shapes.bin", seed, data.to_arrays())
    return {"size": len(data)}


def _curve_plot(rows, key, path, title):
    series = {}
    for split in ("train", "test"):
        pts = [(r["epoch"], r[key]) for r in rows if r["split"] == split]
        if pts:
            series[split] = tuple(zip(*pts))
    line_plot(series, path, title=title, xlabel="epoch", ylabel=key)


def shapes_train(config, out: Path) -> dict:
    cfg = _train_config(config, "shapes")
    config.update(cfg.to_mapping())
    res = train_shape(cfg)
    write_csv(out / "metrics.csv", SHAPES_HEADER, res.rows)
    _save_params(out / CHECKPOINT_NAME, cfg.seed, res.params)
    if config.get("svg", "0") == "1":
        _curve_plot(res.rows, "mean_quality", out / "quality.svg", f"shape quality ({cfg.loss})")
    return res.manifest.metrics


def shapes_eval(config, out: Path) -> dict:
    run = Path(config["run"])
    cfg = _train_config(RunManifest.load(run / "manifest.txt").config, "shapes")
    _, arrays = read_arrays(config["data"])
    row = evaluate_shapes(cfg, _load_params(run / CHECKPOINT_NAME), ShapeDataset.from_arrays(arrays))
    write_csv(out / "eval.csv", SHAPES_HEADER, [row])
    return {"mean_quality": row["mean_quality"]}


def spins_gen(config, out: Path) -> dict:
    seed = _seed(config)
    data = gen_spin_dataset(_get(config, "L", int, 4), _get(config, "size", int, 2000), seed)
    write_arrays(out / "spins.bin", seed, data.to_arrays())
    return {"size": len(data), "mean_ground_energy": float(data.energy.mean())}


def spins_train(config, out: Path) -> dict:
    cfg = _train_config(config, "spins")
    config.update(cfg.to_mapping())
    res = train_spin(cfg)
    write_csv(out / "metrics.csv", SPINS_HEADER, res.rows)
    _save_params(out / CHECKPOINT_NAME, cfg.seed, res.params)
    if config.get("svg", "0") == "1":
        _curve_plot(res.rows, "mean_pred_energy", out / "energy.svg", f"predicted energy ({cfg.loss})")
    return res.manifest.metrics


def spins_eval(config, out: Path) -> dict:
    run = Path(config["run"])
    cfg = _train_config(RunManifest.load(run / "manifest.txt").config, "spins")
    _, arrays = read_arrays(config["data"])
    row = evaluate_spins(cfg, _load_params(run / CHECKPOINT_NAME), SpinDataset.from_arrays(arrays),
                         split="eval")
    write_csv(out / "eval.csv", SPINS_HEADER, [row])
    return {"mean_pred_energy": row["mean_pred_energy"]}


def rigidity_sample(config, out: Path) -> dict:
    seed = _seed(config)
    n, d = _get(config, "n", int, 50), _get(config, "d", int, 2)
    pool = edge_pool(n, d, _get(config, "pool_size", int, 16), seed=seed)
    write_arrays(out / "edges.bin", seed, {f"edges_{i:04d}": e.edges.astype(np.float64)
                                            for i, e in enumerate(pool)} | {"n": np.array([n])})
    return {"pool_size": len(pool), "edges_per_set": len(pool[0])}


def rigidity_check(config, out: Path) -> dict:
    seed = _seed(config)
    d = _get(config, "d", int, 2)
    _, arrays = read_arrays(config["edges"])
    n = int(arrays.pop("n")[0])
    rows = []
    children = np.random.SeedSequence(seed).spawn(len(arrays))
    for (name, e), child in zip(sorted(arrays.items()), children):
        es = EdgeSet(n, e.astype(np.int64))
        rigid_seed, global_seed = child.spawn(2)
        rows.append({"name": name, "n": n, "edges": len(es), "rigid": int(is_rigid(es, d, rigid_seed)),
                     "globally_rigid": int(is_globally_rigid(es, d, global_seed))})
    write_csv(out / "rigidity.csv", ["name", "n", "edges", "rigid", "globally_rigid"], rows)
    return {"fraction_globally_rigid": sum(r["globally_rigid"] for r in rows) / max(len(rows), 1)}


def score_lab_run(config, out: Path) -> dict:
    seed = _seed(config)
    density = ToyDensity(config.get("density", "pair-distance-gaussian"),
                         _get(config, "s", float, 0.25), _get(config, "r0", float, 1.0))
    x_t = tuple(float(v) for v in config.get("x_t", "-0.5,0.55").split(","))
    cfg = ToyDiffusionConfig(sigma_t=_get(config, "sigma_t", float, 0.05),
                             mc_samples=_get(config, "mc_samples", int, 64),
                             trials=_get(config, "trials", int, 50),
                             batches=_get(config, "batches", int, 200), seed=seed, x_t=x_t,
                             density=density)
    rep = bias_variance_experiment(cfg)
    write_csv(out / "score_lab.csv", SCORE_LAB_HEADER, rep.rows)
    return {"bias_norm_dist": rep.bias_norm_dist, "se_dist": rep.se_dist,
            "bias_norm_mse": rep.bias_norm_mse, "se_mse": rep.se_mse,
            "var_trace_dist": rep.var_trace_dist, "var_trace_mse": rep.var_trace_mse,
            "var_fraction_ok": rep.var_fraction_ok}


def bench_losses(config, out: Path) -> dict:
    sizes = [int(v) for v in config.get("sizes", "100,300,1000,3000,10000,30000,100000").split(",")]
    rows = benchmark_losses(sizes, _get(config, "repeats", int, 5), _get(config, "d", int, 2),
                            _get(config, "seed", int, 0))
    write_csv(out / "bench.csv", BENCH_HEADER, rows)
    metrics = {}
    try:
        metrics["sparse_exponent"] = scaling_exponent(rows)
    except ValueError:
        pass
    return metrics


RUNNERS = {
    "shapes-gen": shapes_gen, "shapes-train": shapes_train, "shapes-eval": shapes_eval,
    "spins-gen": spins_gen, "spins-train": spins_train, "spins-eval": spins_eval,
    "rigidity-sample": rigidity_sample, "rigidity-check": rigidity_check,
    "score-lab-run": score_lab_run, "bench-losses": bench_losses,
}


def run_command(command: str, config: dict, out) -> RunManifest:
    """Run ``command`` with string ``config``, writing outputs and a manifest under ``out``."""
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    config = dict(config)
    metrics = RUNNERS[command](config, out)
    seed = int(config.get("seed", 0))
    manifest = RunManifest(command, seed, config, __version__, time.perf_counter() - start, metrics)
    manifest.save(out)
    return manifest


def replay(manifest_path, out) -> RunManifest:
    m = RunManifest.load(manifest_path)
    return run_command(m.command, m.config, out)
