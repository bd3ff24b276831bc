"""Regular-polygon regression: data, the quality metric and the trainer.

A model maps a radius to the ``N`` vertices of a regular polygon. Targets
are rotated by a random angle, so a coordinate loss sees conflicting targets
for the same input while distance-based losses do not.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..autodiff import Tensor, backward, custom_scalar
from ..energy_loss import (batch_energy_loss, batch_kabsch_mse_loss, batch_mse_loss,
                           batch_sparse_energy_loss)
from ..nn import AdamState, MlpConfig, adam_step, init_params, mlp_forward
from ..rigidity import edge_pool
from .config import TrainConfig
from .manifest import RunManifest

RADIUS_RANGE = (0.3, 5.0)
QUALITY_FLOOR = 1e-12
SHAPES_HEADER = ["epoch", "split", "mean_quality", "sigma_dangle", "sigma_radius", "loss_value"]


class ShapeConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ShapeDataset:
    radius: np.ndarray    # (size,)
    rotation: np.ndarray  # (size,)
    target: np.ndarray    # (size, N, 2)

    def __len__(self):
        return self.radius.shape[0]

    def to_arrays(self) -> dict:
        return {"radius": self.radius, "rotation": self.rotation, "target": self.target}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "ShapeDataset":
        return cls(arrays["radius"], arrays["rotation"], arrays["target"])


def polygon(n_vertices: int, radius, rotation) -> np.ndarray:
    """Vertices at ``radius * (cos, sin)(2 pi k / N + rotation)``, batched over inputs."""
    radius = np.asarray(radius, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    angles = 2.0 * np.pi * np.arange(n_vertices) / n_vertices + rotation[..., None]
    return radius[..., None, None] * np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def gen_shape_dataset(n_vertices: int, theta_aug: float, size: int, seed) -> ShapeDataset:
    if n_vertices < 3:
        raise ShapeConfigError("need at least 3 vertices")
    if not 0 <= theta_aug <= math.pi:
        raise ShapeConfigError("theta_aug must lie in [0, pi]")
    if size < 1:
        raise ShapeConfigError("dataset size must be positive")
    rng = np.random.default_rng(seed)
    radius = rng.uniform(*RADIUS_RANGE, size=size)
    if theta_aug == 0:
        rotation = np.zeros(size)
    else:
        rotation = rng.uniform(-theta_aug, theta_aug, size=size)
    return ShapeDataset(radius, rotation, polygon(n_vertices, radius, rotation))


@dataclass(frozen=True)
class ShapeQuality:
    quality: np.ndarray
    sigma_dangle: np.ndarray
    sigma_radius: np.ndarray
    degenerate: np.ndarray


def batch_shape_quality(points) -> ShapeQuality:
    """Quality ``-ln(sigma_gap / 2 pi + sigma_r / mean_r)`` of each ``(N, 2)`` shape.

    Points are centred and sorted by polar angle; the gaps include the
    wrap-around gap. All-coincident shapes get quality 0 and a flag.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[-1] != 2 or pts.shape[1] < 3:
        raise ShapeConfigError(f"expected (B, N>=3, 2) points, got {pts.shape}")
    centred = pts - pts.mean(axis=1, keepdims=True)
    radii = np.hypot(centred[..., 0], centred[..., 1])
    angles = np.sort(np.arctan2(centred[..., 1], centred[..., 0]), axis=1)
    gaps = np.diff(angles, axis=1, append=angles[:, :1] + 2.0 * np.pi)
    sigma_dangle = gaps.std(axis=1)
    sigma_radius = radii.std(axis=1)
    mean_r = radii.mean(axis=1)
    degenerate = ~(mean_r > 0)
    safe_r = np.where(degenerate, 1.0, mean_r)
    arg = np.maximum(sigma_dangle / (2.0 * np.pi) + sigma_radius / safe_r, QUALITY_FLOOR)
    quality = np.where(degenerate, 0.0, -np.log(arg))
    return ShapeQuality(quality, sigma_dangle, sigma_radius, degenerate)


def shape_quality(points) -> float:
    return float(batch_shape_quality(np.asarray(points)[None]).quality[0])


def _loss_fn(cfg: TrainConfig, pool, rng):
    scheme = cfg.scheme()

    def loss(pred, target):
        if cfg.loss == "mse":
            return batch_mse_loss(pred, target)
        if cfg.loss == "kabsch":
            return batch_kabsch_mse_loss(pred, target)
        if cfg.loss == "energy":
            return batch_energy_loss(pred, target, scheme)
        edges = pool[int(rng.integers(len(pool)))] if rng is not None else pool[0]
        return batch_sparse_energy_loss(pred, target, scheme, edges)
    return loss


def _model(cfg: TrainConfig) -> MlpConfig:
    return MlpConfig(1, cfg.hidden_dim, 2 * cfg.n_vertices)


def predict_shapes(cfg: TrainConfig, params, radius) -> np.ndarray:
    out = mlp_forward(_model(cfg), params, np.asarray(radius, dtype=np.float64)[:, None])
    return out.data.reshape(-1, cfg.n_vertices, 2)


def _summary(epoch, split, pts, loss_value):
    q = batch_shape_quality(pts)
    return {"epoch": epoch, "split": split, "mean_quality": float(q.quality.mean()),
            "sigma_dangle": float(q.sigma_dangle.mean()),
            "sigma_radius": float(q.sigma_radius.mean()), "loss_value": float(loss_value)}


@dataclass
class TrainResult:
    manifest: RunManifest
    rows: list
    params: list


def train_shape(cfg: TrainConfig) -> TrainResult:
    """Adam on minibatches; per epoch, log train loss and quality on the test set."""
    if cfg.task != "shapes":
        raise ShapeConfigError("train_shape needs a shapes config")
    start = time.perf_counter()
    data_ss, test_ss, init_ss, order_ss, edge_ss = np.random.SeedSequence(cfg.seed).spawn(5)
    train = gen_shape_dataset(cfg.n_vertices, cfg.theta_aug, cfg.n_train, data_ss)
    test = gen_shape_dataset(cfg.n_vertices, cfg.theta_aug, cfg.n_test, test_ss)
    order_rng = np.random.default_rng(order_ss)
    pool = edge_pool(cfg.n_vertices, 2, cfg.pool_size, seed=edge_ss) if cfg.loss == "sparse-energy" else None
    loss = _loss_fn(cfg, pool, order_rng)
    eval_loss = _loss_fn(cfg, pool, None)
    model = _model(cfg)
    params = init_params(model, init_ss)
    state = AdamState(lr=cfg.lr)
    n = cfg.n_vertices
    rows = []
    for epoch in range(1, cfg.epochs + 1):
        perm = order_rng.permutation(len(train))
        total, count = 0.0, 0
        for lo in range(0, len(train), cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            leaves = [Tensor(p, requires_grad=True) for p in params]
            out = mlp_forward(model, leaves, train.radius[idx, None]).reshape(len(idx), n, 2)
            rep = loss(out.data, train.target[idx])
            backward(custom_scalar(out, rep.value, rep.grad))
            params, state = adam_step(state, params, [leaf.grad for leaf in leaves])
            total += rep.value * len(idx)
            count += len(idx)
        train_pts = predict_shapes(cfg, params, train.radius[:cfg.n_test])
        rows.append(_summary(epoch, "train", train_pts, total / count))
        test_pts = predict_shapes(cfg, params, test.radius)
        rows.append(_summary(epoch, "test", test_pts, eval_loss(test_pts, test.target).value))
    final = rows[-1]
    metrics = {"test_quality": final["mean_quality"], "test_loss": final["loss_value"]}
    manifest = RunManifest("shapes-train", cfg.seed, cfg.to_mapping(), __version__,
                           time.perf_counter() - start, metrics)
    return TrainResult(manifest, rows, params)


def evaluate_shapes(cfg: TrainConfig, params, dataset: ShapeDataset) -> dict:
    """Quality and loss of a trained model on ``dataset`` (sparse loss uses one seeded edge set)."""
    pool = edge_pool(cfg.n_vertices, 2, 1, seed=cfg.seed) if cfg.loss == "sparse-energy" else None
    pts = predict_shapes(cfg, params, dataset.radius)
    return _summary(0, "eval", pts, _loss_fn(cfg, pool, None)(pts, dataset.target).value)
