"""Distance-based energy loss and the coordinate baselines it is compared to.

All losses return a :class:`LossReport` with the scalar value and the exact
gradient with respect to the prediction. The ``batch_*`` variants take
``(B, n, d)`` stacks and return the batch-mean loss, which is what the
trainers consume.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import GeometryError, as_cloud, kabsch_rotation, pairwise_distances

NORM_EPS = 1e-12
DEFAULT_FLOOR = 1e-3
DEFAULT_DECAY = 1.0
# dense pair loss refuses clouds whose pair count exceeds this (n ~ 1e4)
MAX_DENSE_PAIRS = 50_000_000


class LossInputError(ValueError):
    pass


class DenseLossMemoryError(MemoryError):
    pass


@dataclass(frozen=True)
class CoefficientScheme:
    """Pair weights ``k_ij`` computed from target distances.

    ``kind`` is one of ``constant``, ``inverse``, ``inverse_squared`` and
    ``exponential``; ``param`` is the constant ``k``, the distance floor, or
    the decay length.
    """

    kind: str = "exponential"
    param: float | None = None

    _CODES = {"constant": 0, "inverse": 1, "inverse_squared": 2, "exponential": 3}
    _DEFAULTS = {"constant": 1.0, "inverse": DEFAULT_FLOOR,
                 "inverse_squared": DEFAULT_FLOOR, "exponential": DEFAULT_DECAY}

    def __post_init__(self):
        if self.kind not in self._CODES:
            raise ValueError(f"unknown coefficient scheme {self.kind!r}")
        if self.param is None:
            object.__setattr__(self, "param", self._DEFAULTS[self.kind])
        if not self.param > 0:
            raise ValueError("coefficient parameter must be strictly positive")

    @classmethod
    def constant(cls, k: float = 1.0):
        return cls("constant", k)

    @classmethod
    def inverse(cls, floor: float = DEFAULT_FLOOR):
        return cls("inverse", floor)

    @classmethod
    def inverse_squared(cls, floor: float = DEFAULT_FLOOR):
        return cls("inverse_squared", floor)

    @classmethod
    def exponential(cls, decay: float = DEFAULT_DECAY):
        return cls("exponential", decay)

    @classmethod
    def parse(cls, text: str) -> "CoefficientScheme":
        """``"exponential"`` or ``"exponential:2.0"``."""
        kind, _, param = text.partition(":")
        return cls(kind.strip(), float(param) if param else None)

    def __str__(self):
        return f"{self.kind}:{self.param!r}"

    @property
    def code(self) -> int:
        return self._CODES[self.kind]

    def weight(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "constant":
            return np.full_like(r, self.param)
        if self.kind == "inverse":
            return 1.0 / np.maximum(r, self.param)
        if self.kind == "inverse_squared":
            return 1.0 / np.maximum(r, self.param) ** 2
        return np.exp(-r / self.param)


@dataclass(frozen=True)
class LossReport:
    value: float
    grad: np.ndarray


def coefficients(scheme: CoefficientScheme, target) -> np.ndarray:
    k = scheme.weight(pairwise_distances(target))
    np.fill_diagonal(k, 0.0)
    return k


def _pair_inputs(pred, target, min_n=1):
    p = as_cloud(pred)
    t = as_cloud(target)
    if p.shape != t.shape:
        raise LossInputError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.shape[0] < min_n:
        raise LossInputError(f"need at least {min_n} points, got {p.shape[0]}")
    return p, t


def _batch_inputs(pred, target):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.ndim != 3 or p.shape != t.shape:
        raise LossInputError(f"expected matching (B, n, d) stacks, got {p.shape} and {t.shape}")
    return p, t


def batch_energy_loss(pred, target, scheme: CoefficientScheme) -> LossReport:
    """Batch mean of the pair-averaged energy loss over all ``i<j`` pairs."""
    p, t = _batch_inputs(pred, target)
    b, n, _ = p.shape
    if n < 2:
        raise LossInputError("energy loss needs at least two points")
    n_pairs = n * (n - 1) // 2
    if n_pairs > MAX_DENSE_PAIRS:
        raise DenseLossMemoryError(
            f"{n} points give {n_pairs} pairs (limit {MAX_DENSE_PAIRS}); use the sparse loss")
    values, grad = kernels.pair_energy(p, t, scheme.code, float(scheme.param), NORM_EPS)
    scale = 1.0 / (n_pairs * b)
    return LossReport(float(values.sum() * scale), grad * scale)


def energy_loss(pred, target, scheme: CoefficientScheme) -> LossReport:
    """``(1/P) sum_{i<j} k_ij(target) (|t_i - t_j| - |p_i - p_j|)^2``, P pairs."""
    p, t = _pair_inputs(pred, target, min_n=2)
    rep = batch_energy_loss(p[None], t[None], scheme)
    return LossReport(rep.value, rep.grad[0])


def validate_edges(edges, n: int) -> np.ndarray:
    """Edge index array ``(m, 2)``; accepts anything with an ``edges`` attribute."""
    if hasattr(edges, "edges"):
        edges = edges.edges
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.shape[0] < 1:
        raise LossInputError("edge set is empty")
    if e.min() < 0 or e.max() >= n:
        raise LossInputError(f"edge index out of range for {n} points")
    return e


def batch_sparse_energy_loss(pred, target, scheme: CoefficientScheme, edges) -> LossReport:
    p, t = _batch_inputs(pred, target)
    b, n, _ = p.shape
    e = validate_edges(edges, n)
    values, grad = kernels.edge_energy(p, t, e, scheme.code, float(scheme.param), NORM_EPS)
    scale = 1.0 / (e.shape[0] * b)
    return LossReport(float(values.sum() * scale), grad * scale)


def sparse_energy_loss(pred, target, scheme: CoefficientScheme, edges) -> LossReport:
    """Energy loss restricted to ``edges`` (unordered pairs), averaged per edge."""
    p, t = _pair_inputs(pred, target)
    rep = batch_sparse_energy_loss(p[None], t[None], scheme, edges)
    return LossReport(rep.value, rep.grad[0])


def batch_mse_loss(pred, target) -> LossReport:
    p, t = _batch_inputs(pred, target)
    diff = p - t
    scale = 1.0 / diff.size
    return LossReport(float(np.sum(diff * diff) * scale), 2.0 * scale * diff)


def mse_loss(pred, target) -> LossReport:
    p, t = _pair_inputs(pred, target)
    rep = batch_mse_loss(p[None], t[None])
    return LossReport(rep.value, rep.grad[0])


def batch_kabsch_mse_loss(pred, target) -> LossReport:
    """MSE after optimally aligning each prediction onto its target.

    The alignment (rotation and centroid shift) is held fixed when
    differentiating; at the Kabsch optimum this is the exact gradient.
    """
    p, t = _batch_inputs(pred, target)
    pc = p.mean(axis=1, keepdims=True)
    tc = t.mean(axis=1, keepdims=True)
    p0 = p - pc
    t0 = t - tc
    rot = kabsch_rotation(p0, t0)
    aligned = p0 @ np.swapaxes(rot, -1, -2) + tc
    diff = aligned - t
    scale = 1.0 / diff.size
    value = float(np.sum(diff * diff) * scale)
    grad = 2.0 * scale * (diff @ rot)
    return LossReport(value, grad)


def kabsch_mse_loss(pred, target) -> LossReport:
    p, t = _pair_inputs(pred, target)
    rep = batch_kabsch_mse_loss(p[None], t[None])
    return LossReport(rep.value, rep.grad[0])


def lj_stiffness(epsilon: float, r: float) -> float:
    """Second derivative of the 12-6 Lennard-Jones pair energy at its minimum ``r``."""
    return 72.0 * epsilon / r ** 2


def morse_stiffness(depth: float, width: float) -> float:
    """Second derivative of the Morse pair energy at its minimum."""
    return 2.0 * depth * width ** 2


__all__ = [
    "CoefficientScheme", "LossReport", "coefficients", "energy_loss", "sparse_energy_loss",
    "mse_loss", "kabsch_mse_loss", "batch_energy_loss", "batch_sparse_energy_loss",
    "batch_mse_loss", "batch_kabsch_mse_loss", "GeometryError", "LossInputError",
    "DenseLossMemoryError", "lj_stiffness", "morse_stiffness",
]
