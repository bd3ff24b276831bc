"""Point clouds, rigid transforms, distance matrices and Kabsch alignment.

Everything is double precision. Point clouds are plain ``(n, d)`` float64
arrays; :func:`as_cloud` validates them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-12


class GeometryError(ValueError):
    pass


def as_cloud(coords, d: int | None = None) -> np.ndarray:
    """Return ``coords`` as a validated ``(n, d)`` float64 array."""
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise GeometryError(f"point cloud must be (n, d) with n, d >= 1, got {x.shape}")
    if d is not None and x.shape[1] != d:
        raise GeometryError(f"expected dimension {d}, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("point cloud has non-finite entries")
    return x


@dataclass(frozen=True)
class RigidTransform:
    """``x -> linear @ x + translation``; ``linear`` is orthogonal (E(d))."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if lin.ndim != 2 or lin.shape[0] != lin.shape[1] or lin.shape[0] != t.shape[0]:
            raise GeometryError("linear must be (d, d) and translation (d,)")
        if np.max(np.abs(lin.T @ lin - np.eye(lin.shape[0]))) > ORTHO_TOL * 10 * lin.shape[0]:
            raise GeometryError("linear part is not orthogonal")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", t)

    @property
    def d(self) -> int:
        return self.linear.shape[0]

    @classmethod
    def identity(cls, d: int) -> "RigidTransform":
        return cls(np.eye(d), np.zeros(d))

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """Return ``self ∘ inner`` (apply ``inner`` first)."""
        return RigidTransform(self.linear @ inner.linear,
                              self.linear @ inner.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.linear.T, -self.linear.T @ self.translation)


def apply_transform(cloud, g: RigidTransform) -> np.ndarray:
    x = as_cloud(cloud)
    if x.shape[1] != g.d:
        raise GeometryError(f"transform is {g.d}-dimensional, cloud is {x.shape[1]}-dimensional")
    return x @ g.linear.T + g.translation


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform element of O(d): QR of a Gaussian matrix, sign-corrected."""
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q


def random_transform(d: int, max_translation: float = 1.0, seed=None) -> RigidTransform:
    if d not in (1, 2, 3):
        raise GeometryError(f"unsupported dimension {d}")
    rng = np.random.default_rng(seed)
    q = random_orthogonal(d, rng)
    t = rng.uniform(-max_translation, max_translation, size=d)
    return RigidTransform(q, t)


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def pairwise_distances(cloud) -> np.ndarray:
    x = as_cloud(cloud)
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, 0.0)
    return dist


def centered_rmsd(pred, target) -> float:
    """RMSD after removing centroids, no rotation."""
    p = as_cloud(pred)
    q = as_cloud(target)
    p = p - p.mean(axis=0)
    q = q - q.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum((p - q) ** 2, axis=1))))


def kabsch_rotation(p_centered: np.ndarray, q_centered: np.ndarray) -> np.ndarray:
    """Proper rotation ``R`` minimising ``sum ||R p_i - q_i||^2``.

    Works on a batch: inputs may be ``(..., n, d)``.
    """
    h = np.swapaxes(p_centered, -1, -2) @ q_centered
    u, _, vt = np.linalg.svd(h)
    v = np.swapaxes(vt, -1, -2)
    ut = np.swapaxes(u, -1, -2)
    sign = np.sign(np.linalg.det(v @ ut))
    sign = np.where(sign == 0, 1.0, sign)
    d = p_centered.shape[-1]
    corr = np.ones(sign.shape + (d,))
    corr[..., -1] = sign
    return (v * corr[..., None, :]) @ ut


def kabsch_align(pred, target) -> tuple[RigidTransform, float]:
    """Best proper rigid motion taking ``pred`` onto ``target``.

    Returns the transform and the minimised RMSD. Coincident inputs give the
    identity rotation (the SVD of a zero cross-covariance is the identity).
    """
    p = as_cloud(pred)
    q = as_cloud(target)
    if p.shape != q.shape:
        raise GeometryError(f"shape mismatch {p.shape} vs {q.shape}")
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    p0, q0 = p - pc, q - qc
    if not np.any(p0) or not np.any(q0):
        rot = np.eye(p.shape[1])
    else:
        rot = kabsch_rotation(p0, q0)
    g = RigidTransform(rot, qc - rot @ pc)
    aligned = apply_transform(p, g)
    rmsd = float(np.sqrt(np.mean(np.sum((aligned - q) ** 2, axis=1))))
    return g, rmsd


def rigid_motion_generators(cloud) -> np.ndarray:
    """Infinitesimal rigid motions at ``cloud`` as rows of length ``n*d``.

    ``d`` translations followed by ``d(d-1)/2`` rotations, one per axis pair.
    """
    x = as_cloud(cloud)
    n, d = x.shape
    rows = []
    for a in range(d):
        v = np.zeros((n, d))
        v[:, a] = 1.0
        rows.append(v.ravel())
    for a in range(d):
        for b in range(a + 1, d):
            v = np.zeros((n, d))
            v[:, a] = x[:, b]
            v[:, b] = -x[:, a]
            rows.append(v.ravel())
    return np.array(rows)
