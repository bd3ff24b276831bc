"""Small-noise behaviour of distance-based noise prediction, checked numerically.

The toy problem is two particles on a line. The noised density and its
score are computed by tensor-grid quadrature; Monte-Carlo posterior samples
are drawn from the same discretised posterior so the sample mean is an
unbiased estimate of the quadrature mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_cloud

PROJECTOR_RTOL = 1e-10
JACOBIAN_EPS = 1e-12
GRID_NODES = 801
RICHARDSON_TOL = 1e-4
BOX_WIDTHS = 8.0

SCORE_LAB_HEADER = ["trial", "bias_dist", "bias_mse", "var_dist", "var_mse", "sigma_t", "mc_samples"]


class ScoreLabError(ValueError):
    pass


class QuadratureError(ScoreLabError):
    pass


def distance_jacobian(x) -> np.ndarray:
    """Jacobian of the pairwise distances, ``(#pairs, n*d)`` with pairs ``i<j``."""
    x = as_cloud(x)
    n, d = x.shape
    ii, jj = np.triu_indices(n, k=1)
    diff = x[ii] - x[jj]
    r = np.sqrt(np.sum(diff * diff, axis=1) + JACOBIAN_EPS ** 2)
    unit = diff / r[:, None]
    jac = np.zeros((ii.size, n, d))
    rows = np.arange(ii.size)
    jac[rows, ii] = unit
    jac[rows, jj] = -unit
    return jac.reshape(ii.size, n * d)


def projector_onto_row_space(jac) -> np.ndarray:
    """Orthogonal projector onto the row space of ``jac`` (SVD, cutoff 1e-10)."""
    jac = np.asarray(jac, dtype=np.float64)
    if not np.all(np.isfinite(jac)):
        raise ScoreLabError("Jacobian has non-finite entries")
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((jac.shape[1], jac.shape[1]))
    v = vt[s > s[0] * PROJECTOR_RTOL]
    return v.T @ v


@dataclass(frozen=True)
class ToyDensity:
    """Unnormalised two-particle density on a line.

    ``pair-distance-gaussian`` weights ``exp(-(|x1 - x2| - r0)^2 / (2 s^2))``
    and is translation invariant; ``isotropic-gaussian`` is ``N(0, s^2 I)``.
    """

    kind: str = "pair-distance-gaussian"
    s: float = 0.25
    r0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("pair-distance-gaussian", "isotropic-gaussian"):
            raise ScoreLabError(f"unknown density kind {self.kind!r}")
        if not self.s > 0:
            raise ScoreLabError("width must be positive")

    def log_density(self, x1, x2):
        if self.kind == "isotropic-gaussian":
            return -(x1 * x1 + x2 * x2) / (2.0 * self.s ** 2)
        return -(np.abs(x1 - x2) - self.r0) ** 2 / (2.0 * self.s ** 2)

    def half_width(self) -> float:
        r0 = abs(self.r0) if self.kind == "pair-distance-gaussian" else 0.0
        return BOX_WIDTHS * self.s + r0


@dataclass(frozen=True)
class ToyDiffusionConfig:
    sigma_t: float = 0.05
    alpha_t: float | None = None
    n_particles: int = 2
    d: int = 1
    mc_samples: int = 64
    trials: int = 50
    batches: int = 200
    seed: int = 0
    x_t: tuple = (-0.5, 0.55)
    density: ToyDensity = field(default_factory=ToyDensity)

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ScoreLabError("sigma_t must be positive")
        if self.alpha_t is None:
            if self.sigma_t >= 1:
                raise ScoreLabError("variance-preserving alpha_t needs sigma_t < 1")
            object.__setattr__(self, "alpha_t", math.sqrt(1.0 - self.sigma_t ** 2))
        if not self.alpha_t > 0:
            raise ScoreLabError("alpha_t must be positive")
        if self.mc_samples < 2 or self.trials < 2 or self.batches < 1:
            raise ScoreLabError("need mc_samples >= 2, trials >= 2, batches >= 1")
        if (self.n_particles, self.d) != (2, 1):
            raise ScoreLabError("quadrature is implemented for 2 particles in 1D only")


class PosteriorGrid:
    """Discretised posterior ``p(x | x_t)`` on a trapezoid tensor grid."""

    def __init__(self, density: ToyDensity, x_t, cfg: ToyDiffusionConfig, nodes: int = GRID_NODES):
        x_t = np.asarray(x_t, dtype=np.float64).ravel()
        if x_t.shape != (2,):
            raise ScoreLabError("x_t must hold two 1D particle positions")
        a, sig = cfg.alpha_t, cfg.sigma_t
        half = density.half_width()
        # isotropic density is anchored at 0; pair density follows x_t along the diagonal
        centre = 0.0 if density.kind == "isotropic-gaussian" else float(np.mean(x_t)) / a
        axis = np.linspace(centre - half, centre + half, nodes)
        trap = np.full(nodes, axis[1] - axis[0])
        trap[[0, -1]] *= 0.5
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        logw = (density.log_density(g1, g2)
                - ((x_t[0] - a * g1) ** 2 + (x_t[1] - a * g2) ** 2) / (2.0 * sig ** 2))
        w = np.exp(logw - logw.max()) * np.outer(trap, trap)
        total = w.sum()
        if not total > 0:
            raise QuadratureError("posterior weight vanished on the grid")
        self.x_t = x_t
        self.cfg = cfg
        self.points = np.stack([g1.ravel(), g2.ravel()], axis=1)
        self.prob = w.ravel() / total
        self._cdf = None

    def mean(self) -> np.ndarray:
        return self.prob @ self.points

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if size < 1:
            raise ScoreLabError("empty sample set")
        if self._cdf is None:
            self._cdf = np.cumsum(self.prob)
        idx = np.searchsorted(self._cdf, rng.random(size) * self._cdf[-1], side="right")
        return self.points[np.minimum(idx, self.points.shape[0] - 1)]

    def noise_prediction(self, x_mean) -> np.ndarray:
        """``(x_t - alpha * E[x]) / sigma``; equals ``-sigma * grad log p(x_t)``."""
        return (self.x_t - self.cfg.alpha_t * np.asarray(x_mean)) / self.cfg.sigma_t


def quadrature_score(density: ToyDensity, x_t, cfg: ToyDiffusionConfig,
                     nodes: int = GRID_NODES, check: bool = True) -> np.ndarray:
    """Optimal noise prediction ``-sigma_t * grad log p(x_t)`` by quadrature.

    With ``check`` the result is compared against a coarser grid and a
    :class:`QuadratureError` is raised if they differ by more than 1e-4.
    """
    fine = PosteriorGrid(density, x_t, cfg, nodes)
    eps = fine.noise_prediction(fine.mean())
    if check:
        coarse_nodes = (nodes - 1) // 2 + 1
        coarse = PosteriorGrid(density, x_t, cfg, coarse_nodes)
        gap = np.max(np.abs(coarse.noise_prediction(coarse.mean()) - eps))
        if gap > RICHARDSON_TOL:
            raise QuadratureError(f"grid too coarse: {coarse_nodes} vs {nodes} nodes differ by {gap:.3e}")
    return eps


def isotropic_closed_form(s: float, x_t, cfg: ToyDiffusionConfig) -> np.ndarray:
    """Noise prediction for ``N(0, s^2 I)`` data: ``sigma * x_t / (alpha^2 s^2 + sigma^2)``."""
    a, sig = cfg.alpha_t, cfg.sigma_t
    return sig * np.asarray(x_t, dtype=np.float64) / (a * a * s * s + sig * sig)


def mc_estimators(grid: PosteriorGrid, mc_samples: int, rng: np.random.Generator,
                  projector: np.ndarray | None = None):
    """One Monte-Carlo estimate ``(eps_mse, eps_dist)`` from posterior samples."""
    xs = grid.sample(mc_samples, rng)
    eps_mse = grid.noise_prediction(xs.mean(axis=0))
    if projector is None:
        projector = projector_onto_row_space(distance_jacobian(grid.x_t.reshape(2, 1)))
    return eps_mse, projector @ eps_mse


@dataclass
class BiasVarianceReport:
    rows: list
    bias_norm_dist: float
    bias_norm_mse: float
    se_dist: float
    se_mse: float
    var_trace_dist: float
    var_trace_mse: float
    var_fraction_ok: float
    reference: np.ndarray
    reference_dist: np.ndarray
    mc_mean_mse: np.ndarray


def _trace_cov(samples):
    return float(np.trace(np.atleast_2d(np.cov(samples, rowvar=False))))


def bias_variance_experiment(cfg: ToyDiffusionConfig) -> BiasVarianceReport:
    """Repeat the MC estimators ``trials`` times per batch over ``batches`` batches.

    Per batch: bias norms against the quadrature reference (the projected
    reference for the distance estimator) and variance traces. The summary
    pools all batches; standard errors are ``sqrt(var_trace / count)``.
    """
    grid = PosteriorGrid(cfg.density, cfg.x_t, cfg)
    reference = quadrature_score(cfg.density, cfg.x_t, cfg)
    proj = projector_onto_row_space(distance_jacobian(np.reshape(cfg.x_t, (2, 1))))
    reference_dist = proj @ reference
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.batches)
    rows, all_mse, all_dist = [], [], []
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        est = [mc_estimators(grid, cfg.mc_samples, rng, proj) for _ in range(cfg.trials)]
        mse = np.array([e[0] for e in est])
        dist = np.array([e[1] for e in est])
        all_mse.append(mse)
        all_dist.append(dist)
        rows.append({
            "trial": b,
            "bias_dist": float(np.linalg.norm(dist.mean(axis=0) - reference_dist)),
            "bias_mse": float(np.linalg.norm(mse.mean(axis=0) - reference)),
            "var_dist": _trace_cov(dist),
            "var_mse": _trace_cov(mse),
            "sigma_t": cfg.sigma_t,
            "mc_samples": cfg.mc_samples,
        })
    mse = np.concatenate(all_mse)
    dist = np.concatenate(all_dist)
    var_mse, var_dist = _trace_cov(mse), _trace_cov(dist)
    ok = sum(r["var_dist"] <= r["var_mse"] for r in rows)
    return BiasVarianceReport(
        rows=rows,
        bias_norm_dist=float(np.linalg.norm(dist.mean(axis=0) - reference_dist)),
        bias_norm_mse=float(np.linalg.norm(mse.mean(axis=0) - reference)),
        se_dist=math.sqrt(var_dist / dist.shape[0]),
        se_mse=math.sqrt(var_mse / mse.shape[0]),
        var_trace_dist=var_dist,
        var_trace_mse=var_mse,
        var_fraction_ok=ok / len(rows),
        reference=reference,
        reference_dist=reference_dist,
        mc_mean_mse=mse.mean(axis=0),
    )

