"""Ising spin glasses on open square lattices and the discrete loss family.

Spins are float arrays of +-1 with shape ``(rows, cols)``. Couplings live
on lattice edges: ``jh[r, c]`` joins ``(r, c)``-``(r, c+1)`` and
``jv[r, c]`` joins ``(r, c)``-``(r+1, c)``. Logit losses use the factorised
distribution with site magnetisation ``m = tanh(z)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .autodiff import Tensor, backward
from .energy_loss import LossReport

DEFAULT_T = 0.1
DEFAULT_H0 = 4.01
MAX_EXHAUSTIVE_SITES = 26


class SpinError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeHamiltonian:
    jh: np.ndarray
    jv: np.ndarray

    def __post_init__(self):
        jh = np.asarray(self.jh, dtype=np.float64)
        jv = np.asarray(self.jv, dtype=np.float64)
        if jh.ndim != 2 or jv.ndim != 2:
            raise SpinError("couplings must be 2-d arrays")
        rows, cols = jh.shape[0], jh.shape[1] + 1
        if jv.shape != (rows - 1, cols):
            raise SpinError(f"vertical couplings {jv.shape} do not fit a {rows}x{cols} lattice")
        if np.any(np.abs(jh) > 1) or np.any(np.abs(jv) > 1):
            raise SpinError("couplings must lie in [-1, 1]")
        object.__setattr__(self, "jh", jh)
        object.__setattr__(self, "jv", jv)

    @property
    def shape(self) -> tuple[int, int]:
        return self.jh.shape[0], self.jh.shape[1] + 1

    @property
    def L(self) -> int:
        return self.shape[0]

    @property
    def n_edges(self) -> int:
        return self.jh.size + self.jv.size

    def flat_couplings(self) -> np.ndarray:
        """Couplings in :func:`lattice_edges` order (horizontal, then vertical)."""
        return np.concatenate([self.jh.ravel(), self.jv.ravel()])

    @classmethod
    def uniform(cls, rows: int, cols: int, value: float) -> "LatticeHamiltonian":
        return cls(np.full((rows, cols - 1), value), np.full((rows - 1, cols), value))


def lattice_edges(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major site indices ``(ii, jj)`` of each lattice edge."""
    return kernels.python_backend._lattice_edges(rows, cols)


def sample_hamiltonian(L: int, seed=None) -> LatticeHamiltonian:
    if L < 2:
        raise SpinError(f"lattice side must be >= 2, got {L}")
    rng = np.random.default_rng(seed)
    jh = rng.uniform(-1.0, 1.0, size=(L, L - 1))
    jv = rng.uniform(-1.0, 1.0, size=(L - 1, L))
    return LatticeHamiltonian(jh, jv)


def as_spins(s, shape=None) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if shape is not None and s.shape[-2:] != tuple(shape):
        raise SpinError(f"spin configuration shape {s.shape} does not match lattice {shape}")
    if not np.all(np.abs(s) == 1.0):
        raise SpinError("spins must be +1 or -1")
    return s


def _bond_energy(jh, jv, s):
    return -(np.sum(jh * s[..., :, :-1] * s[..., :, 1:], axis=(-2, -1))
             + np.sum(jv * s[..., :-1, :] * s[..., 1:, :], axis=(-2, -1)))


def _neighbour_field(jh, jv, s):
    h = np.zeros(np.broadcast_shapes(np.shape(s), jh.shape[:-1] + (jh.shape[-1] + 1,)))
    h[..., :, :-1] += jh * s[..., :, 1:]
    h[..., :, 1:] += jh * s[..., :, :-1]
    h[..., :-1, :] += jv * s[..., 1:, :]
    h[..., 1:, :] += jv * s[..., :-1, :]
    return h


def true_energy(H: LatticeHamiltonian, s) -> float:
    """``-sum over lattice edges of J s_i s_j``."""
    s = as_spins(s, H.shape)
    return float(_bond_energy(H.jh, H.jv, s))


def true_field(H: LatticeHamiltonian, s) -> np.ndarray:
    """``h_i = sum_j J_ij s_j``; flipping site i changes the energy by ``2 s_i h_i``."""
    return _neighbour_field(H.jh, H.jv, as_spins(s, H.shape))


def local_field(H: LatticeHamiltonian, y, h0: float) -> np.ndarray:
    """``h_i = sum_j J_ij y_j + h0 * y_i``."""
    if h0 < 0:
        raise SpinError("h0 must be non-negative")
    y = as_spins(y, H.shape)
    return _neighbour_field(H.jh, H.jv, y) + h0 * y


def local_energy(y_hat, y, H: LatticeHamiltonian, h0: float) -> float:
    """Linear surrogate ``-sum_i h_i(y) * y_hat_i``, minimised at ``y`` for ``h0 > 4``."""
    y_hat = as_spins(y_hat, H.shape)
    return float(-np.sum(local_field(H, y, h0) * y_hat))


def bits_to_config(b: int, shape) -> np.ndarray:
    """Site 0 is +1; site ``k >= 1`` is -1 when bit ``k-1`` of ``b`` is set."""
    rows, cols = shape
    n = rows * cols
    bits = (int(b) >> np.arange(n - 1)) & 1
    s = np.ones(n)
    s[1:] = 1.0 - 2.0 * bits
    return s.reshape(rows, cols)


def ground_state_exhaustive(H: LatticeHamiltonian) -> tuple[np.ndarray, float]:
    """Global minimiser of :func:`true_energy` by enumeration (<= 26 sites)."""
    rows, cols = H.shape
    if rows * cols > MAX_EXHAUSTIVE_SITES:
        raise SpinError(f"{rows}x{cols} lattice exceeds the enumeration bound of "
                        f"{MAX_EXHAUSTIVE_SITES} sites")
    if rows * cols < 2:
        raise SpinError("lattice needs at least two sites")
    b, _ = kernels.ising_ground_state(H.jh, H.jv)
    s = bits_to_config(b, H.shape)
    return s, true_energy(H, s)


def predict_config(z) -> np.ndarray:
    """``sign(z)`` with zero mapped to +1."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0, -1.0)


# -- logit losses ----------------------------------------------------------

def binary_entropy(z: Tensor) -> Tensor:
    """Entropy of a +-1 variable with mean ``tanh(z)``, elementwise and stable."""
    u = z * 2.0
    return u.softplus() - u * u.sigmoid()


def local_energy_objective(z: Tensor, fields, T: float) -> Tensor:
    """Per-sample free energy ``(1/T) * (-sum h m) - sum S(m)``; sums the last axis."""
    energy = -(z.tanh() * fields).sum(axis=-1)
    return energy * (1.0 / T) - binary_entropy(z).sum(axis=-1)


def true_energy_objective(z: Tensor, couplings, ii, jj, T: float) -> Tensor:
    """Per-sample mean-field ``(1/T) * <E_true> - sum S(m)``; sites on the last axis."""
    m = z.tanh()
    energy = -(m[..., ii] * m[..., jj] * couplings).sum(axis=-1)
    return energy * (1.0 / T) - binary_entropy(z).sum(axis=-1)


def cross_entropy_objective(z: Tensor, y) -> Tensor:
    """Per-sample mean over sites of ``softplus(-2 y z)``."""
    return (z * (-2.0 * np.asarray(y))).softplus().mean(axis=-1)


def margin_objective(z: Tensor, y) -> Tensor:
    """Per-sample mean over sites of ``max(0, 1 - y z)``."""
    return (1.0 - z * np.asarray(y)).relu().mean(axis=-1)


def _report(build, z) -> LossReport:
    zt = Tensor(np.asarray(z, dtype=np.float64).ravel(), requires_grad=True)
    out = build(zt)
    backward(out)
    return LossReport(out.item(), zt.grad.reshape(np.shape(z)))


def _check_T(T):
    if not T > 0:
        raise SpinError("temperature must be positive")


def local_energy_loss(z, y, H: LatticeHamiltonian, h0: float = DEFAULT_H0,
                      T: float = DEFAULT_T) -> LossReport:
    _check_T(T)
    fields = local_field(H, y, h0).ravel()
    return _report(lambda zt: local_energy_objective(zt, fields, T), z)


def local_energy_loss_terms(z, y, H: LatticeHamiltonian, h0: float = DEFAULT_H0,
                            T: float = DEFAULT_T) -> tuple[float, float]:
    """``(energy_term, entropy_term)`` with loss = energy_term - entropy_term."""
    _check_T(T)
    zt = Tensor(np.asarray(z, dtype=np.float64).ravel())
    energy = -np.sum(local_field(H, y, h0).ravel() * np.tanh(zt.data)) / T
    return float(energy), float(binary_entropy(zt).sum().item())


def true_energy_loss(z, H: LatticeHamiltonian, T: float = DEFAULT_T) -> LossReport:
    _check_T(T)
    ii, jj = lattice_edges(*H.shape)
    couplings = H.flat_couplings()
    return _report(lambda zt: true_energy_objective(zt, couplings, ii, jj, T), z)


def cross_entropy_loss(z, y) -> LossReport:
    y = as_spins(y, np.shape(z)).ravel()
    return _report(lambda zt: cross_entropy_objective(zt, y), z)


def margin_loss(z, y) -> LossReport:
    y = as_spins(y, np.shape(z)).ravel()
    return _report(lambda zt: margin_objective(zt, y), z)
