"""Ground-state prediction for small spin glasses: data and trainer."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..nn import AdamState, MlpConfig, adam_step, init_params, mlp_forward, value_and_grads
from ..spin import (LatticeHamiltonian, MAX_EXHAUSTIVE_SITES, SpinError, cross_entropy_objective,
                    ground_state_exhaustive, lattice_edges, local_energy_objective,
                    margin_objective, predict_config, sample_hamiltonian, true_energy_objective)
from .config import TrainConfig
from .manifest import RunManifest

SPINS_HEADER = ["epoch", "split", "mean_pred_energy", "mean_ground_energy", "accuracy_per_site"]


def worker_count() -> int:
    """Worker cap from ``ELOSSLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("ELOSSLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"ELOSSLAB_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SpinDataset:
    jh: np.ndarray      # (size, L, L-1)
    jv: np.ndarray      # (size, L-1, L)
    ground: np.ndarray  # (size, L, L)
    energy: np.ndarray  # (size,)

    def __len__(self):
        return self.energy.shape[0]

    @property
    def L(self) -> int:
        return self.ground.shape[1]

    def hamiltonian(self, i: int) -> LatticeHamiltonian:
        return LatticeHamiltonian(self.jh[i], self.jv[i])

    def couplings(self) -> np.ndarray:
        """``(size, 2 L (L-1))`` in lattice edge order, the model input."""
        n = len(self)
        return np.concatenate([self.jh.reshape(n, -1), self.jv.reshape(n, -1)], axis=1)

    def to_arrays(self) -> dict:
        return {"jh": self.jh, "jv": self.jv, "ground": self.ground, "energy": self.energy}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "SpinDataset":
        return cls(arrays["jh"], arrays["jv"], arrays["ground"], arrays["energy"])


def _solve(args):
    L, seed = args
    H = sample_hamiltonian(L, seed)
    s, e = ground_state_exhaustive(H)
    return H.jh, H.jv, s, e


def gen_spin_dataset(L: int, size: int, seed, workers: int | None = None) -> SpinDataset:
    """Random Hamiltonians with exact ground states; one derived seed per sample."""
    if L * L > MAX_EXHAUSTIVE_SITES:
        raise SpinError(f"L={L} exceeds the enumeration bound")
    if size < 1:
        raise SpinError("dataset size must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    jobs = [(L, child) for child in ss.spawn(size)]
    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(_solve, jobs))
    else:
        out = [_solve(j) for j in jobs]
    jh, jv, s, e = zip(*out)
    return SpinDataset(np.stack(jh), np.stack(jv), np.stack(s), np.array(e))


def batch_true_energy(couplings, spins, ii, jj) -> np.ndarray:
    """Per-sample ``-sum J s_i s_j`` with flattened spins ``(B, L*L)``."""
    return -np.sum(couplings * spins[:, ii] * spins[:, jj], axis=1)


def batch_local_fields(couplings, y, ii, jj, h0) -> np.ndarray:
    """Per-sample ``h_i = sum_j J_ij y_j + h0 y_i`` on flattened lattices."""
    b, n = y.shape
    h = h0 * y
    rows = np.arange(b)[:, None]
    np.add.at(h, (rows, ii[None, :]), couplings * y[:, jj])
    np.add.at(h, (rows, jj[None, :]), couplings * y[:, ii])
    return h


def _objective(cfg: TrainConfig, z, couplings, y, ii, jj):
    if cfg.loss == "cross-entropy":
        per = cross_entropy_objective(z, y)
    elif cfg.loss == "margin":
        per = margin_objective(z, y)
    elif cfg.loss == "local-energy":
        per = local_energy_objective(z, batch_local_fields(couplings, y, ii, jj, cfg.h0), cfg.T)
    else:
        per = true_energy_objective(z, couplings, ii, jj, cfg.T)
    return per.mean()


def _model(cfg: TrainConfig) -> MlpConfig:
    return MlpConfig(2 * cfg.L * (cfg.L - 1), cfg.hidden_dim, cfg.L * cfg.L)


def evaluate_spins(cfg: TrainConfig, params, data: SpinDataset, epoch: int = 0, split: str = "test") -> dict:
    """Energy of the sign prediction; site accuracy is scored up to the global flip."""
    ii, jj = lattice_edges(cfg.L, cfg.L)
    couplings = data.couplings()
    z = mlp_forward(_model(cfg), params, couplings).data
    pred = predict_config(z)
    e_pred = np.minimum(batch_true_energy(couplings, pred, ii, jj),
                        batch_true_energy(couplings, -pred, ii, jj))
    match = np.mean(pred == data.ground.reshape(len(data), -1), axis=1)
    return {"epoch": epoch, "split": split, "mean_pred_energy": float(e_pred.mean()),
            "mean_ground_energy": float(data.energy.mean()),
            "accuracy_per_site": float(np.maximum(match, 1.0 - match).mean())}


@dataclass
class TrainResult:
    manifest: RunManifest
    rows: list
    params: list


def train_spin(cfg: TrainConfig, workers: int | None = None) -> TrainResult:
    if cfg.task != "spins":
        raise SpinError("train_spin needs a spins config")
    start = time.perf_counter()
    data_ss, test_ss, init_ss, order_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    train = gen_spin_dataset(cfg.L, cfg.n_train, data_ss, workers)
    test = gen_spin_dataset(cfg.L, cfg.n_test, test_ss, workers)
    ii, jj = lattice_edges(cfg.L, cfg.L)
    x = train.couplings()
    y = train.ground.reshape(len(train), -1)
    model = _model(cfg)
    params = init_params(model, init_ss)
    state = AdamState(lr=cfg.lr)
    order_rng = np.random.default_rng(order_ss)
    rows = []
    for epoch in range(1, cfg.epochs + 1):
        perm = order_rng.permutation(len(train))
        for lo in range(0, len(train), cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]

            def loss_fn(leaves):
                z = mlp_forward(model, leaves, x[idx])
                return _objective(cfg, z, x[idx], y[idx], ii, jj)
            _, grads = value_and_grads(loss_fn, params)
            params, state = adam_step(state, params, grads)
        rows.append(evaluate_spins(cfg, params, train, epoch, "train"))
        rows.append(evaluate_spins(cfg, params, test, epoch, "test"))
    final = rows[-1]
    metrics = {"test_pred_energy": final["mean_pred_energy"],
               "test_ground_energy": final["mean_ground_energy"],
               "test_accuracy": final["accuracy_per_site"]}
    manifest = RunManifest("spins-train", cfg.seed, cfg.to_mapping(), __version__,
                           time.perf_counter() - start, metrics)
    return TrainResult(manifest, rows, params)
