"""MLP and Adam on top of :mod:`elosslab.autodiff`.

Parameters are a flat list ``[W0, b0, W1, b1, ...]`` of float64 arrays with
``W`` of shape ``(fan_in, fan_out)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, backward


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dim: int
    output_dim: int
    n_hidden_layers: int = 2
    activation: str = "silu"

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1 or self.n_hidden_layers < 0:
            raise ValueError("MLP dimensions must be >= 1")
        if self.activation not in ("relu", "silu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim] + [self.hidden_dim] * self.n_hidden_layers + [self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


def init_params(cfg: MlpConfig, seed=None) -> list[np.ndarray]:
    """Uniform in ``±1/sqrt(fan_in)`` for weights and biases."""
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in cfg.layer_dims():
        bound = 1.0 / np.sqrt(fan_in)
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(rng.uniform(-bound, bound, size=fan_out))
    return params


def mlp_forward(cfg: MlpConfig, params, x) -> Tensor:
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[-1] != cfg.input_dim:
        raise ShapeError(f"input last dimension {x.shape[-1]} != {cfg.input_dim}")
    n_layers = len(cfg.layer_dims())
    if len(params) != 2 * n_layers:
        raise ShapeError(f"expected {2 * n_layers} parameter arrays, got {len(params)}")
    h = x
    for layer in range(n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        h = h @ w + b
        if layer < n_layers - 1:
            h = h.silu() if cfg.activation == "silu" else h.relu()
    return h


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.lr <= 0:
            raise ValueError("need 0 <= beta < 1 and lr > 0")


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    m = state.m or [np.zeros_like(p) for p in params]
    v = state.v or [np.zeros_like(p) for p in params]
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, mi, vi in zip(params, grads, m, v):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(mi):
            raise ShapeError(f"shape mismatch {np.shape(p)} vs {np.shape(g)}")
        mi = state.beta1 * mi + (1.0 - state.beta1) * g
        vi = state.beta2 * vi + (1.0 - state.beta2) * g * g
        new_p.append(p - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps))
        new_m.append(mi)
        new_v.append(vi)
    return new_p, replace(state, step=t, m=new_m, v=new_v)


def value_and_grads(loss_fn, params):
    """Run ``loss_fn`` on parameter tensors; return ``(loss, grads)`` as arrays."""
    leaves = [Tensor(p, requires_grad=True) for p in params]
    loss = loss_fn(leaves)
    backward(loss)
    grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]
    return loss.item(), grads
