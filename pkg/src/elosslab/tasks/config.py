"""Training configuration for the shape and spin experiments."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from ..energy_loss import CoefficientScheme

SHAPE_LOSSES = ("mse", "energy", "kabsch", "sparse-energy")
SPIN_LOSSES = ("cross-entropy", "margin", "local-energy", "true-energy")

_DEFAULTS = {
    "shapes": dict(loss="energy", coeff="exponential:1.0", lr=1e-3, epochs=50, batch_size=128,
                   n_train=10_000, n_test=1000, hidden_dim=64),
    "spins": dict(loss="local-energy", coeff="constant:1.0", lr=1e-3, epochs=200, batch_size=256,
                  n_train=2000, n_test=500, hidden_dim=256),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    task: str
    loss: str
    seed: int
    coeff: str = "exponential:1.0"
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 128
    n_train: int = 10_000
    n_test: int = 1000
    hidden_dim: int = 64
    n_vertices: int = 5
    theta_aug: float = math.pi
    pool_size: int = 16
    L: int = 4
    h0: float = 4.01
    T: float = 0.1

    def __post_init__(self):
        allowed = {"shapes": SHAPE_LOSSES, "spins": SPIN_LOSSES}.get(self.task)
        if allowed is None:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.loss not in allowed:
            raise ConfigError(f"loss {self.loss!r} is not valid for {self.task}; choose from {allowed}")
        if not self.lr > 0 or min(self.epochs, self.batch_size, self.n_train, self.n_test,
                                   self.hidden_dim, self.pool_size) < 1:
            raise ConfigError("lr, epochs, batch_size, dataset sizes and widths must be positive")
        if not 0 <= self.theta_aug <= math.pi:
            raise ConfigError("theta_aug must lie in [0, pi]")
        if self.n_vertices < 3:
            raise ConfigError("n_vertices must be >= 3")
        if self.L < 2 or self.L * self.L > 26:
            raise ConfigError("L must satisfy 2 <= L and L*L <= 26")
        if not self.T > 0 or self.h0 < 0:
            raise ConfigError("need T > 0 and h0 >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.scheme()

    def scheme(self) -> CoefficientScheme:
        try:
            return CoefficientScheme.parse(self.coeff)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_mapping(self) -> dict:
        return {k: (repr(v) if isinstance(v, float) else str(v)) for k, v in asdict(self).items()}

    @classmethod
    def from_mapping(cls, mapping: dict, task: str | None = None, **overrides) -> "TrainConfig":
        """Build from string values, filling task-specific defaults."""
        raw = {k: v for k, v in mapping.items() if v is not None}
        raw.update({k: v for k, v in overrides.items() if v is not None})
        task = task or raw.get("task")
        if task not in _DEFAULTS:
            raise ConfigError(f"unknown or missing task {task!r}")
        if "seed" not in raw:
            raise ConfigError("an explicit seed is required (--seed or 'seed' in the config)")
        types = {f.name: f.type for f in fields(cls)}
        unknown = set(raw) - set(types)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = dict(_DEFAULTS[task], task=task)
        for key, value in raw.items():
            if key == "task":
                continue
            kind = types[key]
            try:
                if kind == "int":
                    values[key] = int(value)
                elif kind == "float":
                    values[key] = float(value)
                else:
                    values[key] = str(value)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cls(**values)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)
