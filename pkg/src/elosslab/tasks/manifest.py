"""Run manifests: enough to re-run a command and reproduce its CSV exactly."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .io import format_cell, format_key_values, read_config

MANIFEST_NAME = "manifest.txt"


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict
    version: str
    wall_time: float = 0.0
    metrics: dict = field(default_factory=dict)

    def to_mapping(self) -> dict:
        out = {"command": self.command, "seed": str(self.seed), "version": self.version,
               "wall_time": format_cell(float(self.wall_time))}
        out.update({f"config.{k}": v for k, v in self.config.items()})
        out.update({f"metric.{k}": format_cell(v) for k, v in self.metrics.items()})
        return out

    def save(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text("# elosslab run manifest\n" + format_key_values(self.to_mapping()))
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        raw = read_config(path)
        try:
            config = {k[len("config."):]: v for k, v in raw.items() if k.startswith("config.")}
            metrics = {k[len("metric."):]: v for k, v in raw.items() if k.startswith("metric.")}
            return cls(raw["command"], int(raw["seed"]), config, raw["version"],
                       float(raw.get("wall_time", 0.0)), metrics)
        except KeyError as exc:
            raise ValueError(f"{path}: manifest lacks {exc.args[0]!r}") from None
