"""Experiment configuration (JSON on disk, dataclasses in memory)."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .brownian import BrownianConfig
from .norms import WeightParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionConfig:
    p: float = 2.0
    N_list: tuple[int, ...] = (1, 2, 3, 4)
    ridge_lambda: float | None = None
    split_fraction: float = 0.8
    scale_columns: bool = False

    def __post_init__(self):
        if list(self.N_list) != sorted(self.N_list) or not self.N_list:
            raise ConfigError("N_list must be non-empty and sorted ascending")
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split_fraction must lie in (0, 1)")
        if self.p < 1:
            raise ConfigError("p must be >= 1")


@dataclass(frozen=True)
class TargetConfig:
    kind: str = "terminal-functional"
    spec: dict = field(default_factory=lambda: {"name": "gbm", "mu": 0.05, "sigma": 0.2, "y0": 1.0})

    def __post_init__(self):
        if self.kind not in ("terminal-functional", "process"):
            raise ConfigError(f"target kind must be 'terminal-functional' or 'process', got {self.kind!r}")
        if "name" not in self.spec:
            raise ConfigError("target spec needs a 'name'")


@dataclass(frozen=True)
class ExperimentConfig:
    brownian: BrownianConfig = field(default_factory=BrownianConfig)
    weight: WeightParams = field(default_factory=WeightParams)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    output_dir: str = "out"
    stop_count: int = 5

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regression"]["N_list"] = list(self.regression.N_list)
        return out

    def identity(self) -> dict:
        """Everything that determines results; the output location is not part of it."""
        out = self.to_dict()
        del out["output_dir"]
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, brownian=replace(cfg.brownian, seed=seed))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=output_dir)
        return cfg

    @classmethod
    def from_dict(cls, obj: dict) -> ExperimentConfig:
        known = {"brownian", "weight", "regression", "target", "output_dir", "stop_count"}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            reg = dict(obj.get("regression", {}))
            if "N_list" in reg:
                reg["N_list"] = tuple(int(n) for n in reg["N_list"])
            return cls(
                brownian=BrownianConfig(**obj.get("brownian", {})),
                weight=WeightParams(**obj.get("weight", {})),
                regression=RegressionConfig(**reg),
                target=TargetConfig(**obj.get("target", {})) if "target" in obj else TargetConfig(),
                output_dir=str(obj.get("output_dir", "out")),
                stop_count=int(obj.get("stop_count", 5)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(obj)
