"""Experiment configuration: JSON in, dataclasses out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .boxes import Box
from .engine import EngineParams
from .fields import FieldModel


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: FieldModel
    boxes: list[Box]
    mu_grid: list[float]          # lambda * sqrt(vol) probe points
    c_grid: list[float]
    n_samples: int
    n_replicas: int
    seed: int
    engine: EngineParams
    lrp_lambda_bound: float = 0.5  # cap on |lambda| * log^d vol
    lrp_tolerance: float = 0.10
    mdp_tolerance: float = 0.10
    mdp_importance_sampling: bool = False
    additivity_pairs: list[tuple[float, float]] = field(default_factory=list)
    additivity_rest: tuple[float, ...] = ()
    audit_base_scale: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.n_samples < 1000:
            raise ConfigError("n_samples must be >= 1e3")
        if not self.boxes:
            raise ConfigError("need at least one box")
        for b in self.boxes:
            if b.d != self.model.d:
                raise ConfigError(f"box {b.sides} does not match model dimension")

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(canon).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            model = FieldModel(**data["model"])
            engine_kwargs = dict(data.get("engine", {}))
            engine_kwargs.setdefault("d", model.d)
            engine = EngineParams(**engine_kwargs)
            return cls(
                model=model,
                boxes=[Box(tuple(float(s) for s in sides))
                       for sides in data["boxes"]],
                mu_grid=[float(x) for x in data.get("mu_grid", [0.5, 1.0, 2.0])],
                c_grid=[float(x) for x in data.get("c_grid", [1.5, 2.0, 2.5])],
                n_samples=int(data.get("n_samples", 100_000)),
                n_replicas=int(data.get("n_replicas", 10_000)),
                seed=int(data["seed"]),
                engine=engine,
                lrp_lambda_bound=float(data.get("lrp_lambda_bound", 0.5)),
                lrp_tolerance=float(data.get("lrp_tolerance", 0.10)),
                mdp_tolerance=float(data.get("mdp_tolerance", 0.10)),
                mdp_importance_sampling=bool(data.get("mdp_importance_sampling", False)),
                additivity_pairs=[tuple(map(float, p))
                                  for p in data.get("additivity_pairs", [])],
                additivity_rest=tuple(float(s)
                                      for s in data.get("additivity_rest", [])),
                audit_base_scale=(float(data["audit_base_scale"])
                                  if "audit_base_scale" in data else None),
                raw=data,
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        return cls.from_dict(data)
