"""Run configuration files.

A run config is a JSON object; every section is optional::

    {
      "task": "classify",
      "seed": 0,
      "solver": {"alpha": 0.0625, "beta": 1.0, "lambda": 0.5, "mu0": 0.01,
                 "mu_max": 1e6, "rho": 1.3, "eps": 1e-7, "max_iter": 500,
                 "ridge": 1e-8},
      "regularizer": {"kind": null, "k_neighbors": 5, "path": null},
      "paths": {"x": "train_x.clrrmat", "labels": "train_labels.txt", ...},
      "synth": {"ambient_dim": 50, "subspace_dims": [4, 4, 4], ...},
      "classify": {"classifier": "nn", "features": "recovered", ...},
      "pose": {"k_neighbors": 5},
      "bench": {"ns": [100, 200, 400], "d": 50, "iterations": 10},
      "normalize": true
    }

Unknown keys at any level raise :class:`ConfigError`, and the solver
section is re-validated through :class:`~clrr.solver.SolverConfig`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .regularizers import KINDS
from .solver import SolverConfig

TASKS = ("synth", "solve", "recover", "classify", "pose", "bench")


class ConfigError(ValueError):
    pass


def _strict(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RegularizerSection:
    # None picks the task default: kNN for pose, between-class otherwise
    kind: str | None = None
    k_neighbors: int = 5
    path: str | None = None

    def __post_init__(self):
        if self.kind is not None and self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind == "custom" and not self.path:
            raise ValueError("custom regularizer needs a path")


@dataclass
class PathsSection:
    x: str | None = None
    y: str | None = None
    labels: str | None = None
    test_x: str | None = None
    test_labels: str | None = None
    targets: str | None = None
    test_targets: str | None = None
    out: str | None = None


@dataclass
class ClassifySection:
    classifier: str = "nn"
    features: str = "recovered"
    truncate: int | None = None
    shrinkage: float | None = None

    def __post_init__(self):
        if self.classifier not in ("nn", "mmd"):
            raise ValueError("classifier must be 'nn' or 'mmd'")
        if self.features not in ("recovered", "projected"):
            raise ValueError("features must be 'recovered' or 'projected'")


@dataclass
class PoseSection:
    k_neighbors: int = 5


@dataclass
class SynthSection:
    ambient_dim: int = 50
    subspace_dims: list = field(default_factory=lambda: [4, 4, 4])
    samples_per_class: list = field(default_factory=lambda: [20, 20, 20])
    noise_sigma: float = 0.0
    corruption_fraction: float = 0.1
    corruption_scale: float = 10.0
    corruption: str = "column"
    coefficient_mean: float = 0.0
    target_dim: int | None = None
    test_fraction: float | None = None


@dataclass
class BenchSection:
    ns: list = field(default_factory=lambda: [100, 200, 400])
    d: int = 50
    iterations: int = 10
    repeats: int = 3


@dataclass
class RunConfig:
    task: str | None = None
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    regularizer: RegularizerSection = field(default_factory=RegularizerSection)
    paths: PathsSection = field(default_factory=PathsSection)
    synth: SynthSection = field(default_factory=SynthSection)
    classify: ClassifySection = field(default_factory=ClassifySection)
    pose: PoseSection = field(default_factory=PoseSection)
    bench: BenchSection = field(default_factory=BenchSection)
    normalize: bool = True

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        sections = {
            "regularizer": RegularizerSection,
            "paths": PathsSection,
            "synth": SynthSection,
            "classify": ClassifySection,
            "pose": PoseSection,
            "bench": BenchSection,
        }
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - allowed)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        kw = {}
        for key, value in d.items():
            if key in sections:
                kw[key] = _strict(sections[key], value, key)
            elif key == "solver":
                if not isinstance(value, dict):
                    raise ConfigError("solver must be an object")
                try:
                    kw[key] = SolverConfig.from_dict(value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"solver: {exc}") from exc
            else:
                kw[key] = value
        if kw.get("task") is not None and kw["task"] not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        return cls(**kw)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["solver"] = self.solver.to_dict()
        return d


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)
