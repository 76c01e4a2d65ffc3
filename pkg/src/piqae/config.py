"""Experiment configuration: a JSON tree validated into nested dataclasses.

Unknown fields are rejected with their dotted path, so typos never pass
silently.  Missing fields take defaults that depend on the model family.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from . import __version__
from .lattice import ModelSpec, build_graph

LAMBDA_GRID = (1.0, 1.25, 1.5, 1.75, 2.0)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class ModelConfig:
    kind: str = "square"  # chain | square | quito | guadalupe
    dims: list[int] = field(default_factory=lambda: [4, 4])
    hamiltonian: str | None = None  # tfim | mfim; default tfim on square lattices, mfim otherwise
    J: float = -1.0
    h_x: float | None = None
    h_z: float | None = None

    def resolve(self) -> None:
        if self.kind not in ("chain", "square", "quito", "guadalupe"):
            raise ConfigError(f"model.kind: unknown lattice {self.kind!r}")
        if self.kind in ("quito", "guadalupe"):
            if self.dims:
                raise ConfigError(f"model.dims: {self.kind} takes no dimensions")
        if self.hamiltonian is None:
            self.hamiltonian = "tfim" if self.kind == "square" else "mfim"
        if self.hamiltonian not in ("tfim", "mfim"):
            raise ConfigError("model.hamiltonian: must be 'tfim' or 'mfim'")
        if self.h_x is None:
            self.h_x = -3.05 if self.kind == "square" else -1.0
        if self.h_z is None:
            self.h_z = 0.0 if self.hamiltonian == "tfim" else (1.525 if self.kind == "square" else 0.5)
        if self.hamiltonian == "tfim" and self.h_z != 0:
            raise ConfigError("model.h_z: a TFIM has no longitudinal field")
        if self.hamiltonian == "mfim" and self.h_z == 0:
            raise ConfigError("model.h_z: an MFIM needs a nonzero longitudinal field")
        try:
            build_graph(self.kind, self.dims)
        except ValueError as exc:
            raise ConfigError(f"model.dims: {exc}") from None

    def spec(self) -> ModelSpec:
        return ModelSpec(build_graph(self.kind, self.dims), self.J, self.h_x, self.h_z)


@dataclass
class AnsatzConfig:
    L: int = 1
    angles: Any = "optimize"  # flat per-layer (alpha, [beta,] gamma) list, or "optimize"
    restarts: int = 8
    vqe_seed: int = 0

    def resolve(self) -> None:
        if self.L < 0:
            raise ConfigError("ansatz.L: must be non-negative")
        if self.restarts < 1:
            raise ConfigError("ansatz.restarts: must be at least 1")
        if isinstance(self.angles, str):
            if self.angles != "optimize":
                raise ConfigError("ansatz.angles: expected a list of angles or 'optimize'")
        elif not isinstance(self.angles, list) or not all(isinstance(a, (int, float)) for a in self.angles):
            raise ConfigError("ansatz.angles: expected a list of numbers")


@dataclass
class SubspaceConfig:
    K: int = 1
    basis: str = "fgks"  # fgks | ks
    cancellation: bool = True

    def resolve(self) -> None:
        if self.K < 0:
            raise ConfigError("subspace.K: must be non-negative")
        if self.basis not in ("fgks", "ks"):
            raise ConfigError("subspace.basis: must be 'fgks' or 'ks'")


@dataclass
class MeasurementConfig:
    mode: str = "exact"  # exact | shots
    shots: int = 16384
    scheme: str = "auto"  # auto | grouped | per_string
    resamples: int = 10

    def resolve(self) -> None:
        if self.mode not in ("exact", "shots"):
            raise ConfigError("measurement.mode: must be 'exact' or 'shots'")
        if self.shots < 1:
            raise ConfigError("measurement.shots: must be positive")
        if self.scheme not in ("auto", "grouped", "per_string"):
            raise ConfigError("measurement.scheme: must be 'auto', 'grouped' or 'per_string'")
        if self.resamples < 0:
            raise ConfigError("measurement.resamples: must be non-negative")


@dataclass
class NoiseConfig:
    p: float = 0.02
    lambdas: list[float] = field(default_factory=lambda: list(LAMBDA_GRID))
    trajectories: int = 64
    estimator: str = "reweighted"  # reweighted | independent

    def resolve(self) -> None:
        if not 0 <= self.p < 1:
            raise ConfigError("noise.p: must lie in [0, 1)")
        if len(set(self.lambdas)) < 3:
            raise ConfigError("noise.lambdas: an order-2 fit needs at least 3 distinct scales")
        if 1.0 not in self.lambdas:
            raise ConfigError("noise.lambdas: the grid must contain 1")
        if any(l < 0 or l * self.p >= 1 for l in self.lambdas):
            raise ConfigError("noise.lambdas: every scale must be >= 0 with scale * p < 1")
        if self.trajectories < 1:
            raise ConfigError("noise.trajectories: must be positive")
        if self.estimator not in ("reweighted", "independent"):
            raise ConfigError("noise.estimator: must be 'reweighted' or 'independent'")


@dataclass
class SelectionConfig:
    mode: str = "threshold"  # strace | threshold | sweep
    xi_c: float = 1e-6
    M_step: int = 1

    def resolve(self) -> None:
        if self.mode not in ("strace", "threshold", "sweep"):
            raise ConfigError("selection.mode: must be 'strace', 'threshold' or 'sweep'")
        if self.xi_c <= 0:
            raise ConfigError("selection.xi_c: must be positive")
        if self.M_step < 1:
            raise ConfigError("selection.M_step: must be positive")


@dataclass
class GridConfig:
    """Lists swept by the ``sweep`` and ``grouping`` commands."""

    L: list[int] | None = None
    K: list[int] | None = None
    sizes: list[list[int]] | None = None  # lattice dims for grouping statistics

    def resolve(self) -> None:
        for name in ("L", "K"):
            vals = getattr(self, name)
            if vals is not None and (not vals or any(v < 0 for v in vals)):
                raise ConfigError(f"grid.{name}: expected a non-empty list of non-negative integers")


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    ansatz: AnsatzConfig = field(default_factory=AnsatzConfig)
    subspace: SubspaceConfig = field(default_factory=SubspaceConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    noise: NoiseConfig | None = None
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    seed: int = 0
    output: str | None = None

    def resolve(self) -> "ExperimentConfig":
        for f in dataclasses.fields(self):
            sub = getattr(self, f.name)
            if hasattr(sub, "resolve"):
                sub.resolve()
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        return self

    def to_dict(self, include_output: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not include_output:
            d.pop("output")
        return d

    def digest(self, *sections: str) -> str:
        """Short hash of the whole config, or only of the named sections."""
        d = self.to_dict()
        if sections:
            d = {k: d[k] for k in sections}
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @property
    def config_hash(self) -> str:
        return self.digest()

    def metadata(self, subcommand: str) -> list[str]:
        return [
            f"tool: piqae {__version__}",
            f"subcommand: {subcommand}",
            f"config_hash: {self.config_hash}",
            f"seed: {self.seed}",
            "config: " + json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")),
        ]


def _build(cls, data: Any, path: str):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"{where}: unknown field")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get((cls, name))
        where = f"{path}.{name}" if path else name
        kwargs[name] = _build(sub, value, where) if sub else _coerce(known[name], value, where)
    return cls(**kwargs)


def _coerce(f: dataclasses.Field, value: Any, where: str):
    t = str(f.type)
    if value is None:
        if "None" in t:
            return None
        raise ConfigError(f"{where}: may not be null")
    if t.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
    elif t.startswith("float") and not t.startswith("float |"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    elif t.startswith("float |"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    elif t == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true or false")
    elif t.startswith("str") and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string")
    elif t.startswith("list[float]"):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return [float(v) for v in value]
    elif t.startswith("list[int]"):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}: expected a list of integers")
    elif t.startswith("list[list[int]]"):
        if not isinstance(value, list) or not all(isinstance(v, list) for v in value):
            raise ConfigError(f"{where}: expected a list of integer lists")
    return value


_SECTIONS = {
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "ansatz"): AnsatzConfig,
    (ExperimentConfig, "subspace"): SubspaceConfig,
    (ExperimentConfig, "measurement"): MeasurementConfig,
    (ExperimentConfig, "noise"): NoiseConfig,
    (ExperimentConfig, "selection"): SelectionConfig,
    (ExperimentConfig, "grid"): GridConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "")
    model_data = data.get("model", {}) if isinstance(data, dict) else {}
    if "dims" not in model_data and cfg.model.kind in ("quito", "guadalupe"):
        cfg.model.dims = []
    return cfg.resolve()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)
