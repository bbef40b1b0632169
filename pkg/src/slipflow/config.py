"""Run configuration: TOML file -> typed, validated dataclasses."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .geometry import GeometryError, radius_from_config


class ConfigError(ValueError):
    """A configuration value violates an invariant; the message names it."""


@dataclass
class GeometryConfig:
    type: str = "circle"
    r: float | None = 1.0
    a: float | None = None
    b: float | None = None
    cos: list | None = None
    sin: list | None = None

    def as_table(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class PhysicsConfig:
    nu: float = 1.0
    friction_f: float = 0.0
    v_infinity: list = field(default_factory=lambda: [0.0, 0.0])
    b: dict = field(default_factory=dict)
    F: object = "zero"


@dataclass
class DiscretizationConfig:
    n_theta: int = 128
    n_sigma: int = 128
    R: float = 4.0
    quad_order: int = 6
    n_theta_modes: int = 16
    n_sigma_modes: int = 8
    stretch: float | None = None


@dataclass
class ExtensionConfig:
    epsilon: float = 0.5
    epsilon_target: float = 0.1


@dataclass
class SolverConfig:
    tol: float = 1e-9
    max_newton: int = 40
    damping: float = 1.0
    continuation_ratio: float = 0.5
    nu_start: float | None = None


@dataclass
class OutputsConfig:
    directory: str = "out"
    dump_fields: bool = True


@dataclass
class StudyConfig:
    N_sequence: list = field(default_factory=list)
    R_sequence: list = field(default_factory=list)
    epsilon_sequence: list = field(default_factory=list)
    R_modes: list | None = None
    interior_radius: float = 2.0
    n_v0_samples: int = 100


@dataclass
class ManufacturedConfig:
    enabled: bool = False
    scale: float = 0.3


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    extension: ExtensionConfig = field(default_factory=ExtensionConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    manufactured: ManufacturedConfig = field(default_factory=ManufacturedConfig)
    seed: int = 0
    include_boundary_term: bool = True

    def as_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        p, d, e, s = self.physics, self.discretization, self.extension, self.solver
        if not p.nu > 0:
            raise ConfigError(f"physics.nu must be > 0 (got {p.nu})")
        if p.friction_f < 0:
            raise ConfigError(f"physics.friction_f must be >= 0 (got {p.friction_f})")
        if len(p.v_infinity) != 2 or not np.all(np.isfinite(p.v_infinity)):
            raise ConfigError("physics.v_infinity must be two finite numbers")
        if not 0 < e.epsilon <= 1:
            raise ConfigError(f"extension.epsilon must lie in (0, 1] (got {e.epsilon})")
        if not e.epsilon_target > 0:
            raise ConfigError("extension.epsilon_target must be > 0")
        try:
            rho = radius_from_config(self.geometry.as_table())
        except (GeometryError, KeyError, TypeError) as exc:
            raise ConfigError(f"geometry: {exc}") from exc
        if not d.R > rho.max_radius():
            raise ConfigError(f"discretization.R must exceed the obstacle radius {rho.max_radius():.4g}")
        for name in ("n_theta", "n_sigma"):
            if getattr(d, name) < 8:
                raise ConfigError(f"discretization.{name} must be >= 8")
        if d.n_theta_modes < 1 or d.n_sigma_modes < 1:
            raise ConfigError("discretization mode counts must be >= 1")
        if d.quad_order < 2:
            raise ConfigError("discretization.quad_order must be >= 2")
        if not 0 < s.continuation_ratio < 1:
            raise ConfigError("solver.continuation_ratio must lie in (0, 1)")
        if s.tol <= 0 or s.max_newton < 1:
            raise ConfigError("solver.tol must be > 0 and solver.max_newton >= 1")
        for seq_name in ("N_sequence", "R_sequence", "epsilon_sequence"):
            seq = getattr(self.study, seq_name)
            keys = [np.prod(x) if isinstance(x, (list, tuple)) else x for x in seq]
            if seq_name == "epsilon_sequence":
                keys = [-x for x in keys]
            if any(b <= a for a, b in zip(keys, keys[1:])):
                raise ConfigError(f"study.{seq_name} must be strictly monotone")
        return self


_SECTIONS = {"geometry": GeometryConfig, "physics": PhysicsConfig,
             "discretization": DiscretizationConfig, "extension": ExtensionConfig,
             "solver": SolverConfig, "outputs": OutputsConfig, "study": StudyConfig,
             "manufactured": ManufacturedConfig}


def config_from_dict(raw: dict) -> RunConfig:
    kwargs = {}
    for name, cls in _SECTIONS.items():
        table = dict(raw.get(name, {}))
        known = set(cls.__dataclass_fields__)
        unknown = set(table) - known
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
        if name == "geometry" and table.get("type", "circle") != "circle":
            table.setdefault("r", None)
        kwargs[name] = cls(**table)
    extra = set(raw) - set(_SECTIONS) - {"seed", "include_boundary_term"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    cfg = RunConfig(**kwargs, seed=int(raw.get("seed", 0)),
                    include_boundary_term=bool(raw.get("include_boundary_term", True)))
    return cfg.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return config_from_dict(raw)


__all__ = ["ConfigError", "RunConfig", "GeometryConfig", "PhysicsConfig", "DiscretizationConfig",
           "ExtensionConfig", "SolverConfig", "OutputsConfig", "StudyConfig", "ManufacturedConfig",
           "config_from_dict", "load_config"]
