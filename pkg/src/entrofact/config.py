"""Configuration management for entrofact experiments."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .inequalities import BlockWeights
from .lattice import Region, boundary, fat_region
from .models import (
    BoundaryCondition,
    SpinModel,
    load_model,
    make_colorings,
    make_hardcore,
    make_ising,
    make_potts,
)
from .optimize import OptimizerConfig
from .workers import resolve_threads

MODEL_NAMES = ("ising", "potts", "hardcore", "colorings", "file")
REGION_KINDS = ("chain", "rectangle", "points", "fat")
BOUNDARY_KINDS = ("constant", "explicit", "free", "sweep")
WEIGHT_PRESETS = ("singletons", "even-odd", "blocks", "full", "explicit")
BOUNDARY_SWEEP_LIMIT = 1 << 10


def parse_bool(value: Any, default: bool) -> bool:
    """Coerce YAML string representations ('true', 'yes', 'on', '1') to bool."""
    if value is None:
        return default
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return value.lower() in ("true", "yes", "on", "1")
    return bool(value)


def parse_range(text: str) -> list[int]:
    """'2..8' -> [2, ..., 8]; '5' -> [5]; '2,4,6' -> [2, 4, 6]."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        msg = f"Invalid integer range '{text}'"
        raise ConfigError(msg) from exc


@dataclass
class ExperimentConfig:
    """YAML-backed settings for one experiment run."""

    # Model
    model_name: str = "ising"
    beta: float = 0.0
    external_field: float = 0.0
    q: int = 2
    fields: list[float] = field(default_factory=list)
    lam: float = 1.0
    model_path: Path | None = None

    # Region
    region_kind: str = "chain"
    region_size: int = 4
    region_shape: list[int] = field(default_factory=lambda: [2, 2])
    region_points: list[list[int]] = field(default_factory=list)
    fat_side: int = 2
    fat_base: list[list[int]] = field(default_factory=list)

    # Boundary condition (spin index, not physical symbol)
    boundary_kind: str = "constant"
    boundary_spin: int = 0
    boundary_assignment: list[list[Any]] = field(default_factory=list)

    # Block weights
    weights_preset: str = "even-odd"
    weights_max_size: int = 2
    weights_blocks: list[list[Any]] = field(default_factory=list)

    # Checks
    checks: list[str] = field(default_factory=list)
    checks_disabled: list[str] = field(default_factory=list)

    # Optimizer and sampling budget
    optimizer_starts: int = 32
    optimizer_max_iter: int = 10_000
    optimizer_floor: float = 1e-12
    optimizer_step: float = 0.5
    optimizer_tol: float = 1e-10
    samples: int = 200

    # Dynamics and simulation
    horizon: float = 200.0
    interval: float = 1.0
    replicas: int = 4
    tv_times: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0, 8.0])
    ssm_max_distance: int = 10
    ssm_relax_hard: bool = False

    # Run settings
    seed: int | None = None
    output_dir: Path = field(default_factory=lambda: Path("runs"))
    threads: int | None = None
    cap_states: int = 1 << 16

    # Logging
    log_level: str = "INFO"

    @classmethod
    def get_config_path(cls) -> Path:
        """Default config file in the working directory."""
        return Path("entrofact.yaml")

    @classmethod
    def load(cls, config_path: Path | None = None) -> ExperimentConfig:
        """Load configuration from a YAML (or JSON) file, falling back to defaults if absent."""
        if config_path is None:
            config_path = cls.get_config_path()
            if not config_path.exists():
                return cls()

        if not config_path.exists():
            msg = f"Config file not found: {config_path}"
            raise ConfigError(msg)

        try:
            with config_path.open(encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            msg = f"Invalid YAML in {config_path}: {exc}"
            raise ConfigError(msg) from exc

        if not isinstance(data, dict):
            msg = f"Config root must be a mapping, got {type(data).__name__}"
            raise ConfigError(msg)
        return cls._from_dict(data)

    @classmethod
    def _from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Create config from a dictionary."""
        config = cls()

        try:
            if data.get("seed") is not None:
                config.seed = int(data["seed"])
            if "output_dir" in data:
                config.output_dir = Path(os.path.expanduser(str(data["output_dir"])))
            if data.get("threads") is not None:
                config.threads = int(data["threads"])
            config.cap_states = int(data.get("cap_states", config.cap_states))

            cls._apply_model_config(config, data.get("model", {}))
            cls._apply_region_config(config, data.get("region", {}))
            cls._apply_boundary_config(config, data.get("boundary", {}))
            cls._apply_weights_config(config, data.get("weights", {}))
            cls._apply_checks_config(config, data.get("checks", []), data.get("checks_disabled", []))
            cls._apply_optimizer_config(config, data.get("optimizer", {}))
            cls._apply_dynamics_config(config, data.get("dynamics", {}))
            cls._apply_logging_config(config, data.get("logging", {}))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            msg = f"Invalid config value: {exc}"
            raise ConfigError(msg) from exc

        cls._validate(config)

        return config

    @classmethod
    def _apply_model_config(cls, config: ExperimentConfig, model: dict[str, Any]) -> None:
        config.model_name = str(model.get("name", config.model_name))
        config.beta = float(model.get("beta", config.beta))
        config.external_field = float(model.get("field", config.external_field))
        config.q = int(model.get("q", config.q))
        if "fields" in model:
            config.fields = [float(h) for h in model["fields"]]
        config.lam = float(model.get("lam", config.lam))
        if model.get("path"):
            config.model_path = Path(os.path.expanduser(str(model["path"])))

    @classmethod
    def _apply_region_config(cls, config: ExperimentConfig, region: dict[str, Any]) -> None:
        config.region_kind = str(region.get("kind", config.region_kind))
        config.region_size = int(region.get("size", config.region_size))
        if "shape" in region:
            config.region_shape = [int(s) for s in region["shape"]]
        if "points" in region:
            config.region_points = [[int(c) for c in p] for p in region["points"]]
        config.fat_side = int(region.get("cube", config.fat_side))
        if "base" in region:
            config.fat_base = [[int(c) for c in p] for p in region["base"]]

    @classmethod
    def _apply_boundary_config(cls, config: ExperimentConfig, bc: dict[str, Any]) -> None:
        config.boundary_kind = str(bc.get("kind", config.boundary_kind))
        config.boundary_spin = int(bc.get("symbol", config.boundary_spin))
        if "assignment" in bc:
            config.boundary_assignment = [[list(p), int(s)] for p, s in bc["assignment"]]

    @classmethod
    def _apply_weights_config(cls, config: ExperimentConfig, weights: dict[str, Any]) -> None:
        config.weights_preset = str(weights.get("preset", config.weights_preset))
        config.weights_max_size = int(weights.get("max_size", config.weights_max_size))
        if "blocks" in weights:
            config.weights_blocks = [[[list(p) for p in pts], float(w)] for pts, w in weights["blocks"]]

    @classmethod
    def _apply_checks_config(cls, config: ExperimentConfig, checks: Any, disabled: Any) -> None:
        if isinstance(checks, str):
            checks = [checks]
        if isinstance(checks, list):
            config.checks = [str(name) for name in checks]
        if isinstance(disabled, str):
            disabled = [disabled]
        if isinstance(disabled, list):
            config.checks_disabled = [str(name) for name in disabled]

    @classmethod
    def _apply_optimizer_config(cls, config: ExperimentConfig, opt: dict[str, Any]) -> None:
        config.optimizer_starts = int(opt.get("starts", config.optimizer_starts))
        config.optimizer_max_iter = int(opt.get("max_iter", config.optimizer_max_iter))
        config.optimizer_floor = float(opt.get("floor", config.optimizer_floor))
        config.optimizer_step = float(opt.get("step", config.optimizer_step))
        config.optimizer_tol = float(opt.get("tol", config.optimizer_tol))
        config.samples = int(opt.get("samples", config.samples))

    @classmethod
    def _apply_dynamics_config(cls, config: ExperimentConfig, dyn: dict[str, Any]) -> None:
        config.horizon = float(dyn.get("horizon", config.horizon))
        config.interval = float(dyn.get("interval", config.interval))
        config.replicas = int(dyn.get("replicas", config.replicas))
        if "tv_times" in dyn:
            config.tv_times = [float(t) for t in dyn["tv_times"]]
        config.ssm_max_distance = int(dyn.get("ssm_max_distance", config.ssm_max_distance))
        config.ssm_relax_hard = parse_bool(dyn.get("ssm_relax_hard"), config.ssm_relax_hard)

    @classmethod
    def _apply_logging_config(cls, config: ExperimentConfig, logging_cfg: dict[str, Any]) -> None:
        config.log_level = str(logging_cfg.get("level", config.log_level)).upper()

    @staticmethod
    def _validate(config: ExperimentConfig) -> None:
        """Reject settings that would fail later, before any table is built."""
        checks = [
            (config.model_name in MODEL_NAMES, f"model.name must be one of {MODEL_NAMES}, got '{config.model_name}'"),
            (config.region_kind in REGION_KINDS, f"region.kind must be one of {REGION_KINDS}"),
            (config.boundary_kind in BOUNDARY_KINDS, f"boundary.kind must be one of {BOUNDARY_KINDS}"),
            (config.weights_preset in WEIGHT_PRESETS, f"weights.preset must be one of {WEIGHT_PRESETS}"),
            (config.q >= 2, f"q must be at least 2, got {config.q}"),
            (config.region_size > 0, f"region.size must be positive, got {config.region_size}"),
            (config.cap_states > 0, f"cap_states must be positive, got {config.cap_states}"),
            (config.optimizer_starts >= 0, "optimizer.starts must be nonnegative"),
            (config.optimizer_max_iter > 0, "optimizer.max_iter must be positive"),
            (config.samples > 0, "optimizer.samples must be positive"),
            (config.horizon > 0 and config.interval > 0, "dynamics.horizon and interval must be positive"),
            (config.replicas > 0, "dynamics.replicas must be positive"),
            (config.weights_max_size > 0, "weights.max_size must be positive"),
            (config.model_name != "file" or config.model_path is not None, "model.path is required for name 'file'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if config.model_name == "hardcore" and config.lam <= 0:
            msg = f"model.lam must be positive, got {config.lam}"
            raise ConfigError(msg)
        for _, w in config.weights_blocks:
            if w < 0:
                msg = f"Block weights must be nonnegative, got {w}"
                raise ConfigError(msg)
        if config.threads is not None and config.threads <= 0:
            msg = f"threads must be positive, got {config.threads}"
            raise ConfigError(msg)

    def apply_overrides(
        self,
        seed: int | None = None,
        threads: int | None = None,
        cap_states: int | None = None,
        output_dir: Path | None = None,
    ) -> None:
        """Command-line flags win over file values."""
        if seed is not None:
            self.seed = seed
        if threads is not None:
            self.threads = threads
        if cap_states is not None:
            self.cap_states = cap_states
        if output_dir is not None:
            self.output_dir = output_dir
        self._validate(self)

    # --- builders ------------------------------------------------------------

    def build_model(self) -> SpinModel:
        match self.model_name:
            case "ising":
                return make_ising(self.beta, self.external_field)
            case "potts":
                return make_potts(self.q, self.beta, self.fields or None)
            case "hardcore":
                return make_hardcore(self.lam)
            case "colorings":
                return make_colorings(self.q, self.build_region().dim)
            case _:
                assert self.model_path is not None
                return load_model(self.model_path)

    def build_region(self) -> Region:
        match self.region_kind:
            case "chain":
                return Region.chain(self.region_size)
            case "rectangle":
                return Region.rectangle(self.region_shape)
            case "points":
                if not self.region_points:
                    msg = "region.points is empty"
                    raise ConfigError(msg)
                return Region(len(self.region_points[0]), tuple(tuple(p) for p in self.region_points))
            case _:
                base = self.fat_base or [[0] * len(self.region_shape)]
                return fat_region(self.fat_side, Region(len(base[0]), tuple(tuple(p) for p in base)))

    def build_boundaries(self, region: Region) -> list[BoundaryCondition]:
        shell = boundary(region)
        match self.boundary_kind:
            case "constant":
                return [BoundaryCondition.constant(self.boundary_spin, shell)]
            case "free":
                return [BoundaryCondition.free_boundary()]
            case "explicit":
                tau = BoundaryCondition(tuple((tuple(p), int(s)) for p, s in self.boundary_assignment))
                if not tau.covers(region):
                    msg = "boundary.assignment does not cover the exterior boundary of the region"
                    raise ConfigError(msg)
                return [tau]
            case _:
                q = self.build_model().q
                if q ** len(shell) > BOUNDARY_SWEEP_LIMIT:
                    msg = f"Boundary sweep of {q}^{len(shell)} conditions exceeds {BOUNDARY_SWEEP_LIMIT}"
                    raise ConfigError(msg)
                return list(BoundaryCondition.sweep(shell, q))

    def build_weights(self, region: Region) -> BlockWeights:
        match self.weights_preset:
            case "singletons":
                return BlockWeights.singletons(region)
            case "even-odd":
                return BlockWeights.even_odd(region)
            case "blocks":
                return BlockWeights.blocks_up_to(region, self.weights_max_size)
            case "full":
                return BlockWeights.full(region)
            case _:
                try:
                    blocks = tuple(
                        (Region(region.dim, tuple(tuple(p) for p in pts)), w) for pts, w in self.weights_blocks
                    )
                    return BlockWeights(region, blocks)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            starts=self.optimizer_starts,
            max_iter=self.optimizer_max_iter,
            floor=self.optimizer_floor,
            step=self.optimizer_step,
            tol=self.optimizer_tol,
            seed=self.seed,
            threads=resolve_threads(self.threads),
        )

    def predicted_states(self) -> int:
        return self.build_model().q ** len(self.build_region())

    # --- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": {
                "name": self.model_name,
                "beta": self.beta,
                "field": self.external_field,
                "q": self.q,
                "fields": self.fields,
                "lam": self.lam,
                "path": str(self.model_path) if self.model_path else None,
            },
            "region": {
                "kind": self.region_kind,
                "size": self.region_size,
                "shape": self.region_shape,
                "points": self.region_points,
                "cube": self.fat_side,
                "base": self.fat_base,
            },
            "boundary": {
                "kind": self.boundary_kind,
                "symbol": self.boundary_spin,
                "assignment": self.boundary_assignment,
            },
            "weights": {
                "preset": self.weights_preset,
                "max_size": self.weights_max_size,
                "blocks": self.weights_blocks,
            },
            "checks": self.checks,
            "checks_disabled": self.checks_disabled,
            "optimizer": {
                "starts": self.optimizer_starts,
                "max_iter": self.optimizer_max_iter,
                "floor": self.optimizer_floor,
                "step": self.optimizer_step,
                "tol": self.optimizer_tol,
                "samples": self.samples,
            },
            "dynamics": {
                "horizon": self.horizon,
                "interval": self.interval,
                "replicas": self.replicas,
                "tv_times": self.tv_times,
                "ssm_max_distance": self.ssm_max_distance,
                "ssm_relax_hard": self.ssm_relax_hard,
            },
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "threads": self.threads,
            "cap_states": self.cap_states,
            "logging": {"level": self.log_level},
        }

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of the settings that affect results."""
        data = self.to_dict()
        for key in ("output_dir", "threads", "logging"):
            data.pop(key)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def save(self, config_path: Path | None = None) -> None:
        """Serialize current settings to a YAML file, creating parent directories as needed."""
        if config_path is None:
            config_path = self.get_config_path()

        config_path.parent.mkdir(parents=True, exist_ok=True)

        with config_path.open("w", encoding="utf-8") as f:
            yaml.dump(self.to_dict(), f, default_flow_style=False, sort_keys=False)
