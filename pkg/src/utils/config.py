"""Run configuration: per-stage defaults, YAML loading and hashing."""

import hashlib
import logging
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from src.geometry.types import ScanPlanError
from src.planning.sensors import SensorModel

logger = logging.getLogger(__name__)

WEIGHT_MODES = ("uniform", "density_deficit")


class ConfigError(ScanPlanError):
    """Unknown key or out-of-range value in a run configuration."""
    pass


def _positive(default, **kwargs):
    return field(default=default, metadata={"min": 0.0, "exclusive": True, **kwargs})


@dataclass(frozen=True)
class MeshifyConfig:
    voxel_size: float = _positive(0.10)
    truncation_voxels: float = field(default=3.0, metadata={"min": 2.0})
    normal_k: int = field(default=12, metadata={"min": 3})
    min_component_area_voxels: float = field(default=25.0, metadata={"min": 0.0})
    max_grid_nodes: int = field(default=64_000_000, metadata={"min": 1})

    @property
    def truncation(self) -> float:
        return self.truncation_voxels * self.voxel_size

    @property
    def min_component_area(self) -> float:
        return self.min_component_area_voxels * self.voxel_size ** 2


@dataclass(frozen=True)
class CandidateConfig:
    sample_spacing: float = _positive(0.25)
    ground_spacing: float = _positive(2.0)
    mount_height: float = _positive(1.5)
    clearance_radius: float = field(default=0.5, metadata={"min": 0.0})
    max_ground_rise: float = field(default=1.0, metadata={"min": 0.0})
    ground_slope_deg: float = field(default=30.0, metadata={"min": 0.0, "max": 90.0})
    aerial_spacing: float = _positive(3.0)
    standoff: float = _positive(2.0)
    alt_min: float = field(default=2.0, metadata={"min": 0.0})
    alt_max: float = _positive(20.0)

    def __post_init__(self):
        if self.alt_min > self.alt_max:
            raise ValueError(f"alt_min {self.alt_min} exceeds alt_max {self.alt_max}")

    @property
    def alt_band(self):
        return self.alt_min, self.alt_max


@dataclass(frozen=True)
class SolverConfig:
    target_coverage: float = field(default=0.98, metadata={"min": 0.0, "exclusive": True, "max": 1.0})
    min_gain: float = field(default=0.05, metadata={"min": 0.0})
    max_views: int = field(default=64, metadata={"min": 1})
    weight_mode: str = field(default="density_deficit", metadata={"choices": WEIGHT_MODES})
    rho_ref: float = _positive(400.0)
    density_radius: float = _positive(0.25)


@dataclass(frozen=True)
class SimulationConfig:
    coarse_resolution: float = _positive(2.0)
    coarse_range_sigma: float = field(default=0.03, metadata={"min": 0.0})
    pose_jitter_sigma: float = field(default=0.05, metadata={"min": 0.0})
    coarse_decimation: int = field(default=4, metadata={"min": 1})


@dataclass(frozen=True)
class PipelineConfig:
    max_iterations: int = field(default=3, metadata={"min": 1})
    epsilon_stop: float = field(default=0.005, metadata={"min": 0.0})
    seed: int = field(default=0, metadata={"min": 0})
    workers: int = field(default=1, metadata={"min": 1})


SECTIONS = {
    "meshify": MeshifyConfig,
    "candidates": CandidateConfig,
    "sensors.ground": SensorModel,
    "sensors.aerial": SensorModel,
    "solver": SolverConfig,
    "simulation": SimulationConfig,
    "pipeline": PipelineConfig,
}

_ATTRS = {
    "meshify": "meshify",
    "candidates": "candidates",
    "sensors.ground": "ground_sensor",
    "sensors.aerial": "aerial_sensor",
    "solver": "solver",
    "simulation": "simulation",
    "pipeline": "pipeline",
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a planning run, grouped by stage."""

    meshify: MeshifyConfig = field(default_factory=MeshifyConfig)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    ground_sensor: SensorModel = field(default_factory=SensorModel.default_ground)
    aerial_sensor: SensorModel = field(default_factory=SensorModel.default_aerial)
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    @property
    def seed(self) -> int:
        return self.pipeline.seed

    def to_flat(self) -> Dict[str, Any]:
        """Dotted-key mapping of every setting, sorted by key."""
        flat = {}
        for prefix, attr in _ATTRS.items():
            section = getattr(self, attr)
            for f in fields(section):
                flat[f"{prefix}.{f.name}"] = getattr(section, f.name)
        return dict(sorted(flat.items()))

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Build a config from dotted keys on top of the defaults."""
        base = cls()
        grouped: Dict[str, Dict[str, Any]] = {}
        for key, value in data.items():
            prefix, _, name = key.rpartition(".")
            section_cls = SECTIONS.get(prefix)
            if section_cls is None or name not in {f.name for f in fields(section_cls)}:
                raise ConfigError(f"unknown config key: {key}")
            grouped.setdefault(prefix, {})[name] = _coerce(key, _field(section_cls, name), value)

        updates = {}
        for prefix, values in grouped.items():
            attr = _ATTRS[prefix]
            try:
                updates[attr] = replace(getattr(base, attr), **values)
            except ValueError as e:
                raise ConfigError(f"invalid {prefix} settings: {e}") from e
        return replace(base, **updates)

    def with_overrides(self, **flat: Any) -> "RunConfig":
        merged = self.to_flat()
        merged.update(flat)
        return RunConfig.from_flat(merged)

    def config_hash(self) -> str:
        text = "\n".join(f"{key}={value!r}" for key, value in self.to_flat().items())
        return hashlib.md5(text.encode("utf-8")).hexdigest()


def _field(section_cls, name):
    return next(f for f in fields(section_cls) if f.name == name)


def _coerce(key: str, f, value: Any) -> Any:
    kind = float if f.default is MISSING else type(f.default)
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    try:
        if kind is int:
            if float(value) != int(value):
                raise ValueError
            value = int(value)
        elif kind is float:
            value = float(value)
        else:
            value = str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")

    meta = f.metadata
    if "choices" in meta and value not in meta["choices"]:
        raise ConfigError(f"{key}: {value!r} is not one of {', '.join(meta['choices'])}")
    if "min" in meta:
        too_low = value <= meta["min"] if meta.get("exclusive") else value < meta["min"]
        if too_low:
            raise ConfigError(f"{key}: {value!r} is below the allowed minimum {meta['min']}")
    if "max" in meta and value > meta["max"]:
        raise ConfigError(f"{key}: {value!r} is above the allowed maximum {meta['max']}")
    return value


def flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Turn nested mappings into dotted keys; already-dotted keys pass through."""
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


class ConfigLoader:
    """Load run configurations from YAML files."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        self.config_path = Path(config_path) if config_path else None

    def load(self) -> RunConfig:
        if self.config_path is None:
            logger.info("Using default run configuration")
            return RunConfig()
        try:
            with open(self.config_path, "r") as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {self.config_path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"error parsing {self.config_path}: {e}")
        if not isinstance(data, Mapping):
            raise ConfigError(f"{self.config_path} must contain a mapping of settings")

        config = RunConfig.from_flat(flatten(data))
        logger.info(f"Loaded configuration from {self.config_path} (hash {config.config_hash()[:8]})")
        return config

    @staticmethod
    def dump(config: RunConfig) -> str:
        return yaml.safe_dump(config.to_flat(), default_flow_style=False, sort_keys=True)
