"""
Centralized configuration management with validation for AttractorLab.

Configuration is flat: every key is unique across sections, so one
``key = value`` file or one set of ``LAB_<KEY>`` environment variables
fills all of them.
"""

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union, get_args, get_origin

from utils.logger import info, debug, error as log_error

ENV_PREFIX = "LAB_"


def _coerce(kind: Any, raw: Any) -> Any:
    """Convert a raw string (or value) to the declared field type."""
    if raw is None:
        return None
    if get_origin(kind) is Union:
        if str(raw).strip().lower() in ('', 'none', 'auto'):
            return None
        kind = next(arg for arg in get_args(kind) if arg is not type(None))
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in ('1', 'true', 'yes', 'on')
    if kind is int:
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got '{raw}'")
        return int(value)
    if kind is float:
        return float(raw)
    return raw


class _FlatSection:
    """Shared loading helpers for the dataclass sections below."""

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]):
        kwargs = {}
        for f in fields(cls):
            if f.name in values and values[f.name] is not None:
                kwargs[f.name] = _coerce(f.type, values[f.name])
        return cls(**kwargs)

    @classmethod
    def from_environment(cls):
        values = {}
        for name in cls.keys():
            raw = os.getenv(f"{ENV_PREFIX}{name.upper()}")
            if raw is not None:
                values[name] = raw
        return cls.from_mapping(values)

    def with_overrides(self, overrides: Mapping[str, Any]):
        known = {k: v for k, v in overrides.items() if k in self.keys() and v is not None}
        if not known:
            return self
        coerced = {f.name: _coerce(f.type, known[f.name]) for f in fields(self) if f.name in known}
        return replace(self, **coerced)


@dataclass
class ClassThresholds(_FlatSection):
    """Thresholds of the forcing-class classifier.

    ``decay`` is ``decay_ratio * lpb_norm(g)**p`` so verdicts are invariant
    under rescaling of the signal.
    """

    decay_ratio: float = 1e-3
    growth_factor: float = 10.0
    floor_factor: float = 10.0
    retention: float = 0.5
    resolution_steps: int = 8
    tau_max: float = 1.0
    amplitude_octaves: int = 2
    max_workers: int = 4

    def validate(self) -> List[str]:
        errors = []
        if not 0.0 < self.decay_ratio < 1.0:
            errors.append("decay_ratio must lie in (0, 1)")
        if self.growth_factor <= 1.0:
            errors.append("growth_factor must exceed 1")
        if self.floor_factor < 1.0:
            errors.append("floor_factor must be at least 1")
        if not 0.0 < self.retention <= 1.0:
            errors.append("retention must lie in (0, 1]")
        if self.resolution_steps < 1:
            errors.append("resolution_steps must be a positive integer")
        if self.tau_max <= 0.0:
            errors.append("tau_max must be positive")
        if self.amplitude_octaves < 0:
            errors.append("amplitude_octaves must be non-negative")
        if self.max_workers < 1:
            errors.append("max_workers must be a positive integer")
        return errors


@dataclass
class CompactnessThresholds(_FlatSection):
    """Thresholds of the snapshot-cloud verdict."""

    tail_decay_ratio: float = 1e-3
    tail_floor_factor: float = 10.0
    plateau_tolerance: float = 0.05
    plateau_points: int = 3
    gap_ratio: float = 1e-3

    def validate(self) -> List[str]:
        errors = []
        if not 0.0 < self.tail_decay_ratio < 1.0:
            errors.append("tail_decay_ratio must lie in (0, 1)")
        if self.tail_floor_factor < 1.0:
            errors.append("tail_floor_factor must be at least 1")
        if not 0.0 < self.plateau_tolerance < 1.0:
            errors.append("plateau_tolerance must lie in (0, 1)")
        if self.plateau_points < 2:
            errors.append("plateau_points must be at least 2")
        if not 0.0 < self.gap_ratio < 1.0:
            errors.append("gap_ratio must lie in (0, 1)")
        return errors


@dataclass
class ScenarioParameters(_FlatSection):
    """Overridable numeric parameters of a scenario run.

    ``None`` means "use the scenario's own default".
    """

    nmax: Optional[int] = None
    dt: Optional[float] = None
    modes: Optional[int] = None
    L: Optional[float] = None
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    p: float = 2.0
    t_end: Optional[float] = None
    grid_points: Optional[int] = None
    width: Optional[float] = None
    seedless: bool = False

    def resolve(self, name: str, default: Any) -> Any:
        value = getattr(self, name)
        return default if value is None else value

    def validate(self) -> List[str]:
        errors = []
        if self.nmax is not None and self.nmax < 1:
            errors.append("nmax must be a positive integer")
        if self.dt is not None and self.dt <= 0.0:
            errors.append("dt must be positive")
        if self.modes is not None and self.modes < 1:
            errors.append("modes must be a positive integer")
        if self.L is not None and self.L <= 0.0:
            errors.append("L must be positive")
        if self.alpha is not None and self.alpha < 0.0:
            errors.append("alpha must be non-negative")
        if self.gamma is not None and self.gamma <= 0.0:
            errors.append("gamma must be positive")
        if not self.p > 1.0:
            errors.append("p must exceed 1")
        if self.t_end is not None and self.t_end <= 0.0:
            errors.append("t_end must be positive")
        if self.grid_points is not None and self.grid_points < 3:
            errors.append("grid_points must be at least 3")
        if self.width is not None and self.width <= 0.0:
            errors.append("width must be positive")
        return errors


_SECTIONS = (ClassThresholds, CompactnessThresholds, ScenarioParameters)


def read_flat_file(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    known = {name for section in _SECTIONS for name in section.keys()}
    for lineno, raw_line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), 1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got '{raw_line.strip()}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown configuration key '{key}'")
        values[key] = value
    return values


@dataclass
class LabConfiguration:
    """Main application configuration."""

    class_thresholds: ClassThresholds = field(default_factory=ClassThresholds)
    compactness_thresholds: CompactnessThresholds = field(default_factory=CompactnessThresholds)
    scenario: ScenarioParameters = field(default_factory=ScenarioParameters)

    @classmethod
    def from_environment(cls) -> 'LabConfiguration':
        return cls(
            class_thresholds=ClassThresholds.from_environment(),
            compactness_thresholds=CompactnessThresholds.from_environment(),
            scenario=ScenarioParameters.from_environment(),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'LabConfiguration':
        return cls().with_overrides(read_flat_file(path))

    def with_overrides(self, overrides: Mapping[str, Any]) -> 'LabConfiguration':
        return LabConfiguration(
            class_thresholds=self.class_thresholds.with_overrides(overrides),
            compactness_thresholds=self.compactness_thresholds.with_overrides(overrides),
            scenario=self.scenario.with_overrides(overrides),
        )

    def validate(self) -> List[str]:
        return (self.class_thresholds.validate()
                + self.compactness_thresholds.validate()
                + self.scenario.validate())

    def is_valid(self) -> bool:
        return len(self.validate()) == 0


# Module-level config state
_config: Optional[LabConfiguration] = None


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> LabConfiguration:
    """Build the configuration: defaults < environment < file < overrides."""
    global _config
    info("Loading lab configuration...")

    config = LabConfiguration.from_environment()
    if path is not None:
        debug(f"Reading configuration file {path}")
        config = config.with_overrides(read_flat_file(path))
    if overrides:
        config = config.with_overrides(overrides)

    errors = config.validate()
    if errors:
        error_msg = "Configuration validation failed:\n" + "\n".join(f"- {e}" for e in errors)
        log_error(error_msg)
        raise ValueError(error_msg)

    _config = config
    info("Configuration loaded and validated successfully")
    return config


def get_config() -> LabConfiguration:
    if _config is None:
        raise RuntimeError("Configuration not loaded. Call load_config() first.")
    return _config
