"""
Pydantic schemas for project configuration validation.

Every section rejects unknown keys so typos in an experiment definition fail
before any computation starts.
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .calibration import fit_theta_max
from .errors import ConfigError, InvalidArgumentError
from .kinematics import TendonLayout
from .mocap.analysis import FrameAlignment
from .statics import STANDARD_GRAVITY, LoadCase, MaterialParams, SegmentSpec, SolverSettings
from .workspace import SWEEP_MODES, SweepConfig, theta_limit_from_pull


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MaterialConfig(_Strict):
    """Effective stiffness and mass of one silicone grade."""
    bending_stiffness: float = Field(gt=0.0, description="EI, N*mm^2")
    axial_stiffness: float = Field(gt=0.0, description="EA, N")
    linear_density: float = Field(default=0.0, ge=0.0, description="g/mm")
    tension_offset: float = 0.0


class SegmentConfig(_Strict):
    """One segment of the stack; unset fields fall back to the defaults section."""
    material: str
    length: float = Field(default=100.0, gt=0.0)
    pitch_radius: Optional[float] = Field(default=None, gt=0.0)
    outer_radius: Optional[float] = Field(default=None, gt=0.0)
    end_cap_mass: Optional[float] = Field(default=None, ge=0.0)
    tendon_angles_deg: Optional[List[float]] = None

    @field_validator("tendon_angles_deg")
    @classmethod
    def validate_tendon_angles(cls, v):
        """At least three channels."""
        if v is not None and len(v) < 3:
            raise ValueError("tendon_angles_deg needs at least three channels")
        return v


class SolverConfig(_Strict):
    """Equilibrium solver discretization and stopping rules."""
    subdivisions: int = Field(default=20, ge=4)
    inner_tolerance: float = Field(default=1e-8, gt=0.0)
    constraint_tolerance: float = Field(default=1e-6, gt=0.0)
    max_outer_iterations: int = Field(default=50, ge=1)
    max_inner_iterations: int = Field(default=2000, ge=1)
    initial_penalty: float = Field(default=1.0, gt=0.0)


class SweepSettings(_Strict):
    """Workspace grid; the bend limit comes from theta_max, r_max_target or delta_max, in that order."""
    theta_steps: int = Field(default=12, ge=1)
    phi_steps: int = Field(default=16, ge=1)
    theta_max: Optional[float] = Field(default=None, gt=0.0, le=math.pi)
    r_max_target: Optional[float] = Field(default=None, gt=0.0)
    delta_max: Optional[float] = Field(default=None, gt=0.0)
    max_samples: int = Field(default=1_000_000, ge=1)
    bin_height: float = Field(default=5.0, gt=0.0)
    mode: str = "sequential"

    @field_validator("mode")
    @classmethod
    def validate_mode(cls, v):
        """One of the sweep modes."""
        if v not in SWEEP_MODES:
            raise ValueError(f"mode must be one of {', '.join(SWEEP_MODES)}")
        return v


class MocapSettings(_Strict):
    """Marker layout and mocap-to-arm alignment."""
    frame_origin: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    frame_axis: List[float] = Field(default_factory=lambda: [0.0, 0.0, 1.0])
    tip_marker_ids: List[str] = Field(default_factory=lambda: [f"tip{k}" for k in range(1, 6)])
    smoothing_window: int = Field(default=1, ge=1)
    marker_count: int = Field(default=5, ge=3)
    marker_span: Optional[float] = Field(default=None, gt=0.0)  # mm, None = whole segment

    @field_validator("frame_origin", "frame_axis")
    @classmethod
    def validate_vector(cls, v):
        """Three finite components."""
        if len(v) != 3 or not all(math.isfinite(c) for c in v):
            raise ValueError("expected three finite components")
        return v

    @field_validator("frame_axis")
    @classmethod
    def validate_axis(cls, v):
        """Non-zero direction."""
        if math.hypot(*v) == 0.0:
            raise ValueError("frame_axis must be non-zero")
        return v

    @field_validator("smoothing_window")
    @classmethod
    def validate_window(cls, v):
        """Centered windows only."""
        if v % 2 == 0:
            raise ValueError("smoothing_window must be odd")
        return v

    @field_validator("tip_marker_ids")
    @classmethod
    def validate_tip_markers(cls, v):
        """Enough distinct markers for a circle fit."""
        if len(v) < 3 or len(set(v)) != len(v):
            raise ValueError("tip_marker_ids needs at least three distinct ids")
        return v


class DefaultsConfig(_Strict):
    """Values shared by all segments unless a segment overrides them."""
    pitch_radius: float = Field(default=7.0, gt=0.0)
    outer_radius: float = Field(default=12.0, gt=0.0)
    end_cap_mass: float = Field(default=5.0, ge=0.0)
    gravity: float = Field(default=STANDARD_GRAVITY, ge=0.0, description="mm/s^2")
    gravity_enabled: bool = True
    delta_max: float = Field(default=60.0, gt=0.0)


class ProjectConfig(_Strict):
    """Complete project configuration schema."""
    materials: Dict[str, MaterialConfig]
    segments: List[SegmentConfig]
    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    mocap: MocapSettings = Field(default_factory=MocapSettings)
    defaults: DefaultsConfig = Field(default_factory=DefaultsConfig)

    @model_validator(mode="after")
    def validate_references(self):
        """Segments reference known materials and keep tendons inside the body."""
        if not self.segments:
            raise ValueError("at least one segment is required")
        for index, segment in enumerate(self.segments, start=1):
            if segment.material not in self.materials:
                raise ValueError(f"segment {index} references unknown material '{segment.material}'")
            pitch = segment.pitch_radius or self.defaults.pitch_radius
            outer = segment.outer_radius or self.defaults.outer_radius
            if pitch >= outer:
                raise ValueError(f"segment {index}: pitch radius {pitch} mm must be below outer radius {outer} mm")
            try:
                self.layout(segment)
            except InvalidArgumentError as e:
                raise ValueError(f"segment {index}: {e}") from e
        return self

    def material(self, name: str) -> MaterialParams:
        if name not in self.materials:
            raise ConfigError(f"unknown material '{name}' (known: {', '.join(sorted(self.materials))})")
        entry = self.materials[name]
        return MaterialParams(name, entry.bending_stiffness, entry.axial_stiffness,
                              entry.linear_density, entry.tension_offset)

    def layout(self, segment: SegmentConfig) -> TendonLayout:
        pitch = segment.pitch_radius or self.defaults.pitch_radius
        outer = segment.outer_radius or self.defaults.outer_radius
        if segment.tendon_angles_deg is None:
            return TendonLayout.symmetric(pitch, 3, outer)
        return TendonLayout(pitch, tuple(math.radians(a) for a in segment.tendon_angles_deg), outer)

    def segment_specs(self, count: Optional[int] = None, material: Optional[str] = None,
                      length: Optional[float] = None) -> List[SegmentSpec]:
        """Domain segments for the first ``count`` configured segments, with optional overrides."""
        count = len(self.segments) if count is None else count
        if not 1 <= count <= len(self.segments):
            raise ConfigError(f"segment count must be between 1 and {len(self.segments)}, got {count}")
        specs = []
        for segment in self.segments[:count]:
            cap = self.defaults.end_cap_mass if segment.end_cap_mass is None else segment.end_cap_mass
            specs.append(SegmentSpec(
                length=segment.length if length is None else length,
                layout=self.layout(segment),
                material=self.material(material or segment.material),
                end_cap_mass=cap,
            ))
        return specs

    def solver_settings(self) -> SolverSettings:
        """Solver settings; the CC-fit markers cover the configured tip-marker span."""
        return SolverSettings(
            subdivisions=self.solver.subdivisions,
            inner_tolerance=self.solver.inner_tolerance,
            constraint_tolerance=self.solver.constraint_tolerance,
            max_outer_iterations=self.solver.max_outer_iterations,
            max_inner_iterations=self.solver.max_inner_iterations,
            initial_penalty=self.solver.initial_penalty,
            marker_count=self.mocap.marker_count,
            marker_span=self.mocap.marker_span,
        )

    def load_case(self, payload: float = 0.0, gravity_enabled: Optional[bool] = None) -> LoadCase:
        enabled = self.defaults.gravity_enabled if gravity_enabled is None else gravity_enabled
        return LoadCase(payload, self.defaults.gravity, enabled)

    def theta_limits(self, count: int) -> List[float]:
        limits = []
        for spec in self.segment_specs(count):
            if self.sweep.theta_max is not None:
                limits.append(self.sweep.theta_max)
            elif self.sweep.r_max_target is not None:
                limits.append(fit_theta_max(self.sweep.r_max_target, spec.length))
            else:
                delta = self.sweep.delta_max or self.defaults.delta_max
                limits.append(theta_limit_from_pull(delta, spec.layout.pitch_radius))
        return limits

    def sweep_config(self, count: int, theta_steps: Optional[int] = None, phi_steps: Optional[int] = None,
                     theta_max: Optional[float] = None, mode: Optional[str] = None) -> SweepConfig:
        limits = [theta_max] * count if theta_max is not None else self.theta_limits(count)
        return SweepConfig(
            theta_max=tuple(limits),
            lengths=tuple(s.length for s in self.segments[:count]),
            theta_steps=theta_steps or self.sweep.theta_steps,
            phi_steps=phi_steps or self.sweep.phi_steps,
            max_samples=self.sweep.max_samples,
            mode=mode or self.sweep.mode,
        )

    def alignment(self) -> FrameAlignment:
        return FrameAlignment(tuple(self.mocap.frame_origin), tuple(self.mocap.frame_axis))


def load_config(path: Union[str, Path]) -> ProjectConfig:
    """Load and validate a project configuration (.json, .yaml or .yml)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        config = ProjectConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration {path}:\n{e}") from e
    logger.debug(f"configuration loaded and validated from {path}")
    return config
