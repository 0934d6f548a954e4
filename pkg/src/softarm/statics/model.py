#!/usr/bin/env python3
"""
Data model for planar statics of stacked segments.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgumentError
from ..kinematics import TendonLayout

STANDARD_GRAVITY = 9806.65  # mm/s^2
MIN_SUBDIVISIONS = 4


@dataclass(frozen=True)
class MaterialParams:
    """Effective rod stiffness and mass of one silicone grade."""
    name: str
    bending_stiffness: float  # EI, N*mm^2
    axial_stiffness: float  # EA, N
    linear_density: float = 0.0  # g/mm
    tension_offset: float = 0.0  # N, added to reported taut-tendon tensions

    def __post_init__(self) -> None:
        if not self.bending_stiffness > 0.0:
            raise InvalidArgumentError(f"{self.name}: bending stiffness must be positive")
        if not self.axial_stiffness > 0.0:
            raise InvalidArgumentError(f"{self.name}: axial stiffness must be positive")
        if self.linear_density < 0.0:
            raise InvalidArgumentError(f"{self.name}: linear density must be non-negative")

    def with_stiffness(self, bending_stiffness: float, axial_stiffness: float,
                       tension_offset: Optional[float] = None) -> "MaterialParams":
        return MaterialParams(
            self.name,
            bending_stiffness,
            axial_stiffness,
            self.linear_density,
            self.tension_offset if tension_offset is None else tension_offset,
        )


@dataclass(frozen=True)
class SegmentSpec:
    """Geometry and material of one stackable segment."""
    length: float
    layout: TendonLayout
    material: MaterialParams
    end_cap_mass: float = 0.0

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise InvalidArgumentError(f"segment length must be positive, got {self.length}")
        if self.end_cap_mass < 0.0:
            raise InvalidArgumentError(f"end cap mass must be non-negative, got {self.end_cap_mass}")


@dataclass(frozen=True)
class LoadCase:
    """Tip payload and gravity settings."""
    payload_mass: float = 0.0  # g
    gravity_magnitude: float = STANDARD_GRAVITY  # mm/s^2
    gravity_enabled: bool = True

    def __post_init__(self) -> None:
        if self.payload_mass < 0.0:
            raise InvalidArgumentError(f"payload mass must be non-negative, got {self.payload_mass}")

    @property
    def newtons_per_gram(self) -> float:
        """Weight force of one gram (g -> kg and mm/s^2 -> m/s^2)."""
        if not self.gravity_enabled:
            return 0.0
        return self.gravity_magnitude * 1e-6


@dataclass(frozen=True)
class RodState:
    """Per-sub-arc curvature (1/mm, signed in the bending plane) and axial strain."""
    kappa: np.ndarray
    strain: np.ndarray
    subdivisions: int

    def __post_init__(self) -> None:
        kappa = np.asarray(self.kappa, dtype=float).reshape(-1)
        strain = np.asarray(self.strain, dtype=float).reshape(-1)
        if kappa.shape != strain.shape:
            raise InvalidArgumentError("curvature and strain arrays differ in length")
        if self.subdivisions < MIN_SUBDIVISIONS:
            raise InvalidArgumentError(
                f"need at least {MIN_SUBDIVISIONS} sub-arcs per segment, got {self.subdivisions}"
            )
        if kappa.size % self.subdivisions:
            raise InvalidArgumentError("state size is not a multiple of the subdivisions")
        if np.any(strain <= -1.0):
            raise InvalidArgumentError("axial strain must stay above -1")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "strain", strain)

    @property
    def n_segments(self) -> int:
        return self.kappa.size // self.subdivisions

    @property
    def size(self) -> int:
        return self.kappa.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.kappa, self.strain])

    @classmethod
    def from_vector(cls, vector: np.ndarray, subdivisions: int) -> "RodState":
        vector = np.asarray(vector, dtype=float)
        half = vector.size // 2
        return cls(vector[:half].copy(), vector[half:].copy(), subdivisions)

    @classmethod
    def straight(cls, n_segments: int, subdivisions: int) -> "RodState":
        size = n_segments * subdivisions
        return cls(np.zeros(size), np.zeros(size), subdivisions)

    @classmethod
    def uniform(cls, n_segments: int, subdivisions: int, kappa: float,
                strain: float = 0.0) -> "RodState":
        size = n_segments * subdivisions
        return cls(np.full(size, kappa), np.full(size, strain), subdivisions)

    def segment_slice(self, segment: int) -> slice:
        return slice(segment * self.subdivisions, (segment + 1) * self.subdivisions)


@dataclass(frozen=True)
class TendonTension:
    """Tension carried by one actuated tendon."""
    segment: int
    tendon: int
    pull: float  # mm
    tension: float  # N
    slack: bool


@dataclass
class EquilibriumResult:
    """Solved static pose and the quantities measured in the payload experiments."""
    tip_angle: float  # rad, tangent rotation at the measured segment tip
    ccfit_angle: float  # rad
    vertical_displacement: float  # mm
    tendon_tensions: List[TendonTension]
    state: RodState
    nonuniformity: float
    measured_segment: int = 0
    plane_angle: float = 0.0
    energy: float = 0.0
    kkt_residual: float = 0.0
    iterations: int = 0
    segment_angles: List[float] = field(default_factory=list)
    segment_ccfit_angles: List[float] = field(default_factory=list)
    segment_displacements: List[float] = field(default_factory=list)

    @property
    def max_tension(self) -> float:
        return max((t.tension for t in self.tendon_tensions), default=0.0)

    def summary(self) -> Dict[str, float]:
        """Flat report in experiment units (degrees, mm, N)."""
        return {
            "tip_angle_deg": math.degrees(self.tip_angle),
            "ccfit_angle_deg": math.degrees(self.ccfit_angle),
            "vertical_displacement_mm": self.vertical_displacement,
            "max_tension_n": self.max_tension,
            "nonuniformity": self.nonuniformity,
        }


class RodModel:
    """Flattened discretization of a chain: per-sub-arc properties and node weights."""

    def __init__(self, chain: Sequence[SegmentSpec], load: LoadCase, subdivisions: int):
        if not chain:
            raise InvalidArgumentError("chain must contain at least one segment")
        if subdivisions < MIN_SUBDIVISIONS:
            raise InvalidArgumentError(
                f"need at least {MIN_SUBDIVISIONS} sub-arcs per segment, got {subdivisions}"
            )
        self.chain = tuple(chain)
        self.load = load
        self.subdivisions = subdivisions
        n = subdivisions
        self.size = n * len(chain)

        self.ds = np.repeat([seg.length / n for seg in chain], n)
        self.bending = np.repeat([seg.material.bending_stiffness for seg in chain], n)
        self.axial = np.repeat([seg.material.axial_stiffness for seg in chain], n)
        self.segment_of = np.repeat(np.arange(len(chain)), n)

        g = load.newtons_per_gram
        node_weight = np.zeros(self.size + 1)
        sub_weight = np.repeat([seg.material.linear_density for seg in chain], n) * self.ds * g
        node_weight[:-1] += 0.5 * sub_weight
        node_weight[1:] += 0.5 * sub_weight
        for index, seg in enumerate(chain):
            node_weight[(index + 1) * n] += seg.end_cap_mass * g
        node_weight[-1] += load.payload_mass * g
        self.node_weight = node_weight
        # weight carried distal of each sub-arc (nodes j+1 .. end)
        self.distal_weight = np.cumsum(node_weight[::-1])[::-1][1:]

    @property
    def n_segments(self) -> int:
        return len(self.chain)

    def check(self, state: RodState) -> None:
        if state.subdivisions != self.subdivisions or state.size != self.size:
            raise InvalidArgumentError(
                f"state has {state.size} sub-arcs ({state.subdivisions} per segment); "
                f"chain needs {self.size} ({self.subdivisions} per segment)"
            )

    def segment_slice(self, segment: int) -> slice:
        return slice(segment * self.subdivisions, (segment + 1) * self.subdivisions)

    def segment_end_node(self, segment: int) -> int:
        return (segment + 1) * self.subdivisions

    def rest_length_to(self, segment: int) -> float:
        """Rest backbone length from the mount to the tip of ``segment``."""
        return float(sum(seg.length for seg in self.chain[: segment + 1]))

    def moment_arm(self, segment: int, tendon: int, plane_angle: float) -> float:
        layout = self.chain[segment].layout
        return layout.pitch_radius * math.cos(plane_angle - layout.angles[tendon])

    def tendon_row(self, segment: int, tendon: int, plane_angle: float) -> np.ndarray:
        """Gradient of the tendon path length with respect to (kappa, strain).

        The tendon runs through the central backbone of proximal segments and
        through its offset channel in its own segment.
        """
        row = np.zeros(2 * self.size)
        end = self.segment_end_node(segment)
        own = self.segment_slice(segment)
        row[self.size : self.size + end] = self.ds[:end]
        row[own] = -self.moment_arm(segment, tendon, plane_angle) * self.ds[own]
        return row


def actuated_tendons(command_pulls: Sequence[Sequence[float]]) -> List[Tuple[int, int, float]]:
    """(segment, tendon, pull) for every tendon with a positive pull."""
    return [
        (segment, tendon, float(pull))
        for segment, pulls in enumerate(command_pulls)
        for tendon, pull in enumerate(pulls)
        if pull > 0.0
    ]
