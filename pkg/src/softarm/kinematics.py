#!/usr/bin/env python3
"""
Piecewise-constant-curvature kinematics for stacked tendon-driven segments.

Each segment is an arc described by curvature ``kappa`` (1/mm, never negative),
bending-plane angle ``phi`` (rad, measured about the segment base z-axis) and
arc length ``length`` (mm). Arcs compose base-to-tip, each one expressed in the
tip frame of the previous arc.
"""

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import GeometryViolationError, InvalidArgumentError, NoSolutionError

TWO_PI = 2.0 * math.pi

# Below this |kappa * length| the series expansions replace the closed forms.
SMALL_BEND = 1e-6


def normalize_angle(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod can return exactly 2*pi after the shift for tiny negative inputs
    return 0.0 if wrapped >= TWO_PI else wrapped


@dataclass(frozen=True)
class ArcParams:
    """Constant-curvature arc: curvature, bending-plane angle, arc length."""
    kappa: float
    phi: float
    length: float

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise InvalidArgumentError(f"arc length must be positive, got {self.length}")
        if self.kappa < 0.0:
            raise InvalidArgumentError(f"curvature must be non-negative, got {self.kappa}")
        if self.kappa * self.length >= TWO_PI:
            raise InvalidArgumentError(
                f"bend angle {self.kappa * self.length:.6f} rad closes a full loop"
            )
        object.__setattr__(self, "phi", normalize_angle(float(self.phi)))

    @property
    def theta(self) -> float:
        """Total bend angle of the arc."""
        return self.kappa * self.length


@dataclass(frozen=True)
class TendonLayout:
    """Angular positions of the tendon channels around the backbone."""
    pitch_radius: float
    angles: Tuple[float, ...] = (0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0)
    outer_radius: float = math.inf

    def __post_init__(self) -> None:
        if not self.pitch_radius > 0.0:
            raise InvalidArgumentError(f"pitch radius must be positive, got {self.pitch_radius}")
        if self.pitch_radius >= self.outer_radius:
            raise InvalidArgumentError(
                f"pitch radius {self.pitch_radius} mm must be inside the outer radius {self.outer_radius} mm"
            )
        if len(self.angles) < 2:
            raise InvalidArgumentError("a tendon layout needs at least two tendons")
        wrapped = sorted(normalize_angle(a) for a in self.angles)
        gaps = np.diff(wrapped + [wrapped[0] + TWO_PI])
        if np.min(gaps) < 1e-9:
            raise InvalidArgumentError("tendon angles must be distinct modulo 2*pi")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @classmethod
    def symmetric(cls, pitch_radius: float, count: int = 3,
                  outer_radius: float = math.inf) -> "TendonLayout":
        """Equally spaced layout with the first tendon at angle 0."""
        if count < 3:
            raise InvalidArgumentError(f"a symmetric layout needs at least 3 tendons, got {count}")
        return cls(pitch_radius, tuple(TWO_PI * i / count for i in range(count)), outer_radius)

    @property
    def count(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation (mm)."""
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=float).reshape(3)
        if np.max(np.abs(rotation @ rotation.T - np.eye(3))) > 1e-9:
            raise InvalidArgumentError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > 1e-9:
            raise InvalidArgumentError("rotation matrix must have determinant +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points (..., 3) from the local frame into the parent frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix


@dataclass(frozen=True)
class ActuationCommand:
    """Per-segment tendon pull displacements (mm)."""
    pulls: Tuple[Tuple[float, ...], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        pulls = tuple(tuple(float(p) for p in segment) for segment in self.pulls)
        for index, segment in enumerate(pulls):
            if any(p < 0.0 for p in segment):
                raise InvalidArgumentError(f"segment {index + 1}: tendon pulls must be non-negative")
            if len(segment) >= 2 and all(p > 0.0 for p in segment):
                raise InvalidArgumentError(
                    f"segment {index + 1}: every tendon pulled at once is an antagonistic command"
                )
        object.__setattr__(self, "pulls", pulls)

    @classmethod
    def single(cls, n_segments: int, segment: int, tendon: int, pull: float,
               n_tendons: int = 3) -> "ActuationCommand":
        """Command pulling one tendon of one segment; all others idle."""
        if not 0 <= segment < n_segments:
            raise InvalidArgumentError(f"segment index {segment} outside chain of {n_segments}")
        if not 0 <= tendon < n_tendons:
            raise InvalidArgumentError(f"tendon index {tendon} outside layout of {n_tendons}")
        pulls = [[0.0] * n_tendons for _ in range(n_segments)]
        pulls[segment][tendon] = pull
        return cls(tuple(tuple(p) for p in pulls))

    @property
    def n_segments(self) -> int:
        return len(self.pulls)

    def validate(self, delta_max: float) -> None:
        """Check every pull against the configured maximum displacement."""
        for index, segment in enumerate(self.pulls):
            for tendon, pull in enumerate(segment):
                if pull > delta_max:
                    raise InvalidArgumentError(
                        f"segment {index + 1} tendon {tendon + 1}: pull {pull} mm exceeds delta_max {delta_max} mm"
                    )


def _planar_offsets(theta: np.ndarray, length: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """In-plane tip offsets (1 - cos t) * l / t and sin t * l / t with series near t = 0."""
    theta = np.asarray(theta, dtype=float)
    length = np.asarray(length, dtype=float)
    small = np.abs(theta) < SMALL_BEND
    safe = np.where(small, 1.0, theta)
    radial = np.where(small, length * theta / 2.0, length * (1.0 - np.cos(safe)) / safe)
    axial = np.where(small, length * (1.0 - theta * theta / 6.0), length * np.sin(safe) / safe)
    return radial, axial


def arc_frames(kappa: np.ndarray, phi: np.ndarray, length: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized arc transforms.

    Returns rotations of shape (n, 3, 3) and translations of shape (n, 3).
    The rotation is Rz(phi) @ Ry(kappa * length) @ Rz(-phi).
    """
    kappa, phi, length = np.broadcast_arrays(
        np.atleast_1d(np.asarray(kappa, dtype=float)),
        np.atleast_1d(np.asarray(phi, dtype=float)),
        np.atleast_1d(np.asarray(length, dtype=float)),
    )
    theta = kappa * length
    radial, axial = _planar_offsets(theta, length)
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)

    rotation = np.empty(theta.shape + (3, 3))
    rotation[..., 0, 0] = cp * cp * ct + sp * sp
    rotation[..., 0, 1] = cp * sp * (ct - 1.0)
    rotation[..., 0, 2] = cp * st
    rotation[..., 1, 0] = cp * sp * (ct - 1.0)
    rotation[..., 1, 1] = sp * sp * ct + cp * cp
    rotation[..., 1, 2] = sp * st
    rotation[..., 2, 0] = -cp * st
    rotation[..., 2, 1] = -sp * st
    rotation[..., 2, 2] = ct

    translation = np.stack([cp * radial, sp * radial, axial], axis=-1)
    return rotation, translation


def arc_transform(arc: ArcParams) -> RigidTransform:
    """Base-to-tip frame of a constant-curvature arc."""
    rotation, translation = arc_frames(arc.kappa, arc.phi, arc.length)
    return RigidTransform(rotation[0], translation[0])


def arc_points(arc: ArcParams, n: int) -> np.ndarray:
    """``n`` backbone points equally spaced in arc length, base first."""
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 points, got {n}")
    s = np.linspace(0.0, arc.length, n)
    radial, axial = _planar_offsets(arc.kappa * s, s)
    points = np.stack([math.cos(arc.phi) * radial, math.sin(arc.phi) * radial, axial], axis=-1)
    points[0] = 0.0
    return points


def compose_chain(arcs: Sequence[ArcParams]) -> RigidTransform:
    """Product of the per-arc transforms in base-to-tip order."""
    if not arcs:
        raise InvalidArgumentError("cannot compose an empty chain")
    result = RigidTransform.identity()
    for arc in arcs:
        result = result @ arc_transform(arc)
    return result


def chain_points(arcs: Sequence[ArcParams], n: int) -> np.ndarray:
    """Backbone polyline of a whole chain, ``n`` samples per arc (shared joints once)."""
    if not arcs:
        raise InvalidArgumentError("cannot sample an empty chain")
    frame = RigidTransform.identity()
    pieces: List[np.ndarray] = []
    for index, arc in enumerate(arcs):
        points = frame.apply(arc_points(arc, n))
        pieces.append(points if index == 0 else points[1:])
        frame = frame @ arc_transform(arc)
    return np.concatenate(pieces, axis=0)


def tendon_lengths(arc: ArcParams, layout: TendonLayout) -> np.ndarray:
    """Path length of every tendon channel along the arc (mm)."""
    kd = arc.kappa * layout.pitch_radius
    if kd >= 1.0:
        raise GeometryViolationError(
            f"kappa * d = {kd:.6f} >= 1: the tendon channel would cross the bending axis"
        )
    psi = np.asarray(layout.angles)
    return arc.length * (1.0 - kd * np.cos(arc.phi - psi))


def arc_from_tendon_lengths(lengths: Sequence[float], layout: TendonLayout) -> ArcParams:
    """Arc whose tendon paths equal ``lengths``.

    Solves l_i = L - u cos(psi_i) - v sin(psi_i) for the backbone length L and
    (u, v) = L * kappa * d * (cos phi, sin phi). Exact for three tendons; for
    larger layouts the least-squares solution must reproduce the lengths.
    """
    lengths = np.asarray(lengths, dtype=float)
    if lengths.shape != (layout.count,):
        raise InvalidArgumentError(
            f"expected {layout.count} tendon lengths, got {lengths.shape[0] if lengths.ndim else 0}"
        )
    psi = np.asarray(layout.angles)
    design = np.column_stack([np.ones_like(psi), -np.cos(psi), -np.sin(psi)])
    solution, *_ = np.linalg.lstsq(design, lengths, rcond=None)
    backbone, u, v = (float(x) for x in solution)
    scale = max(1.0, float(np.max(np.abs(lengths))))
    if np.max(np.abs(design @ solution - lengths)) > 1e-9 * scale:
        raise NoSolutionError("tendon lengths are not consistent with any constant-curvature arc")
    if backbone <= 0.0:
        raise NoSolutionError(f"tendon lengths imply a non-positive backbone length {backbone:.6f} mm")
    moment = math.hypot(u, v)
    kappa = moment / (backbone * layout.pitch_radius)
    phi = math.atan2(v, u) if moment > 0.0 else 0.0
    if kappa * backbone >= TWO_PI:
        raise NoSolutionError("tendon lengths imply a bend beyond a full loop")
    return ArcParams(kappa, phi, backbone)


def arc_from_pulls(pulls: Sequence[float], layout: TendonLayout, length: float) -> ArcParams:
    """Arc produced by one segment's tendon pulls (delta_i = length - l_i).

    Pulls are geometric here and may be negative for tendons that pay out on
    the outside of the bend; motor commands are checked by ActuationCommand.
    The common-mode part of the pulls shortens the backbone, so the returned
    arc length can be smaller than ``length``. Pulls without a differential
    component (e.g. every tendon pulled equally) have no bending solution.
    """
    pulls = np.asarray(pulls, dtype=float)
    if not length > 0.0:
        raise InvalidArgumentError(f"segment length must be positive, got {length}")
    if not np.any(pulls != 0.0):
        return ArcParams(0.0, 0.0, length)
    arc = arc_from_tendon_lengths(length - pulls, layout)
    if arc.kappa * length < 1e-12:
        if abs(arc.length - length) > 1e-9 * length:
            raise NoSolutionError("pulls produce no bending: equal pulls only compress the backbone")
        return ArcParams(0.0, 0.0, length)
    return arc
