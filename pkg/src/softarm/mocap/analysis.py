#!/usr/bin/env python3
"""
Measured quantities from marker trajectories: bending angle, tip clouds and
vertical tip series.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger

from ..errors import DegenerateFitError, InvalidArgumentError
from ..workspace import PointCloud
from .circle_fit import fit_circle_3d
from .trajectory import MocapTrajectory

MIN_FIT_MARKERS = 3


@dataclass(frozen=True)
class FrameAlignment:
    """Mocap-to-arm frame: the arm axis passes through ``origin`` along ``axis``."""
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self) -> None:
        if not np.linalg.norm(self.axis) > 0.0:
            raise InvalidArgumentError("alignment axis must be non-zero")

    def rotation(self) -> np.ndarray:
        """Smallest rotation taking the configured axis onto +z."""
        a = np.asarray(self.axis, dtype=float)
        a = a / np.linalg.norm(a)
        z = np.array([0.0, 0.0, 1.0])
        cross = np.cross(a, z)
        sin, cos = np.linalg.norm(cross), float(a @ z)
        if sin < 1e-12:
            return np.eye(3) if cos > 0.0 else np.diag([1.0, -1.0, -1.0])
        k = cross / sin
        skew = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
        return np.eye(3) + sin * skew + (1.0 - cos) * skew @ skew

    def apply(self, points: np.ndarray) -> np.ndarray:
        shifted = np.asarray(points, dtype=float).reshape(-1, 3) - np.asarray(self.origin, dtype=float)
        return shifted @ self.rotation().T


def bending_angle_series(trajectory: MocapTrajectory, tip_marker_ids: Sequence[str],
                         length: float) -> List[Tuple[float, float]]:
    """(time s, bend angle rad) per frame from a circle through the tip markers.

    The fitted curvature is extrapolated over ``length``. Frames with fewer
    than three tip markers are skipped; collinear markers read as straight.
    """
    if length <= 0.0:
        raise InvalidArgumentError(f"arc length must be positive, got {length}")
    if len(tip_marker_ids) < MIN_FIT_MARKERS:
        raise InvalidArgumentError(f"need at least {MIN_FIT_MARKERS} tip markers")
    series: List[Tuple[float, float]] = []
    skipped = 0
    for frame in trajectory.frames:
        points = [frame.markers[m] for m in tip_marker_ids if m in frame.markers]
        if len(points) < MIN_FIT_MARKERS:
            skipped += 1
            continue
        try:
            angle = length / fit_circle_3d(np.array(points)).radius
        except DegenerateFitError:
            angle = 0.0
        series.append((frame.time, angle))
    if skipped:
        logger.warning(f"skipped {skipped} frames with fewer than {MIN_FIT_MARKERS} tip markers")
    if not series:
        raise InvalidArgumentError("no frame has enough tip markers for a circle fit")
    return series


def _marker_points(trajectory: MocapTrajectory, marker_id: str) -> Tuple[np.ndarray, np.ndarray]:
    rows = [(f.time, f.markers[marker_id]) for f in trajectory.frames if marker_id in f.markers]
    if not rows:
        raise InvalidArgumentError(f"marker {marker_id!r} does not appear in the trajectory")
    return np.array([t for t, _ in rows]), np.array([p for _, p in rows])


def tip_cloud(trajectory: MocapTrajectory, tip_marker_id: str,
              alignment: FrameAlignment = FrameAlignment()) -> PointCloud:
    """One point per frame in which the marker is visible, in the arm frame."""
    _, points = _marker_points(trajectory, tip_marker_id)
    return PointCloud(alignment.apply(points))


def vertical_series(trajectory: MocapTrajectory, marker_id: str,
                    alignment: FrameAlignment = FrameAlignment()) -> List[Tuple[float, float]]:
    """(time s, height mm) of one marker: mocap Z, which points against gravity, relative to the origin."""
    times, points = _marker_points(trajectory, marker_id)
    z = points[:, 2] - alignment.origin[2]
    return list(zip(times.tolist(), z.tolist()))
