#!/usr/bin/env python3
"""
Forward-generated marker data from constant-curvature arcs.

Used to exercise the analysis pipeline end to end and by ``arm synth``.
Markers sit at equal arc-length spacing over the distal ``marker_span`` of
the segment (the whole segment when unset); the last marker is at the tip.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgumentError
from ..kinematics import arc_frames
from .trajectory import MocapTrajectory, trajectory_from_positions


def tip_marker_ids(count: int = 5) -> Tuple[str, ...]:
    return tuple(f"tip{k}" for k in range(1, count + 1))


def arc_markers(kappa: float, phi: float, length: float, count: int = 5,
                span: Optional[float] = None) -> np.ndarray:
    """Marker positions (count, 3) on one arc in its base frame; ``span=None`` covers the whole arc."""
    if count < 1:
        raise InvalidArgumentError(f"need at least one marker, got {count}")
    span = length if span is None else span
    if not 0.0 < span <= length:
        raise InvalidArgumentError(f"marker span {span} mm must lie within the arc length {length} mm")
    positions = np.linspace(length - span, length, count) if count > 1 else np.array([length])
    positions = np.maximum(positions, 1e-12 * length)
    _, translation = arc_frames(np.full(count, kappa), np.full(count, phi), positions)
    return translation


def synthesize_sweep(theta_max: float, length: float, theta_steps: int = 12, phi_steps: int = 16,
                     marker_count: int = 5, marker_span: Optional[float] = None,
                     frame_rate: float = 100.0) -> MocapTrajectory:
    """One frame per (theta, phi) grid sample of a single segment."""
    if not 0.0 < theta_max <= math.pi:
        raise InvalidArgumentError(f"theta_max must lie in (0, pi], got {theta_max}")
    if theta_steps < 1 or phi_steps < 1:
        raise InvalidArgumentError("theta_steps and phi_steps must be at least 1")
    thetas = np.linspace(0.0, theta_max, theta_steps) if theta_steps > 1 else np.zeros(1)
    phis = np.arange(phi_steps) * (2.0 * math.pi / phi_steps)
    frames: List[np.ndarray] = [
        arc_markers(theta / length, phi, length, marker_count, marker_span)
        for theta in thetas
        for phi in phis
    ]
    return trajectory_from_positions(frames, tip_marker_ids(marker_count), frame_rate)


def synthesize_bending(kappas: Sequence[float], length: float, phi: float = 0.0,
                       marker_count: int = 5, marker_span: Optional[float] = None,
                       frame_rate: float = 100.0) -> MocapTrajectory:
    """One frame per curvature value, all in the same bending plane."""
    frames = [arc_markers(k, phi, length, marker_count, marker_span) for k in kappas]
    if not frames:
        raise InvalidArgumentError("need at least one curvature value")
    return trajectory_from_positions(frames, tip_marker_ids(marker_count), frame_rate)
