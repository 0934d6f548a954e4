"""Motion-capture ingestion, filtering and measurement."""

from .analysis import FrameAlignment, bending_angle_series, tip_cloud, vertical_series
from .circle_fit import CircleFit, fit_circle_3d
from .filters import smooth_trajectory
from .trajectory import (
    MocapFrame,
    MocapTrajectory,
    parse_mocap_csv,
    read_mocap_csv,
    trajectory_from_positions,
    write_mocap_csv,
)

__all__ = [
    "CircleFit",
    "FrameAlignment",
    "MocapFrame",
    "MocapTrajectory",
    "bending_angle_series",
    "fit_circle_3d",
    "parse_mocap_csv",
    "read_mocap_csv",
    "smooth_trajectory",
    "tip_cloud",
    "trajectory_from_positions",
    "vertical_series",
    "write_mocap_csv",
]
