#!/usr/bin/env python3
"""
Workspace sweeps of stacked constant-curvature segments and reach metrics.

Two sweep modes are supported. ``grid`` samples every (theta, phi) pair of
every segment independently. ``sequential`` follows the bench protocol: for
each bending plane the tendons are pulled to their limit one segment at a
time, distal segment first, while the segments already pulled hold their
limit and the rest stay straight. Tip points are composed base to tip and
sorted canonically so the cloud does not depend on how the work was split
across worker threads.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from .errors import InvalidArgumentError
from .kinematics import arc_frames
from .reporting import write_csv

HARD_SAMPLE_LIMIT = 10_000_000
CHUNK_SIZE = 65_536
CLOUD_HEADER = ("x_mm", "y_mm", "z_mm")
SWEEP_MODES = ("grid", "sequential")


def thread_count() -> int:
    """Worker threads allowed by ARM_THREADS (unset or 0 means all cores)."""
    raw = os.environ.get("ARM_THREADS", "").strip()
    try:
        requested = int(raw) if raw else 0
    except ValueError:
        logger.warning(f"ignoring non-integer ARM_THREADS={raw!r}")
        requested = 0
    if requested < 0:
        raise InvalidArgumentError(f"ARM_THREADS must be non-negative, got {requested}")
    return requested or (os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepConfig:
    """Per-segment bend limits and lengths plus the sampling grid."""
    theta_max: Tuple[float, ...]  # rad
    lengths: Tuple[float, ...]  # mm
    theta_steps: int = 12
    phi_steps: int = 16
    max_samples: int = 1_000_000
    mode: str = "grid"

    def __post_init__(self) -> None:
        theta_max = tuple(float(t) for t in self.theta_max)
        lengths = tuple(float(v) for v in self.lengths)
        if not theta_max or len(theta_max) != len(lengths):
            raise InvalidArgumentError("need one theta_max and one length per segment")
        for index, (theta, length) in enumerate(zip(theta_max, lengths)):
            if not 0.0 < theta <= math.pi:
                raise InvalidArgumentError(f"segment {index + 1}: theta_max must lie in (0, pi], got {theta}")
            if not length > 0.0:
                raise InvalidArgumentError(f"segment {index + 1}: length must be positive, got {length}")
        if self.theta_steps < 1 or self.phi_steps < 1:
            raise InvalidArgumentError("theta_steps and phi_steps must be at least 1")
        if self.max_samples < 1:
            raise InvalidArgumentError("max_samples must be at least 1")
        if self.mode not in SWEEP_MODES:
            raise InvalidArgumentError(f"sweep mode must be one of {', '.join(SWEEP_MODES)}, got {self.mode!r}")
        object.__setattr__(self, "theta_max", theta_max)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, n_segments: int, theta_max: float, length: float, **grid) -> "SweepConfig":
        return cls((theta_max,) * n_segments, (length,) * n_segments, **grid)

    @property
    def n_segments(self) -> int:
        return len(self.lengths)

    @property
    def grid_size(self) -> int:
        """(theta, phi) samples per segment."""
        return self.theta_steps * self.phi_steps

    @property
    def total_samples(self) -> int:
        if self.mode == "sequential":
            # later stages skip theta = 0, which repeats the previous stage's end pose
            return self.phi_steps * (self.theta_steps + (self.n_segments - 1) * (self.theta_steps - 1))
        return self.grid_size ** self.n_segments


def theta_limit_from_pull(delta_max: float, pitch_radius: float) -> float:
    """Bend limit implied by a maximum single-tendon pull (theta = delta / d), capped at pi."""
    if delta_max <= 0.0 or pitch_radius <= 0.0:
        raise InvalidArgumentError("delta_max and pitch radius must be positive")
    return min(delta_max / pitch_radius, math.pi)


@dataclass(frozen=True)
class PointCloud:
    """Tip positions (mm) in the base frame, z along the arm axis."""
    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def sorted(self) -> "PointCloud":
        """Canonical order: lexicographic by (x, y, z)."""
        p = self.points
        return PointCloud(p[np.lexsort((p[:, 2], p[:, 1], p[:, 0]))])


@dataclass(frozen=True)
class WorkspaceMetrics:
    """Reach, planar area and volumes of a tip cloud."""
    r_max: float  # mm
    planar_area: float  # mm^2
    volume: float  # mm^3
    z_min: float  # mm
    z_max: float  # mm
    envelope_volume: float = 0.0  # mm^3


@dataclass(frozen=True)
class ScalingRatio:
    area_ratio: float
    volume_ratio: float
    envelope_ratio: float = 0.0


def _thetas(config: SweepConfig, index: int) -> np.ndarray:
    if config.theta_steps == 1:
        return np.zeros(1)
    return np.linspace(0.0, config.theta_max[index], config.theta_steps)


def _phis(config: SweepConfig) -> np.ndarray:
    return np.arange(config.phi_steps) * (2.0 * math.pi / config.phi_steps)


def _segment_grid(config: SweepConfig, index: int) -> Tuple[np.ndarray, np.ndarray]:
    theta_grid, phi_grid = np.meshgrid(_thetas(config, index), _phis(config), indexing="ij")
    length = config.lengths[index]
    return arc_frames(theta_grid.ravel() / length, phi_grid.ravel(), np.full(theta_grid.size, length))


def _compose(frames: List[Tuple[np.ndarray, np.ndarray]], indices: np.ndarray) -> np.ndarray:
    rotation, tip = frames[0][0][indices[0]], frames[0][1][indices[0]].copy()
    for (rot_k, trans_k), idx in zip(frames[1:], indices[1:]):
        tip += np.einsum("nij,nj->ni", rotation, trans_k[idx])
        rotation = np.einsum("nij,njk->nik", rotation, rot_k[idx])
    return tip


def _coprime_stride(total: int, limit: int, period: int) -> int:
    """Smallest stride keeping ``total`` samples under ``limit`` that shares no factor with ``period``.

    A stride co-prime to the fastest grid axis visits every residue of that
    axis, so no bending plane of the distal segment is skipped.
    """
    stride = max(1, math.ceil(total / limit))
    while stride > 1 and math.gcd(stride, period) != 1:
        stride += 1
    return stride


def grid_indices(config: SweepConfig) -> Tuple[np.ndarray, ...]:
    """Per-segment grid indices of the samples a ``grid`` sweep visits.

    Index ``i`` of a segment decodes to theta step ``i // phi_steps`` and
    plane ``i % phi_steps``.
    """
    total = config.total_samples
    stride = _coprime_stride(total, config.max_samples, config.grid_size)
    flat = np.arange(0, total, stride, dtype=np.int64)
    return np.unravel_index(flat, (config.grid_size,) * config.n_segments)


def sequential_poses(config: SweepConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Bend angles (samples x segments) and shared planes of a ``sequential`` sweep."""
    n = config.n_segments
    limits = np.array(config.theta_max)
    stages = []
    for stage in range(n):
        segment = n - 1 - stage
        thetas = _thetas(config, segment)
        if stage > 0:
            thetas = thetas[1:]
        block = np.zeros((thetas.size, n))
        block[:, segment + 1:] = limits[segment + 1:]
        block[:, segment] = thetas
        stages.append(block)
    poses = np.concatenate(stages, axis=0)
    phis = _phis(config)
    angles, planes = np.repeat(poses, phis.size, axis=0), np.tile(phis, poses.shape[0])
    stride = _coprime_stride(angles.shape[0], config.max_samples, config.phi_steps)
    return angles[::stride], planes[::stride]


def _compose_poses(config: SweepConfig, angles: np.ndarray, planes: np.ndarray) -> np.ndarray:
    rotation, tip = None, None
    for k, length in enumerate(config.lengths):
        rot_k, trans_k = arc_frames(angles[:, k] / length, planes, np.full(planes.size, length))
        if rotation is None:
            rotation, tip = rot_k, trans_k.copy()
            continue
        tip += np.einsum("nij,nj->ni", rotation, trans_k)
        rotation = np.einsum("nij,njk->nik", rotation, rot_k)
    return tip


def sweep_workspace(config: SweepConfig) -> PointCloud:
    """Tip cloud over the actuation space, strided down to ``max_samples``."""
    total = config.total_samples
    if total > HARD_SAMPLE_LIMIT:
        raise InvalidArgumentError(f"sweep needs {total} samples, limit is {HARD_SAMPLE_LIMIT}")
    if config.mode == "sequential":
        angles, planes = sequential_poses(config)
        logger.debug(f"sweeping {planes.size} of {total} sequential poses")
        return PointCloud(_compose_poses(config, angles, planes)).sorted()

    indices = grid_indices(config)
    size = indices[0].size
    frames = [_segment_grid(config, k) for k in range(config.n_segments)]
    chunks = [slice(start, min(start + CHUNK_SIZE, size)) for start in range(0, size, CHUNK_SIZE)]
    workers = min(thread_count(), max(1, len(chunks)))
    logger.debug(f"sweeping {size} of {total} samples in {len(chunks)} chunks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda part: _compose(frames, [idx[part] for idx in indices]), chunks))
    return PointCloud(np.concatenate(parts, axis=0)).sorted()


def _require_points(cloud: PointCloud) -> np.ndarray:
    if len(cloud) == 0:
        raise InvalidArgumentError("point cloud is empty")
    return cloud.points


def max_radial_reach(cloud: PointCloud) -> float:
    """Largest horizontal distance of a point from the z-axis (mm)."""
    points = _require_points(cloud)
    return float(np.max(np.hypot(points[:, 0], points[:, 1])))


def planar_area(r_max: float) -> float:
    """Area of the reach disc, pi * r_max^2 (mm^2)."""
    if r_max < 0.0:
        raise InvalidArgumentError(f"r_max must be non-negative, got {r_max}")
    return math.pi * r_max * r_max


def workspace_volume(cloud: PointCloud, bin_height: float = 5.0) -> float:
    """Stack of discs along z, each with the largest radius found in its bin (mm^3).

    The last bin is cut at the top of the cloud; a flat cloud counts as one
    bin of height ``bin_height``.
    """
    points = _require_points(cloud)
    if not bin_height > 0.0:
        raise InvalidArgumentError(f"bin height must be positive, got {bin_height}")
    z = points[:, 2]
    r2 = points[:, 0] ** 2 + points[:, 1] ** 2
    z_min, extent = float(z.min()), float(z.max() - z.min())
    if extent == 0.0:
        return math.pi * float(r2.max()) * bin_height

    n_bins = max(1, math.ceil(extent / bin_height))
    index = np.minimum(((z - z_min) / bin_height).astype(np.int64), n_bins - 1)
    heights = np.full(n_bins, bin_height)
    heights[-1] = extent - (n_bins - 1) * bin_height
    radius2 = np.full(n_bins, -1.0)
    np.maximum.at(radius2, index, r2)
    occupied = radius2 >= 0.0
    return float(math.pi * np.sum(radius2[occupied] * heights[occupied]))


def envelope_volume(cloud: PointCloud, bin_height: float = 5.0, base_z: float = 0.0) -> float:
    """Volume enclosed between the mount plane and the tip cloud (mm^3).

    Discs are stacked from ``min(base_z, z_min)`` to the top of the cloud; each
    disc takes the largest radius reached at its height or further from the
    mount, so bins the tip never visits are filled from above.
    """
    points = _require_points(cloud)
    if not bin_height > 0.0:
        raise InvalidArgumentError(f"bin height must be positive, got {bin_height}")
    z = points[:, 2]
    r2 = points[:, 0] ** 2 + points[:, 1] ** 2
    z_low = min(float(base_z), float(z.min()))
    extent = float(z.max()) - z_low
    if extent == 0.0:
        return math.pi * float(r2.max()) * bin_height

    n_bins = max(1, math.ceil(extent / bin_height))
    index = np.minimum(((z - z_low) / bin_height).astype(np.int64), n_bins - 1)
    heights = np.full(n_bins, bin_height)
    heights[-1] = extent - (n_bins - 1) * bin_height
    radius2 = np.zeros(n_bins)
    np.maximum.at(radius2, index, r2)
    radius2 = np.maximum.accumulate(radius2[::-1])[::-1]
    return float(math.pi * np.sum(radius2 * heights))


def compute_metrics(cloud: PointCloud, bin_height: float = 5.0) -> WorkspaceMetrics:
    points = _require_points(cloud)
    r_max = max_radial_reach(cloud)
    return WorkspaceMetrics(
        r_max=r_max,
        planar_area=planar_area(r_max),
        volume=workspace_volume(cloud, bin_height),
        z_min=float(points[:, 2].min()),
        z_max=float(points[:, 2].max()),
        envelope_volume=envelope_volume(cloud, bin_height),
    )


def scaling_report(metrics: Sequence[WorkspaceMetrics]) -> List[ScalingRatio]:
    """Area and volume of every entry relative to the first."""
    if len(metrics) < 2:
        raise InvalidArgumentError("scaling report needs a baseline and at least one more entry")
    baseline = metrics[0]
    if baseline.planar_area == 0.0 or baseline.volume == 0.0:
        raise InvalidArgumentError("baseline area and volume must be non-zero")
    envelope = baseline.envelope_volume
    return [
        ScalingRatio(m.planar_area / baseline.planar_area, m.volume / baseline.volume,
                     m.envelope_volume / envelope if envelope > 0.0 else 0.0)
        for m in metrics
    ]


def metrics_to_dict(metrics: WorkspaceMetrics) -> Dict[str, float]:
    return {
        "r_max_mm": metrics.r_max,
        "planar_area_mm2": metrics.planar_area,
        "volume_mm3": metrics.volume,
        "envelope_volume_mm3": metrics.envelope_volume,
        "z_min_mm": metrics.z_min,
        "z_max_mm": metrics.z_max,
    }


def write_cloud_csv(cloud: PointCloud, path: Union[str, Path]) -> Path:
    return write_csv(path, CLOUD_HEADER, cloud.points.tolist())


def read_cloud_csv(path: Union[str, Path]) -> PointCloud:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CLOUD_HEADER:
            raise InvalidArgumentError(f"{path}: expected header {','.join(CLOUD_HEADER)}")
        rows: List[List[float]] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise InvalidArgumentError(f"{path}: line {line}: non-numeric coordinate") from None
            if len(rows[-1]) != 3:
                raise InvalidArgumentError(f"{path}: line {line}: expected 3 columns")
    return PointCloud(np.array(rows).reshape(-1, 3))

