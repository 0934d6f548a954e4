#!/usr/bin/env python3
"""
Best-fit circle through 3D marker positions.

The plane comes from the principal directions of the centered points; the
in-plane circle starts from the algebraic (Kasa) solution and is refined
geometrically by minimizing the spread of the point-to-center distances.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from ..errors import DegenerateFitError, InvalidArgumentError

COLLINEAR_RATIO = 1e-9


@dataclass(frozen=True)
class CircleFit:
    """Circle in 3D space."""
    center: np.ndarray
    radius: float
    normal: np.ndarray
    rms_residual: float

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius


def _kasa(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    design = np.column_stack([2.0 * u, 2.0 * v, np.ones_like(u)])
    (a, b, _), *_ = np.linalg.lstsq(design, u * u + v * v, rcond=None)
    return np.array([a, b])


def fit_circle_3d(points: Sequence[Sequence[float]]) -> CircleFit:
    """Fit a circle to at least three non-collinear 3D points.

    The normal is oriented along the traversal direction of the points, so
    a proper rigid motion of the input moves center and normal with it.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError(f"expected an (n, 3) array of points, got shape {pts.shape}")
    if pts.shape[0] < 3:
        raise InvalidArgumentError(f"need at least 3 points for a circle, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("points must be finite")

    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, singular, basis = np.linalg.svd(centered, full_matrices=False)
    if singular[0] <= 1e-12 * max(1.0, np.abs(pts).max()):
        raise DegenerateFitError("points are coincident")
    if singular[1] <= COLLINEAR_RATIO * singular[0]:
        raise DegenerateFitError("points are collinear")

    e1, e2, normal = basis[0], basis[1], basis[2]
    u, v = centered @ e1, centered @ e2

    def spread(center: np.ndarray) -> np.ndarray:
        dist = np.hypot(u - center[0], v - center[1])
        return dist - dist.mean()

    # fixed tolerances keep the refinement deterministic on exact data
    refined = optimize.least_squares(spread, _kasa(u, v), method="lm",
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15)
    cu, cv = refined.x
    in_plane = np.hypot(u - cu, v - cv)
    radius = float(in_plane.mean())
    if not np.isfinite(radius) or radius <= 0.0:
        raise DegenerateFitError("circle fit did not produce a finite radius")
    center = centroid + cu * e1 + cv * e2

    turning = np.cross(pts[:-1] - center, pts[1:] - center).sum(axis=0)
    if turning @ normal < 0.0:
        normal = -normal
    out_of_plane = centered @ normal
    rms = float(np.sqrt(np.mean((in_plane - radius) ** 2 + out_of_plane ** 2)))
    return CircleFit(center=center, radius=radius, normal=normal / np.linalg.norm(normal), rms_residual=rms)
