#!/usr/bin/env python3
"""
Bending-angle estimator that mirrors the motion-capture measurement.
"""

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateFitError, InvalidArgumentError
from ..mocap.circle_fit import fit_circle_3d
from .energy import marker_positions
from .model import RodState, SegmentSpec


def ccfit_angle_from_state(state: RodState, chain: Sequence[SegmentSpec], tip_window: int = 5,
                           span: Optional[float] = None, segment: Optional[int] = None) -> float:
    """Constant-curvature bend angle of a segment from a circle through virtual markers.

    ``tip_window`` markers are placed over the distal ``span`` mm of the
    segment (whole segment when ``None``); the fitted curvature is
    extrapolated over the stretched backbone length of the segment, which
    is what a marker-based arc-length measurement sees. Collinear markers
    give 0.
    """
    if tip_window < 3:
        raise InvalidArgumentError(f"tip_window must be at least 3, got {tip_window}")
    segment = len(chain) - 1 if segment is None else segment
    markers = marker_positions(state, chain, segment=segment, count=tip_window, span=span)
    try:
        fit = fit_circle_3d(markers)
    except DegenerateFitError:
        return 0.0
    # markers lie in the x-z plane; bending toward +x turns the traversal about -y
    sign = -math.copysign(1.0, fit.normal[1])
    return sign * deformed_length(state, chain, segment) / fit.radius


def deformed_length(state: RodState, chain: Sequence[SegmentSpec], segment: int) -> float:
    """Backbone length of one segment after axial strain, in mm."""
    if not 0 <= segment < len(chain):
        raise InvalidArgumentError(f"segment {segment} outside a {len(chain)}-segment chain")
    sub = state.subdivisions
    strain = state.strain[segment * sub:(segment + 1) * sub]
    return float(chain[segment].length / sub * np.sum(1.0 + strain))
