#!/usr/bin/env python3
"""
Centered median smoothing of marker trajectories.
"""

from typing import List

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidArgumentError
from .trajectory import MocapTrajectory


def _visible_runs(mask: np.ndarray) -> List[slice]:
    """Contiguous stretches of frames in which a marker is present."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [slice(start, stop) for start, stop in zip(edges[::2], edges[1::2])]


def median_filter(values: np.ndarray, window: int) -> np.ndarray:
    """Median over a centered window, shrunk symmetrically near the ends.

    ``values`` has shape (n, k); filtering runs along axis 0. The first and
    last rows are returned unchanged.
    """
    values = np.asarray(values, dtype=float)
    half = window // 2
    count = values.shape[0]
    out = values.copy()
    if half == 0 or count < 3:
        return out
    if count > 2 * half:
        windows = sliding_window_view(values, 2 * half + 1, axis=0)
        out[half : count - half] = np.median(windows, axis=-1)
    for row in range(min(half, count)):
        for centre in (row, count - 1 - row):
            reach = min(half, centre, count - 1 - centre)
            out[centre] = np.median(values[centre - reach : centre + reach + 1], axis=0)
    return out


def smooth_trajectory(trajectory: MocapTrajectory, window: int) -> MocapTrajectory:
    """Per-marker, per-axis median filter; gaps split the series and stay gaps."""
    if window < 1 or window % 2 == 0:
        raise InvalidArgumentError(f"smoothing window must be a positive odd count, got {window}")
    if window == 1:
        return trajectory
    smoothed = {}
    for marker_id in trajectory.marker_ids:
        series = trajectory.series(marker_id)
        out = series.copy()
        for run in _visible_runs(np.all(np.isfinite(series), axis=1)):
            out[run] = median_filter(series[run], window)
        smoothed[marker_id] = out
    return trajectory.with_series(smoothed)
