#!/usr/bin/env python3
"""
Marker trajectories and their CSV form.

One row per (frame, marker) observation:

    frame,time_s,marker_id,x_mm,y_mm,z_mm

Rows are grouped by frame in increasing frame order. A marker missing from a
frame is a gap. Numbers are written with ``repr`` so a written file parses
back to identical values.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
from loguru import logger

from ..errors import InvalidArgumentError, MocapFormatError, MocapParseError

HEADER = ("frame", "time_s", "marker_id", "x_mm", "y_mm", "z_mm")


@dataclass(frozen=True)
class MocapFrame:
    index: int
    time: float  # s
    markers: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class MocapTrajectory:
    """Ordered frames of marker positions (mm); markers may be missing per frame."""
    frames: Tuple[MocapFrame, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        for previous, current in zip(frames, frames[1:]):
            if current.index <= previous.index:
                raise InvalidArgumentError(
                    f"frame indices must increase strictly ({previous.index} then {current.index})"
                )
            if current.time < previous.time:
                raise InvalidArgumentError(f"frame {current.index}: time runs backwards")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def marker_ids(self) -> Tuple[str, ...]:
        """Marker identifiers in order of first appearance."""
        seen: Dict[str, None] = {}
        for frame in self.frames:
            for marker in frame.markers:
                seen.setdefault(marker, None)
        return tuple(seen)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    def series(self, marker_id: str) -> np.ndarray:
        """Positions of one marker per frame, NaN rows at gaps; shape (n_frames, 3)."""
        out = np.full((len(self.frames), 3), np.nan)
        for row, frame in enumerate(self.frames):
            if marker_id in frame.markers:
                out[row] = frame.markers[marker_id]
        return out

    def with_series(self, replacements: Dict[str, np.ndarray]) -> "MocapTrajectory":
        """Copy with the positions of some markers replaced (NaN rows stay gaps)."""
        frames = []
        for row, frame in enumerate(self.frames):
            markers = dict(frame.markers)
            for marker_id, values in replacements.items():
                if marker_id in markers and np.all(np.isfinite(values[row])):
                    markers[marker_id] = np.array(values[row], dtype=float)
            frames.append(MocapFrame(frame.index, frame.time, markers))
        return MocapTrajectory(tuple(frames))


def _number(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MocapParseError(f"{column} is not a number: {text!r}", line) from None
    if not math.isfinite(value):
        raise MocapParseError(f"{column} is not finite: {text!r}", line)
    return value


def parse_mocap_csv(stream: TextIO) -> MocapTrajectory:
    """Parse the six-column marker CSV; errors carry 1-based line numbers."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise MocapFormatError("file is empty", 1)
    if tuple(header) != HEADER:
        raise MocapFormatError(f"expected header {','.join(HEADER)}, got {','.join(header)}", 1)

    frames: List[MocapFrame] = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(HEADER):
            raise MocapParseError(f"expected {len(HEADER)} columns, got {len(row)}", line)
        try:
            index = int(row[0])
        except ValueError:
            raise MocapParseError(f"frame is not an integer: {row[0]!r}", line) from None
        time = _number(row[1], line, "time_s")
        marker_id = row[2]
        if not marker_id:
            raise MocapParseError("marker_id is empty", line)
        position = np.array([_number(row[k], line, HEADER[k]) for k in (3, 4, 5)])

        if frames and index == frames[-1].index:
            current = frames[-1]
            if time != current.time:
                raise MocapFormatError(f"frame {index} has two different times", line)
            if marker_id in current.markers:
                raise MocapParseError(f"marker {marker_id!r} repeated in frame {index}", line)
            current.markers[marker_id] = position
            continue
        if frames and index < frames[-1].index:
            raise MocapFormatError(f"frame {index} follows frame {frames[-1].index}", line)
        if frames and time < frames[-1].time:
            raise MocapFormatError(f"frame {index}: time runs backwards", line)
        frames.append(MocapFrame(index, time, {marker_id: position}))

    if not frames:
        raise MocapFormatError("file has no marker rows", 2)
    logger.debug(f"parsed {len(frames)} frames")
    return MocapTrajectory(tuple(frames))


def read_mocap_csv(path: Union[str, Path]) -> MocapTrajectory:
    with open(path, newline="", encoding="utf-8") as handle:
        return parse_mocap_csv(handle)


def write_mocap_csv(trajectory: MocapTrajectory, stream: Optional[TextIO] = None) -> str:
    """Serialize a trajectory; returns the text and also writes it to ``stream`` if given."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HEADER)
    for frame in trajectory.frames:
        for marker_id, position in frame.markers.items():
            writer.writerow([frame.index, repr(float(frame.time)), marker_id,
                             *(repr(float(v)) for v in position)])
    text = buffer.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def trajectory_from_positions(positions: Iterable[np.ndarray], marker_ids: Iterable[str],
                              frame_rate: float = 100.0) -> MocapTrajectory:
    """Build a gap-free trajectory from per-frame (n_markers, 3) arrays."""
    if frame_rate <= 0.0:
        raise InvalidArgumentError(f"frame rate must be positive, got {frame_rate}")
    ids = list(marker_ids)
    frames = []
    for index, points in enumerate(positions):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if points.shape[0] != len(ids):
            raise InvalidArgumentError(f"frame {index}: {points.shape[0]} positions for {len(ids)} markers")
        frames.append(MocapFrame(index, index / frame_rate, {m: p.copy() for m, p in zip(ids, points)}))
    return MocapTrajectory(tuple(frames))
