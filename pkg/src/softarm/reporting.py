#!/usr/bin/env python3
"""
Output writers shared by the CLI: canonical JSON, CSV tables and SVG figures.

Numbers are written with 9 significant digits and JSON keys keep the order in
which reports build them, so identical runs produce identical bytes.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import svgwrite
from loguru import logger

PathLike = Union[str, Path]

SIGNIFICANT_DIGITS = 9
CANVAS = 480.0
MARGIN = 24.0


def format_number(value: float) -> str:
    """Fixed-precision text for a float (9 significant digits)."""
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def canonical(value: Any) -> Any:
    """Round floats recursively; non-finite values become null."""
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(float(value)):
            return None
        return float(format_number(value))
    return value


def dumps_canonical(payload: Any) -> str:
    return json.dumps(canonical(payload), indent=2, ensure_ascii=False) + "\n"


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_canonical(payload), encoding="utf-8")
    logger.debug(f"wrote {path}")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_number(value)
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV table with fixed float formatting and '\\n' line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug(f"wrote {path}")
    return path


class _Viewport:
    """Maps data coordinates to a square canvas with y pointing up."""

    def __init__(self, points: np.ndarray):
        if points.size:
            low, high = points.min(axis=0), points.max(axis=0)
        else:
            low, high = np.zeros(2), np.ones(2)
        span = float(max(high[0] - low[0], high[1] - low[1], 1e-9))
        self.low = low
        self.center = 0.5 * (low + high)
        self.scale = (CANVAS - 2.0 * MARGIN) / span

    def __call__(self, x: float, y: float) -> Tuple[float, float]:
        u = CANVAS / 2.0 + (x - self.center[0]) * self.scale
        v = CANVAS / 2.0 - (y - self.center[1]) * self.scale
        return round(u, 3), round(v, 3)


def _drawing(path: PathLike, title: str) -> svgwrite.Drawing:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dwg = svgwrite.Drawing(str(path), size=(f"{CANVAS:g}px", f"{CANVAS:g}px"),
                           viewBox=f"0 0 {CANVAS:g} {CANVAS:g}")
    dwg.add(dwg.rect((0, 0), (CANVAS, CANVAS), fill="white"))
    dwg.add(dwg.text(title, insert=(MARGIN, MARGIN * 0.7), font_size="12px", font_family="sans-serif"))
    return dwg


def cloud_svg(points: np.ndarray, path: PathLike, title: str = "Workspace (top view)",
              r_max: Optional[float] = None) -> Path:
    """Scatter of a point cloud projected on the x-y plane, with the reach circle."""
    planar = np.asarray(points, dtype=float).reshape(-1, 3)[:, :2]
    if r_max is not None and r_max > 0.0:
        frame = np.vstack([planar, [[-r_max, -r_max], [r_max, r_max]]])
    else:
        frame = planar
    view = _Viewport(frame)
    dwg = _drawing(path, title)
    if r_max is not None and r_max > 0.0:
        dwg.add(dwg.circle(center=view(0.0, 0.0), r=round(r_max * view.scale, 3),
                           fill="none", stroke="grey", stroke_width=0.5, stroke_dasharray="4,2"))
    dots = dwg.g(fill="steelblue")
    for x, y in planar:
        dots.add(dwg.circle(center=view(x, y), r=1.0))
    dwg.add(dots)
    dwg.save()
    logger.debug(f"wrote {path}")
    return Path(path)


def shape_svg(polylines: List[np.ndarray], path: PathLike, title: str = "Backbone (bending plane)") -> Path:
    """Planar (x, z) polylines, e.g. the hanging and loaded backbones."""
    colors = ["lightgrey", "black", "firebrick", "steelblue"]
    stacked = np.vstack([np.asarray(p, dtype=float).reshape(-1, 2) for p in polylines]) if polylines else np.zeros((0, 2))
    view = _Viewport(stacked)
    dwg = _drawing(path, title)
    for index, line in enumerate(polylines):
        coords = [view(x, z) for x, z in np.asarray(line, dtype=float).reshape(-1, 2)]
        dwg.add(dwg.polyline(coords, fill="none", stroke=colors[index % len(colors)], stroke_width=1.5))
    dwg.save()
    logger.debug(f"wrote {path}")
    return Path(path)
