#!/usr/bin/env python3
"""
Potential energy, its gradient, and planar geometry of a discretized rod.

Sub-arc ``j`` bends by ``alpha_j = kappa_j * ds_j`` and has backbone length
``ds_j * (1 + strain_j)``. The arm hangs from the mount along -Z; the tangent
angle is measured from the downward axis toward the bending-plane direction,
so positive curvature raises the tip. Node positions are (x, z) pairs in the
bending plane.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgumentError
from .model import LoadCase, RodModel, RodState, SegmentSpec


def half_sinc(alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """sin(alpha/2) / (alpha/2) and its derivative with respect to alpha."""
    alpha = np.asarray(alpha, dtype=float)
    h = 0.5 * alpha
    small = np.abs(h) < 1e-4
    hs = np.where(small, 1.0, h)
    value = np.where(small, 1.0 - h * h / 6.0 + h ** 4 / 120.0, np.sin(hs) / hs)
    dh = np.where(small, -h / 3.0 + h ** 3 / 30.0, (hs * np.cos(hs) - np.sin(hs)) / (hs * hs))
    return value, 0.5 * dh


def _kinematics(model: RodModel, vector: np.ndarray):
    size = model.size
    kappa, strain = vector[:size], vector[size:]
    alpha = kappa * model.ds
    backbone = model.ds * (1.0 + strain)
    start = np.concatenate([[0.0], np.cumsum(alpha)[:-1]])
    mid = start + 0.5 * alpha
    shape, shape_prime = half_sinc(alpha)
    return kappa, strain, alpha, backbone, start, mid, shape, shape_prime


def energy_and_gradient(model: RodModel, vector: np.ndarray) -> Tuple[float, np.ndarray]:
    """Elastic plus gravitational energy (N*mm) and its gradient in (kappa, strain)."""
    kappa, strain, alpha, backbone, _, mid, shape, shape_prime = _kinematics(model, vector)
    ds = model.ds
    cos_mid, sin_mid = np.cos(mid), np.sin(mid)
    carried = model.distal_weight

    elastic = 0.5 * np.sum(model.bending * kappa ** 2 * ds) + 0.5 * np.sum(model.axial * strain ** 2 * ds)
    gravity = float(carried @ (-backbone * shape * cos_mid))

    # d/d(mid angle) of each sub-arc's weighted drop; rotating sub-arc i turns every distal chord
    turn = carried * backbone * shape * sin_mid
    distal_turn = np.cumsum(turn[::-1])[::-1] - turn
    d_alpha = 0.5 * turn + distal_turn - carried * backbone * shape_prime * cos_mid

    grad_kappa = model.bending * kappa * ds + d_alpha * ds
    grad_strain = model.axial * strain * ds - carried * ds * shape * cos_mid
    return float(elastic + gravity), np.concatenate([grad_kappa, grad_strain])


def node_positions(model: RodModel, vector: np.ndarray) -> np.ndarray:
    """Planar (x, z) of every node, mount first; shape (size + 1, 2)."""
    _, _, _, backbone, _, mid, shape, _ = _kinematics(model, vector)
    dx = backbone * shape * np.sin(mid)
    dz = -backbone * shape * np.cos(mid)
    return np.column_stack([
        np.concatenate([[0.0], np.cumsum(dx)]),
        np.concatenate([[0.0], np.cumsum(dz)]),
    ])


def points_at(model: RodModel, vector: np.ndarray, arc_positions: Sequence[float]) -> np.ndarray:
    """Planar (x, z) at rest arc-length positions measured from the mount."""
    _, _, alpha, backbone, start, _, _, _ = _kinematics(model, vector)
    nodes = node_positions(model, vector)
    node_s = np.concatenate([[0.0], np.cumsum(model.ds)])
    s = np.asarray(arc_positions, dtype=float)
    if np.any(s < -1e-12) or np.any(s > node_s[-1] + 1e-9):
        raise InvalidArgumentError("arc position outside the rod")
    index = np.clip(np.searchsorted(node_s, s, side="right") - 1, 0, model.size - 1)
    frac = np.clip((s - node_s[index]) / model.ds[index], 0.0, 1.0)
    partial = frac * alpha[index]
    shape, _ = half_sinc(partial)
    chord = frac * backbone[index] * shape
    heading = start[index] + 0.5 * partial
    return nodes[index] + np.column_stack([chord * np.sin(heading), -chord * np.cos(heading)])


def tip_angles(model: RodModel, vector: np.ndarray) -> np.ndarray:
    """Tangent rotation at the tip of every segment (rad)."""
    alpha = vector[: model.size] * model.ds
    return np.cumsum(alpha)[model.subdivisions - 1 :: model.subdivisions]


def _model_for(state: RodState, chain: Sequence[SegmentSpec], load: LoadCase) -> RodModel:
    model = RodModel(chain, load, state.subdivisions)
    model.check(state)
    return model


def total_energy(state: RodState, chain: Sequence[SegmentSpec], load: LoadCase) -> float:
    """Total potential energy of a rod state (N*mm)."""
    return energy_and_gradient(_model_for(state, chain, load), state.as_vector())[0]


def energy_gradient(state: RodState, chain: Sequence[SegmentSpec], load: LoadCase) -> np.ndarray:
    """Gradient of total_energy, curvatures first then strains."""
    return energy_and_gradient(_model_for(state, chain, load), state.as_vector())[1]


def tendon_path_length(state: RodState, chain: Sequence[SegmentSpec], segment: int,
                       tendon: int, plane_angle: float = 0.0) -> float:
    """Path length (mm) of one tendon from the mount to its segment's end cap."""
    model = _model_for(state, chain, LoadCase(gravity_enabled=False))
    if not 0 <= segment < model.n_segments:
        raise InvalidArgumentError(f"segment index {segment} outside chain of {model.n_segments}")
    if not 0 <= tendon < chain[segment].layout.count:
        raise InvalidArgumentError(f"tendon index {tendon} outside layout")
    row = model.tendon_row(segment, tendon, plane_angle)
    return model.rest_length_to(segment) + float(row @ state.as_vector())


def rod_positions(state: RodState, chain: Sequence[SegmentSpec]) -> np.ndarray:
    """Planar node positions of a state, mount first."""
    model = _model_for(state, chain, LoadCase(gravity_enabled=False))
    return node_positions(model, state.as_vector())


def hanging_state(chain: Sequence[SegmentSpec], load: LoadCase, subdivisions: int) -> RodState:
    """Unactuated equilibrium: straight, each sub-arc stretched by the weight below it."""
    model = RodModel(chain, load, subdivisions)
    return RodState(np.zeros(model.size), model.distal_weight / model.axial, subdivisions)


def marker_positions(state: RodState, chain: Sequence[SegmentSpec], segment: Optional[int] = None,
                     count: int = 5, span: Optional[float] = None) -> np.ndarray:
    """Virtual marker positions over the distal ``span`` mm of a segment.

    Markers are equally spaced in rest arc length and returned as 3-vectors in
    the bending plane (x, 0, z). ``span=None`` spreads them over the segment.
    """
    model = _model_for(state, chain, LoadCase(gravity_enabled=False))
    segment = model.n_segments - 1 if segment is None else segment
    if not 0 <= segment < model.n_segments:
        raise InvalidArgumentError(f"segment index {segment} outside chain of {model.n_segments}")
    if count < 2:
        raise InvalidArgumentError(f"need at least 2 markers, got {count}")
    length = chain[segment].length
    span = length if span is None else span
    if not 0.0 < span <= length:
        raise InvalidArgumentError(f"marker span {span} mm must lie within the segment length {length} mm")
    end = model.rest_length_to(segment)
    positions = np.linspace(end - span, end, count)
    planar = points_at(model, state.as_vector(), positions)
    return np.column_stack([planar[:, 0], np.zeros(count), planar[:, 1]])
