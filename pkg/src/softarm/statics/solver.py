#!/usr/bin/env python3
"""
Static equilibrium of a tendon-driven rod under gravity.

Energy is minimized subject to one pull-only constraint per actuated tendon
(path length no longer than its free length). An augmented-Lagrangian outer
loop updates the tendon tensions; BFGS minimizes each subproblem; a short
Newton-KKT polish on the active constraints tightens the final answer.
Variables are scaled to sub-arc bend angles and strains.
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import optimize

from ..errors import InvalidArgumentError, SolverFailureError
from ..kinematics import ActuationCommand, TendonLayout
from .energy import (
    energy_and_gradient,
    hanging_state,
    node_positions,
    tendon_path_length,
    tip_angles,
)
from .estimators import ccfit_angle_from_state
from .model import (
    EquilibriumResult,
    LoadCase,
    RodModel,
    RodState,
    SegmentSpec,
    TendonTension,
    actuated_tendons,
)

STANDARD_PAYLOADS: Tuple[float, ...] = (0.0, 10.0, 20.0, 50.0, 100.0, 200.0)
MAX_PENALTY = 1e8


@dataclass(frozen=True)
class SolverSettings:
    """Discretization, tolerances and iteration caps of the equilibrium solver."""
    subdivisions: int = 20
    inner_tolerance: float = 1e-8  # N*mm per unit of scaled state
    constraint_tolerance: float = 1e-6  # mm
    max_outer_iterations: int = 50
    max_inner_iterations: int = 2000
    initial_penalty: float = 1.0  # N/mm
    polish_steps: int = 5
    marker_count: int = 5
    marker_span: Optional[float] = None  # mm, None = whole measured segment

    def __post_init__(self) -> None:
        if self.inner_tolerance <= 0.0 or self.constraint_tolerance <= 0.0:
            raise InvalidArgumentError("solver tolerances must be positive")
        if self.max_outer_iterations < 1 or self.max_inner_iterations < 1:
            raise InvalidArgumentError("iteration caps must be at least 1")
        if self.initial_penalty <= 0.0:
            raise InvalidArgumentError("initial penalty must be positive")
        if self.marker_count < 3:
            raise InvalidArgumentError("at least 3 markers are needed for the circle fit")


def _pull_plane(pulls: Sequence[float], layout: TendonLayout) -> Optional[float]:
    """Bending-plane angle of one segment's pulls, None without a differential component."""
    angles = np.asarray(layout.angles)
    design = np.column_stack([np.ones_like(angles), np.cos(angles), np.sin(angles)])
    (_, u, v), *_ = np.linalg.lstsq(design, np.asarray(pulls, dtype=float), rcond=None)
    if math.hypot(u, v) <= 1e-12 * max(1.0, float(np.max(np.abs(pulls)))):
        return None
    return math.atan2(v, u)


def _bending_plane(chain: Sequence[SegmentSpec], command: ActuationCommand) -> float:
    planes = []
    for index, (segment, pulls) in enumerate(zip(chain, command.pulls)):
        if any(p > 0.0 for p in pulls):
            plane = _pull_plane(pulls, segment.layout)
            if plane is None:
                raise InvalidArgumentError(f"segment {index + 1}: pulls produce no bending direction")
            planes.append(plane)
    if not planes:
        return 0.0
    for plane in planes[1:]:
        if abs(math.sin(plane - planes[0])) > 1e-9:
            raise InvalidArgumentError("actuated tendons do not share one bending plane")
    return planes[0]


class _Problem:
    """Scaled energy and linear tendon constraints c(y) = -pull - a.y >= 0."""

    def __init__(self, model: RodModel, tendons: List[Tuple[int, int, float]], plane: float):
        self.model = model
        self.tendons = tendons
        size = model.size
        # y = (alpha, strain); x = (alpha / ds, strain)
        self.scale = np.concatenate([1.0 / model.ds, np.ones(size)])
        rows = [model.tendon_row(seg, tendon, plane) for seg, tendon, _ in tendons]
        self.rows = np.array(rows).reshape(len(tendons), 2 * size) * self.scale
        self.pulls = np.array([pull for _, _, pull in tendons])
        self.stiffness = np.concatenate([model.bending / model.ds, model.axial * model.ds])

    def to_state(self, y: np.ndarray) -> np.ndarray:
        return y * self.scale

    def energy(self, y: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = energy_and_gradient(self.model, self.to_state(y))
        return value, grad * self.scale

    def constraints(self, y: np.ndarray) -> np.ndarray:
        return -self.pulls - self.rows @ y

    def lagrangian_gradient(self, y: np.ndarray, tension: np.ndarray) -> np.ndarray:
        return self.energy(y)[1] + self.rows.T @ tension

    def hessian(self, y: np.ndarray, step: float = 1e-6) -> np.ndarray:
        size = y.size
        hess = np.empty((size, size))
        for j in range(size):
            bump = np.zeros(size)
            bump[j] = step
            hess[:, j] = (self.energy(y + bump)[1] - self.energy(y - bump)[1]) / (2.0 * step)
        return 0.5 * (hess + hess.T)

    def gravity_free_guess(self) -> Tuple[np.ndarray, np.ndarray]:
        """Exact minimizer of the elastic energy under the tendon constraints."""
        count = len(self.tendons)
        tension = np.zeros(count)
        y = np.zeros(self.model.size * 2)
        if count == 0:
            return y, tension
        active = list(range(count))
        for _ in range(4 * count):
            tension = np.zeros(count)
            if active:
                rows = self.rows[active]
                gram = (rows / self.stiffness) @ rows.T
                tension[active] = np.linalg.solve(gram, self.pulls[active])
            y = -(self.rows.T @ tension) / self.stiffness
            if np.any(tension[active] < 0.0):
                active.remove(min(active, key=lambda i: tension[i]))
                continue
            violated = [i for i in range(count) if i not in active and self.constraints(y)[i] < 0.0]
            if not violated:
                break
            active.append(min(violated, key=lambda i: self.constraints(y)[i]))
        return y, tension


def _kkt_residual(problem: _Problem, y: np.ndarray, tension: np.ndarray) -> Tuple[float, float]:
    """(stationarity infinity norm, worst constraint or complementarity violation)."""
    stationarity = float(np.max(np.abs(problem.lagrangian_gradient(y, tension)))) if y.size else 0.0
    c = problem.constraints(y)
    violation = 0.0
    if c.size:
        violation = float(max(np.max(-c), np.max(np.abs(np.where(tension > 0.0, c, 0.0))), 0.0))
    return stationarity, violation


def _augmented_lagrangian(problem: _Problem, y: np.ndarray, tension: np.ndarray,
                          settings: SolverSettings) -> Tuple[np.ndarray, np.ndarray, int]:
    penalty = settings.initial_penalty
    previous = math.inf
    outer = 0
    for outer in range(1, settings.max_outer_iterations + 1):
        multipliers, rho = tension.copy(), penalty

        def merit(z: np.ndarray) -> Tuple[float, np.ndarray]:
            value, grad = problem.energy(z)
            shifted = np.maximum(multipliers - rho * problem.constraints(z), 0.0)
            value += float(np.sum(shifted ** 2 - multipliers ** 2)) / (2.0 * rho)
            return value, grad + problem.rows.T @ shifted

        result = optimize.minimize(merit, y, jac=True, method="BFGS",
                                   options={"gtol": settings.inner_tolerance,
                                            "maxiter": settings.max_inner_iterations})
        y = result.x
        tension = np.maximum(multipliers - rho * problem.constraints(y), 0.0)
        violation = float(np.max(np.abs(np.minimum(problem.constraints(y), tension / rho)), initial=0.0))
        logger.debug(f"outer {outer}: violation {violation:.3e} mm, penalty {rho:.1e}, "
                     f"inner iterations {result.nit}")
        if violation < settings.constraint_tolerance:
            if not result.success:
                logger.warning(f"inner minimizer stopped early: {result.message}")
            break
        if violation > 0.25 * previous:
            penalty = min(10.0 * penalty, MAX_PENALTY)
        previous = violation
    return y, tension, outer


def _polish(problem: _Problem, y: np.ndarray, tension: np.ndarray,
            settings: SolverSettings) -> Tuple[np.ndarray, np.ndarray]:
    """Newton steps on the KKT system of the taut tendons."""
    active = np.flatnonzero(tension > 0.0)
    rows = problem.rows[active]
    best = max(_kkt_residual(problem, y, tension))
    for _ in range(settings.polish_steps):
        size = y.size
        matrix = np.zeros((size + active.size, size + active.size))
        matrix[:size, :size] = problem.hessian(y)
        matrix[:size, size:] = rows.T
        matrix[size:, :size] = rows
        rhs = -np.concatenate([
            problem.lagrangian_gradient(y, tension),
            rows @ y + problem.pulls[active],
        ])
        try:
            step = np.linalg.solve(matrix, rhs)
        except np.linalg.LinAlgError:
            break
        trial_y = y + step[:size]
        trial_tension = tension.copy()
        trial_tension[active] += step[size:]
        if np.any(trial_tension[active] <= 0.0):
            break
        residual = max(_kkt_residual(problem, trial_y, trial_tension))
        if residual >= best:
            break
        y, tension, best = trial_y, trial_tension, residual
    return y, tension


def solve_equilibrium(chain: Sequence[SegmentSpec], command: ActuationCommand, load: LoadCase,
                      settings: Optional[SolverSettings] = None,
                      measured_segment: Optional[int] = None) -> EquilibriumResult:
    """Minimize rod energy under pull-only tendon constraints.

    Returns the equilibrium with tendon tensions equal to the constraint
    multipliers. ``measured_segment`` selects the segment whose tip angle,
    CC-fit angle and vertical rise are reported (default: the distal one).
    """
    settings = settings or SolverSettings()
    chain = list(chain)
    if command.n_segments != len(chain):
        raise InvalidArgumentError(
            f"command has pulls for {command.n_segments} segments, chain has {len(chain)}"
        )
    for index, (segment, pulls) in enumerate(zip(chain, command.pulls)):
        if len(pulls) != segment.layout.count:
            raise InvalidArgumentError(
                f"segment {index + 1}: {len(pulls)} pulls for {segment.layout.count} tendons"
            )
    measured = len(chain) - 1 if measured_segment is None else measured_segment
    if not 0 <= measured < len(chain):
        raise InvalidArgumentError(f"measured segment {measured} outside chain of {len(chain)}")

    plane = _bending_plane(chain, command)
    model = RodModel(chain, load, settings.subdivisions)
    problem = _Problem(model, actuated_tendons(command.pulls), plane)

    y, tension = problem.gravity_free_guess()
    hanging = hanging_state(chain, load, settings.subdivisions)
    if not problem.tendons:
        # nothing constrains the rod; the hanging pose is the exact minimizer
        y = hanging.as_vector() / problem.scale
    y, tension, outer = _augmented_lagrangian(problem, y, tension, settings)
    y, tension = _polish(problem, y, tension, settings)

    stationarity, violation = _kkt_residual(problem, y, tension)
    energy, gradient = problem.energy(y)
    gradient_scale = max(1.0, float(np.max(np.abs(gradient), initial=0.0)))
    vector = problem.to_state(y)
    if not np.all(np.isfinite(vector)) or np.any(vector[model.size:] <= -1.0):
        raise SolverFailureError("equilibrium left the admissible region", stationarity, outer)
    if violation > 100.0 * settings.constraint_tolerance:
        raise SolverFailureError(f"tendon constraints violated by {violation:.3e} mm", stationarity, outer)
    if stationarity > max(1e-6, 100.0 * settings.inner_tolerance) * gradient_scale:
        raise SolverFailureError("equilibrium not reached", stationarity, outer)

    state = RodState.from_vector(vector, settings.subdivisions)
    for (segment, tendon, pull), value in zip(problem.tendons, tension):
        if not value > 0.0:
            continue
        path = tendon_path_length(state, chain, segment, tendon, plane)
        gap = abs(path - (model.rest_length_to(segment) - pull))
        if gap > 100.0 * settings.constraint_tolerance:
            raise SolverFailureError(
                f"taut tendon s{segment + 1}.t{tendon + 1} path is {path:.6g} mm, "
                f"{gap:.3e} mm away from its pulled length", stationarity, outer,
            )
    base = node_positions(model, hanging.as_vector())
    nodes = node_positions(model, vector)
    ends = [model.segment_end_node(k) for k in range(len(chain))]
    displacements = [float(nodes[e, 1] - base[e, 1]) for e in ends]
    angles = [float(a) for a in tip_angles(model, vector)]
    ccfit = [
        ccfit_angle_from_state(state, chain, settings.marker_count,
                               None if settings.marker_span is None else min(settings.marker_span, spec.length),
                               segment=k)
        for k, spec in enumerate(chain)
    ]

    kappa = state.kappa[model.segment_slice(measured)]
    mean_abs = float(np.mean(np.abs(kappa)))
    nonuniformity = float(np.std(kappa) / mean_abs) if mean_abs > 0.0 else 0.0

    tensions = []
    for (segment, tendon, pull), value in zip(problem.tendons, tension):
        slack = not value > 0.0
        reported = 0.0 if slack else float(value) + chain[segment].material.tension_offset
        tensions.append(TendonTension(segment, tendon, pull, reported, slack))

    result = EquilibriumResult(
        tip_angle=angles[measured],
        ccfit_angle=ccfit[measured],
        vertical_displacement=displacements[measured],
        tendon_tensions=tensions,
        state=state,
        nonuniformity=nonuniformity,
        measured_segment=measured,
        plane_angle=plane,
        energy=energy,
        kkt_residual=max(stationarity, violation),
        iterations=outer,
        segment_angles=angles,
        segment_ccfit_angles=ccfit,
        segment_displacements=displacements,
    )
    logger.debug(f"equilibrium after {outer} outer iterations: "
                 f"ccfit {math.degrees(result.ccfit_angle):.2f} deg, "
                 f"rise {result.vertical_displacement:.2f} mm, max tension {result.max_tension:.3f} N")
    return result


def payload_sweep(chain: Sequence[SegmentSpec], command: ActuationCommand,
                  payloads: Sequence[float] = STANDARD_PAYLOADS, load: Optional[LoadCase] = None,
                  settings: Optional[SolverSettings] = None,
                  measured_segment: Optional[int] = None) -> List[EquilibriumResult]:
    """Solve the same command at each tip payload (g)."""
    base = load or LoadCase()
    return [
        solve_equilibrium(chain, command, replace(base, payload_mass=float(mass)), settings, measured_segment)
        for mass in payloads
    ]


def stacking_sweep(segment: SegmentSpec, pull: float, tendon: int = 0,
                   counts: Sequence[int] = (1, 2, 3), load: Optional[LoadCase] = None,
                   settings: Optional[SolverSettings] = None) -> List[EquilibriumResult]:
    """Pull one base-segment tendon of chains of identical segments; report the base segment."""
    results = []
    for count in counts:
        if count < 1:
            raise InvalidArgumentError(f"segment count must be at least 1, got {count}")
        command = ActuationCommand.single(count, 0, tendon, pull, segment.layout.count)
        results.append(solve_equilibrium([segment] * count, command, load or LoadCase(), settings, 0))
    return results
