#!/usr/bin/env python3
"""
Material calibration against payload measurements.

Bending stiffness, axial stiffness and an optional constant tension offset
are fitted by Levenberg-Marquardt. Every residual evaluation runs the statics
solver; stiffnesses are searched in log space so they stay positive. Each
residual is normalized by its target so angles, displacements and tensions
weigh alike; targets missing from an observation are left out.
"""

import copy
import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from .errors import InvalidArgumentError, NoSolutionError, SolverFailureError
from .kinematics import ActuationCommand
from .reporting import write_json
from .statics import LoadCase, MaterialParams, SegmentSpec, SolverSettings, solve_equilibrium

OBSERVATION_HEADER = ("material", "payload_g", "pull_mm", "angle_deg", "z_mm", "tension_n", "length_mm")
RESIDUAL_HEADER = (
    "material", "payload_g", "pull_mm",
    "angle_target_deg", "angle_predicted_deg", "angle_rel_error",
    "z_target_mm", "z_predicted_mm", "z_rel_error",
    "tension_target_n", "tension_predicted_n", "tension_rel_error",
)

DEFAULT_BENDING_STIFFNESS = 500.0  # N*mm^2
DEFAULT_AXIAL_STIFFNESS = 50.0  # N
INITIAL_DAMPING = 1e-3
MAX_DAMPING = 1e12
STEP_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
JACOBIAN_STEP = 1e-6


def _reach(theta: float) -> float:
    """(1 - cos t) / t, the planar reach of a unit-length arc."""
    if theta < 1e-6:
        return theta / 2.0 - theta ** 3 / 24.0
    return (1.0 - math.cos(theta)) / theta


def _reach_peak() -> float:
    # the reach is maximal where theta = tan(theta / 2)
    low, high = 2.0, 3.0
    for _ in range(200):
        mid = 0.5 * (low + high)
        if mid - math.tan(mid / 2.0) > 0.0:
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)


REACH_PEAK_THETA = _reach_peak()


def fit_theta_max(r_max: float, length: float, tolerance: float = 1e-12) -> float:
    """Bend angle whose constant-curvature tip sits ``r_max`` mm off the axis."""
    if not length > 0.0:
        raise InvalidArgumentError(f"length must be positive, got {length}")
    ceiling = length * _reach(REACH_PEAK_THETA)
    if not 0.0 < r_max < ceiling:
        raise NoSolutionError(f"r_max {r_max} mm is outside the reachable range (0, {ceiling:.6f}) mm")
    low, high = 0.0, REACH_PEAK_THETA
    while high - low > tolerance:
        mid = 0.5 * (low + high)
        if length * _reach(mid) < r_max:
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)


@dataclass(frozen=True)
class Observation:
    """One payload trial; any of the three targets may be missing."""
    material: str
    payload: float  # g
    pull: float  # mm
    ccfit_angle: Optional[float]  # rad
    vertical_displacement: Optional[float]  # mm
    tension: Optional[float]  # N
    length: float  # mm

    def __post_init__(self) -> None:
        if self.payload < 0.0 or self.pull < 0.0:
            raise InvalidArgumentError("payload and pull must be non-negative")
        if not self.length > 0.0:
            raise InvalidArgumentError(f"segment length must be positive, got {self.length}")
        if self.ccfit_angle is not None and not 0.0 <= self.ccfit_angle <= math.pi:
            raise InvalidArgumentError(f"bending angle {self.ccfit_angle} rad outside [0, pi]")
        if self.tension is not None and self.tension < 0.0:
            raise InvalidArgumentError(f"tension must be non-negative, got {self.tension}")

    def targets(self) -> List[Tuple[int, float]]:
        """(quantity index, target) for angle, displacement and tension when present."""
        values = (self.ccfit_angle, self.vertical_displacement, self.tension)
        return [(k, v) for k, v in enumerate(values) if v is not None]

    def describe(self) -> str:
        return f"{self.material} payload {self.payload:g} g pull {self.pull:g} mm"


@dataclass(frozen=True)
class Prediction:
    ccfit_angle: float  # rad
    vertical_displacement: float  # mm
    tension: float  # N

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.ccfit_angle, self.vertical_displacement, self.tension)


@dataclass
class CalibrationResult:
    """Fitted material, residuals and fit statistics."""
    material: MaterialParams
    observations: List[Observation]
    predictions: List[Prediction]
    residuals: np.ndarray
    relative_residual_norm: float
    initial_residual_norm: float
    iterations: int = 0
    history: List[float] = field(default_factory=list)


def predict(material: MaterialParams, spec: SegmentSpec, observation: Observation,
            settings: Optional[SolverSettings] = None, load: Optional[LoadCase] = None) -> Prediction:
    """Model response of one segment made of ``material`` to an observation's trial."""
    segment = replace(spec, material=material, length=observation.length)
    command = ActuationCommand.single(1, 0, 0, observation.pull, segment.layout.count)
    trial = replace(load or LoadCase(), payload_mass=observation.payload)
    try:
        result = solve_equilibrium([segment], command, trial, settings)
    except SolverFailureError as exc:
        raise SolverFailureError(str(exc.args[0]), exc.gradient_norm, exc.iterations,
                                 context=observation.describe()) from exc
    tension = result.tendon_tensions[0].tension if result.tendon_tensions else 0.0
    return Prediction(result.ccfit_angle, result.vertical_displacement, tension)


def _normalized(observations: Sequence[Observation], predictions: Sequence[Prediction]) -> np.ndarray:
    residuals = []
    for obs, pred in zip(observations, predictions):
        values = pred.as_tuple()
        for quantity, target in obs.targets():
            scale = abs(target) if target != 0.0 else 1.0
            residuals.append((values[quantity] - target) / scale)
    return np.array(residuals)


def _rms(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals ** 2))) if residuals.size else 0.0


def fit_material(observations: Sequence[Observation], spec: SegmentSpec, initial: MaterialParams,
                 settings: Optional[SolverSettings] = None, fit_offset: bool = True,
                 load: Optional[LoadCase] = None, max_iterations: int = MAX_ITERATIONS,
                 fit_bending: bool = True) -> CalibrationResult:
    """Levenberg-Marquardt fit of ([EI, ]EA[, tension offset]) to the observations.

    Separating EI from EA needs trials at two payloads at least; with
    ``fit_bending=False`` EI stays at its initial value and a single
    tension reading is enough to fit EA.

    Damping starts at 1e-3 and is multiplied by 10 after a rejected step and
    divided by 10 after an accepted one. The fit stops once the relative
    parameter step drops below 1e-8 or after ``max_iterations``.
    """
    observations = list(observations)
    free = [k for k, on in enumerate((fit_bending, True, fit_offset)) if on]
    n_params = len(free)
    n_residuals = sum(len(o.targets()) for o in observations)
    if not observations:
        raise InvalidArgumentError("calibration needs at least one observation")
    if fit_bending and (len(observations) < 2 or len({o.payload for o in observations}) < 2):
        raise InvalidArgumentError("fitting EI and EA needs at least two observations at two different payloads")
    if n_residuals < n_params:
        raise InvalidArgumentError(
            f"{n_residuals} targets cannot determine {n_params} parameters"
        )

    start = np.array([math.log(initial.bending_stiffness), math.log(initial.axial_stiffness),
                      initial.tension_offset])

    def material_at(params: np.ndarray) -> MaterialParams:
        full = start.copy()
        full[free] = params
        return initial.with_stiffness(math.exp(full[0]), math.exp(full[1]), float(full[2]))

    def evaluate(params: np.ndarray) -> Tuple[np.ndarray, List[Prediction]]:
        material = material_at(params)
        predictions = [predict(material, spec, obs, settings, load) for obs in observations]
        return _normalized(observations, predictions), predictions

    params = start[free]
    residuals, predictions = evaluate(params)
    cost = float(residuals @ residuals)
    initial_norm = _rms(residuals)
    history = [initial_norm]
    damping = INITIAL_DAMPING
    iteration = 0
    logger.info(f"calibrating {initial.name}: {len(observations)} observations, "
                f"initial residual {initial_norm:.4f}")

    for iteration in range(1, max_iterations + 1):
        jacobian = np.empty((residuals.size, n_params))
        for j in range(n_params):
            step = JACOBIAN_STEP * max(1.0, abs(params[j]))
            bumped = params.copy()
            bumped[j] += step
            jacobian[:, j] = (evaluate(bumped)[0] - residuals) / step
        normal = jacobian.T @ jacobian
        gradient = jacobian.T @ residuals
        diag = np.maximum(np.diag(normal), 1e-12 * max(1.0, float(np.trace(normal))))

        accepted = False
        delta = np.zeros(n_params)
        while damping <= MAX_DAMPING:
            try:
                delta = np.linalg.solve(normal + damping * np.diag(diag), -gradient)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = params + delta
            try:
                trial_residuals, trial_predictions = evaluate(trial)
            except SolverFailureError as exc:
                # an overshooting trial step is rejected; failures at accepted points propagate
                logger.debug(f"trial step rejected: {exc}")
                damping *= 10.0
                continue
            trial_cost = float(trial_residuals @ trial_residuals)
            if trial_cost < cost:
                params, residuals, predictions, cost = trial, trial_residuals, trial_predictions, trial_cost
                damping = max(damping / 10.0, 1e-12)
                accepted = True
                break
            damping *= 10.0

        history.append(_rms(residuals))
        logger.debug(f"LM iteration {iteration}: residual {history[-1]:.6f}, damping {damping:.1e}")
        if not accepted:
            logger.debug("no downhill step left")
            break
        if np.linalg.norm(delta) <= STEP_TOLERANCE * (np.linalg.norm(params) + STEP_TOLERANCE):
            break

    result = CalibrationResult(
        material=material_at(params),
        observations=observations,
        predictions=predictions,
        residuals=residuals,
        relative_residual_norm=_rms(residuals),
        initial_residual_norm=initial_norm,
        iterations=iteration,
        history=history,
    )
    logger.info(f"calibrated {initial.name}: EI {result.material.bending_stiffness:.4g} N*mm^2, "
                f"EA {result.material.axial_stiffness:.4g} N, offset {result.material.tension_offset:.4g} N, "
                f"residual {result.relative_residual_norm:.4f}")
    return result


def _relative(predicted: float, target: Optional[float]) -> Optional[float]:
    if target is None:
        return None
    return (predicted - target) / (abs(target) if target != 0.0 else 1.0)


def residual_report(result: CalibrationResult) -> List[Dict[str, Optional[Union[str, float]]]]:
    """One row per observation: targets, predictions and relative errors (degrees for angles)."""
    rows = []
    for obs, pred in zip(result.observations, result.predictions):
        angle_target = None if obs.ccfit_angle is None else math.degrees(obs.ccfit_angle)
        rows.append({
            "material": obs.material,
            "payload_g": obs.payload,
            "pull_mm": obs.pull,
            "angle_target_deg": angle_target,
            "angle_predicted_deg": math.degrees(pred.ccfit_angle),
            "angle_rel_error": _relative(pred.ccfit_angle, obs.ccfit_angle),
            "z_target_mm": obs.vertical_displacement,
            "z_predicted_mm": pred.vertical_displacement,
            "z_rel_error": _relative(pred.vertical_displacement, obs.vertical_displacement),
            "tension_target_n": obs.tension,
            "tension_predicted_n": pred.tension,
            "tension_rel_error": _relative(pred.tension, obs.tension),
        })
    return rows


def _optional(text: str, line: int, column: str) -> Optional[float]:
    text = text.strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        raise InvalidArgumentError(f"line {line}: {column} is not a number: {text!r}") from None


def read_observations(path: Union[str, Path], material: Optional[str] = None) -> List[Observation]:
    """Load observations; extra columns (e.g. a source note) are ignored."""
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row and not row[0].startswith("#")]
    if not rows:
        raise InvalidArgumentError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in OBSERVATION_HEADER if c not in header]
    if missing:
        raise InvalidArgumentError(f"{path}: missing columns {', '.join(missing)}")
    column = {name: header.index(name) for name in OBSERVATION_HEADER}

    observations = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) < len(header):
            raise InvalidArgumentError(f"{path}: line {line}: expected {len(header)} columns, got {len(row)}")
        name = row[column["material"]].strip()
        if material is not None and name != material:
            continue
        values = {c: _optional(row[column[c]], line, c) for c in OBSERVATION_HEADER[1:]}
        for required in ("payload_g", "pull_mm", "length_mm"):
            if values[required] is None:
                raise InvalidArgumentError(f"{path}: line {line}: {required} is required")
        angle = values["angle_deg"]
        observations.append(Observation(
            material=name,
            payload=values["payload_g"],
            pull=values["pull_mm"],
            ccfit_angle=None if angle is None else math.radians(angle),
            vertical_displacement=values["z_mm"],
            tension=values["tension_n"],
            length=values["length_mm"],
        ))
    return observations


def material_entry(material: MaterialParams) -> Dict[str, float]:
    """Config-format entry of one material."""
    return {
        "bending_stiffness": material.bending_stiffness,
        "axial_stiffness": material.axial_stiffness,
        "linear_density": material.linear_density,
        "tension_offset": material.tension_offset,
    }


def write_material_library(path: Union[str, Path], materials: Dict[str, MaterialParams],
                           base: Optional[Dict[str, Any]] = None) -> Path:
    """Write fitted materials into the ``materials`` section of a JSON config.

    With ``base`` (a project configuration as plain data) the file is that
    configuration with the fitted entries replaced, so it loads back as a
    project config. Without it an existing file is merged into.
    """
    path = Path(path)
    library: Dict[str, Any] = {"materials": {}}
    if base is not None:
        library = copy.deepcopy(base)
    elif path.exists():
        library = json.loads(path.read_text(encoding="utf-8"))
    library.setdefault("materials", {})
    for name, material in materials.items():
        library["materials"][name] = material_entry(material)
    return write_json(path, library)
