"""Planar statics of stacked tendon-driven segments under gravity and payload."""

from .energy import (
    energy_gradient,
    hanging_state,
    marker_positions,
    rod_positions,
    tendon_path_length,
    total_energy,
)
from .estimators import ccfit_angle_from_state, deformed_length
from .model import (
    STANDARD_GRAVITY,
    EquilibriumResult,
    LoadCase,
    MaterialParams,
    RodState,
    SegmentSpec,
    TendonTension,
)
from .solver import STANDARD_PAYLOADS, SolverSettings, payload_sweep, solve_equilibrium, stacking_sweep

__all__ = [
    "STANDARD_GRAVITY",
    "STANDARD_PAYLOADS",
    "EquilibriumResult",
    "LoadCase",
    "MaterialParams",
    "RodState",
    "SegmentSpec",
    "SolverSettings",
    "TendonTension",
    "ccfit_angle_from_state",
    "deformed_length",
    "energy_gradient",
    "hanging_state",
    "marker_positions",
    "payload_sweep",
    "rod_positions",
    "solve_equilibrium",
    "stacking_sweep",
    "tendon_path_length",
    "total_energy",
]
