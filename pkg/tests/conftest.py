#!/usr/bin/env python3
"""
Shared fixtures for the soft-arm test suite.
"""

import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from softarm.kinematics import TendonLayout  # noqa: E402
from softarm.statics import MaterialParams, SegmentSpec, SolverSettings  # noqa: E402


@pytest.fixture
def layout():
    """Three tendons at 7 mm pitch inside a 12 mm body."""
    return TendonLayout.symmetric(7.0, 3, 12.0)


@pytest.fixture
def stiff_material():
    """Ecoflex 00-50 starting values."""
    return MaterialParams("ecoflex-0050", 7500.0, 70.0, 0.45)


@pytest.fixture
def segment(layout, stiff_material):
    """100 mm segment with a 5 g end cap."""
    return SegmentSpec(100.0, layout, stiff_material, end_cap_mass=5.0)


@pytest.fixture
def coarse_settings():
    """Solver settings with a coarse discretization for fast tests."""
    return SolverSettings(subdivisions=8)


@pytest.fixture
def config_data():
    """Minimal valid project configuration."""
    return {
        "materials": {
            "ecoflex-0010": {"bending_stiffness": 2000.0, "axial_stiffness": 35.0, "linear_density": 0.45},
            "ecoflex-0050": {"bending_stiffness": 7500.0, "axial_stiffness": 70.0, "linear_density": 0.45},
        },
        "segments": [
            {"material": "ecoflex-0050", "length": 100.0},
            {"material": "ecoflex-0050", "length": 100.0},
        ],
        "solver": {"subdivisions": 8},
        "sweep": {"theta_steps": 6, "phi_steps": 8, "r_max_target": 51.3},
    }


@pytest.fixture
def config_file(tmp_path, config_data):
    """Project configuration written as JSON."""
    path = tmp_path / "arm.json"
    path.write_text(json.dumps(config_data), encoding="utf-8")
    return path
