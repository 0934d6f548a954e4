#!/usr/bin/env python3
"""
Unit tests for the rod energy model and the equilibrium solver.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from softarm.errors import InvalidArgumentError
from softarm.kinematics import ActuationCommand
from softarm.statics import (
    LoadCase,
    MaterialParams,
    RodState,
    SegmentSpec,
    SolverSettings,
    ccfit_angle_from_state,
    energy_gradient,
    hanging_state,
    marker_positions,
    payload_sweep,
    rod_positions,
    solve_equilibrium,
    stacking_sweep,
    tendon_path_length,
    total_energy,
)
from softarm.statics.energy import half_sinc


def _closed_form(pull, pitch, length, bending, axial):
    """Gravity-free single-tendon equilibrium: (tip angle, tension)."""
    tension = pull / (pitch * pitch * length / bending + length / axial)
    return tension * pitch * length / bending, tension


class TestModel:
    """Test model value types."""

    def test_material_validation(self):
        """Test stiffnesses must be positive."""
        with pytest.raises(InvalidArgumentError):
            MaterialParams("bad", 0.0, 10.0)
        with pytest.raises(InvalidArgumentError):
            MaterialParams("bad", 10.0, -1.0)

    def test_with_stiffness_keeps_density(self, stiff_material):
        """Test replacing stiffnesses keeps the other properties."""
        updated = stiff_material.with_stiffness(100.0, 20.0, 1.5)
        assert updated.linear_density == stiff_material.linear_density
        assert updated.tension_offset == 1.5
        assert updated.name == stiff_material.name

    def test_state_validation(self):
        """Test rod states reject inconsistent arrays."""
        with pytest.raises(InvalidArgumentError):
            RodState(np.zeros(8), np.zeros(7), 4)
        with pytest.raises(InvalidArgumentError):
            RodState(np.zeros(6), np.zeros(6), 4)
        with pytest.raises(InvalidArgumentError):
            RodState(np.zeros(4), np.full(4, -1.0), 4)

    def test_negative_payload(self):
        """Test payloads are non-negative."""
        with pytest.raises(InvalidArgumentError):
            LoadCase(payload_mass=-1.0)


class TestEnergy:
    """Test energy, gradient and geometry of rod states."""

    def test_half_sinc_series(self):
        """Test the series branch matches the closed form and derivative."""
        alpha = np.array([1.9e-4, 2.1e-4, 0.5])
        value, slope = half_sinc(alpha)
        expected = np.sin(alpha / 2.0) / (alpha / 2.0)
        np.testing.assert_allclose(value, expected, rtol=1e-12)
        step = 1e-7
        numeric = (half_sinc(alpha + step)[0] - half_sinc(alpha - step)[0]) / (2.0 * step)
        np.testing.assert_allclose(slope, numeric, atol=1e-8)

    def test_straight_hanging_positions(self, segment):
        """Test an unstrained straight rod hangs along -z."""
        nodes = rod_positions(RodState.straight(1, 10), [segment])
        np.testing.assert_allclose(nodes[:, 0], 0.0, atol=1e-12)
        np.testing.assert_allclose(nodes[:, 1], -np.linspace(0.0, 100.0, 11), atol=1e-9)

    def test_uniform_bend_matches_arc(self, segment):
        """Test a uniform-curvature state reproduces the circular arc tip."""
        kappa = 0.012
        nodes = rod_positions(RodState.uniform(1, 20, kappa), [segment])
        theta = kappa * 100.0
        np.testing.assert_allclose(nodes[-1], [(1.0 - math.cos(theta)) / kappa, -math.sin(theta) / kappa],
                                   atol=1e-9)

    def test_gradient_matches_finite_differences(self, segment):
        """Test the analytic gradient with gravity and payload."""
        chain = [segment, segment]
        load = LoadCase(payload_mass=50.0)
        rng = np.random.default_rng(3)
        state = RodState(rng.normal(scale=0.01, size=12), rng.normal(scale=0.05, size=12), 6)
        gradient = energy_gradient(state, chain, load)
        vector = state.as_vector()
        numeric = np.empty_like(vector)
        step = 1e-6
        for k in range(vector.size):
            bump = np.zeros_like(vector)
            bump[k] = step
            up = total_energy(RodState.from_vector(vector + bump, 6), chain, load)
            down = total_energy(RodState.from_vector(vector - bump, 6), chain, load)
            numeric[k] = (up - down) / (2.0 * step)
        np.testing.assert_allclose(gradient, numeric, rtol=1e-5, atol=1e-6)

    @pytest.mark.parametrize("gravity", [True, False])
    def test_gradient_over_random_states(self, segment, gravity):
        """Test the analytic gradient on many random states with and without gravity."""
        chain = [segment, segment]
        load = LoadCase(payload_mass=50.0, gravity_enabled=gravity)
        rng = np.random.default_rng(17)
        step = 1e-6
        for _ in range(100):
            state = RodState(rng.normal(scale=0.02, size=8), rng.uniform(-0.1, 0.2, size=8), 4)
            gradient = energy_gradient(state, chain, load)
            vector = state.as_vector()
            numeric = np.empty_like(vector)
            for k in range(vector.size):
                bump = np.zeros_like(vector)
                bump[k] = step
                up = total_energy(RodState.from_vector(vector + bump, 4), chain, load)
                down = total_energy(RodState.from_vector(vector - bump, 4), chain, load)
                numeric[k] = (up - down) / (2.0 * step)
            assert np.max(np.abs(gradient - numeric)) <= 1e-6 * max(1.0, float(np.max(np.abs(gradient))))

    def test_hanging_state_is_stationary(self, segment):
        """Test the hanging pose has zero gradient."""
        load = LoadCase(payload_mass=100.0)
        state = hanging_state([segment], load, 10)
        assert np.all(state.strain > 0.0)
        np.testing.assert_allclose(energy_gradient(state, [segment], load), 0.0, atol=1e-10)

    def test_tendon_path_length(self, segment):
        """Test tendon length shortens with bending toward it."""
        assert tendon_path_length(RodState.straight(1, 10), [segment], 0, 0) == pytest.approx(100.0)
        bent = RodState.uniform(1, 10, 0.01)
        assert tendon_path_length(bent, [segment], 0, 0) == pytest.approx(100.0 * (1.0 - 0.07))
        with pytest.raises(InvalidArgumentError):
            tendon_path_length(bent, [segment], 1, 0)

    def test_marker_positions(self, segment):
        """Test markers lie in the bending plane and end at the tip."""
        state = RodState.uniform(1, 10, 0.01)
        markers = marker_positions(state, [segment], count=5, span=20.0)
        assert markers.shape == (5, 3)
        np.testing.assert_allclose(markers[:, 1], 0.0)
        tip = rod_positions(state, [segment])[-1]
        np.testing.assert_allclose(markers[-1, [0, 2]], tip, atol=1e-9)
        with pytest.raises(InvalidArgumentError):
            marker_positions(state, [segment], span=150.0)

    def test_ccfit_angle_of_arc(self, segment):
        """Test the CC-fit angle of an unstrained arc equals kappa * length."""
        state = RodState.uniform(1, 20, 0.01)
        assert ccfit_angle_from_state(state, [segment]) == pytest.approx(1.0, rel=1e-7)
        assert ccfit_angle_from_state(state, [segment], span=20.0) == pytest.approx(1.0, rel=1e-7)

    def test_ccfit_angle_sign(self, segment):
        """Test bending away from the tendon side reads negative."""
        state = RodState.uniform(1, 20, -0.01)
        assert ccfit_angle_from_state(state, [segment]) == pytest.approx(-1.0, rel=1e-7)

    def test_ccfit_angle_straight(self, segment):
        """Test a straight rod reads zero."""
        assert ccfit_angle_from_state(RodState.straight(1, 10), [segment]) == 0.0


class TestSolver:
    """Test static equilibria."""

    def test_gravity_free_closed_form(self, segment, coarse_settings):
        """Test tip angle and tension against the closed-form solution."""
        command = ActuationCommand.single(1, 0, 0, 20.0)
        result = solve_equilibrium([segment], command, LoadCase(gravity_enabled=False), coarse_settings)
        theta, tension = _closed_form(20.0, 7.0, 100.0, 7500.0, 70.0)
        assert result.tip_angle == pytest.approx(theta, rel=1e-5)
        assert result.tendon_tensions[0].tension == pytest.approx(tension, rel=1e-5)
        assert not result.tendon_tensions[0].slack
        assert result.nonuniformity == pytest.approx(0.0, abs=1e-6)
        assert result.ccfit_angle > 0.0
        assert result.vertical_displacement > 0.0

    def test_tendon_constraint_is_tight(self, segment, coarse_settings):
        """Test the pulled tendon ends exactly at its free length."""
        command = ActuationCommand.single(1, 0, 0, 30.0)
        result = solve_equilibrium([segment], command, LoadCase(), coarse_settings)
        length = tendon_path_length(result.state, [segment], 0, 0)
        assert length == pytest.approx(100.0 - 30.0, abs=1e-4)

    def test_soft_segment_reaches_pulled_length(self, layout, coarse_settings):
        """Test a soft 120 mm segment under gravity shortens its tendon by the full pull."""
        soft = SegmentSpec(120.0, layout, MaterialParams("soft", 1600.0, 32.0, 0.45), end_cap_mass=5.0)
        command = ActuationCommand.single(1, 0, 0, 45.0)
        result = solve_equilibrium([soft], command, LoadCase(), coarse_settings)
        assert tendon_path_length(result.state, [soft], 0, 0) == pytest.approx(75.0, abs=1e-4)
        assert result.max_tension > 1.0
        assert result.ccfit_angle > math.radians(90.0)

    def test_soft_segment_gravity_free_closed_form(self, layout, coarse_settings):
        """Test the closed-form solution holds for a soft segment with a large pull."""
        soft = SegmentSpec(120.0, layout, MaterialParams("soft", 1600.0, 32.0, 0.45))
        command = ActuationCommand.single(1, 0, 0, 45.0)
        result = solve_equilibrium([soft], command, LoadCase(gravity_enabled=False), coarse_settings)
        theta, tension = _closed_form(45.0, 7.0, 120.0, 1600.0, 32.0)
        assert result.tip_angle == pytest.approx(theta, rel=1e-5)
        assert result.tendon_tensions[0].tension == pytest.approx(tension, rel=1e-5)

    def test_marker_span_selects_fit_region(self, segment, coarse_settings):
        """Test the CC-fit angle uses the configured tip span, clamped to the segment."""
        command = ActuationCommand.single(1, 0, 0, 30.0)
        load = LoadCase(payload_mass=100.0)
        whole = solve_equilibrium([segment], command, load, coarse_settings)
        tip = solve_equilibrium([segment], command, load, replace(coarse_settings, marker_span=20.0))
        clamped = solve_equilibrium([segment], command, load, replace(coarse_settings, marker_span=500.0))
        np.testing.assert_array_equal(whole.state.as_vector(), tip.state.as_vector())
        assert tip.ccfit_angle == pytest.approx(
            ccfit_angle_from_state(tip.state, [segment], 5, 20.0), rel=1e-12)
        assert abs(tip.ccfit_angle - whole.ccfit_angle) > 1e-3
        assert clamped.ccfit_angle == pytest.approx(whole.ccfit_angle, rel=1e-12)

    def test_no_pull_hangs(self, segment, coarse_settings):
        """Test an idle command returns the hanging pose."""
        command = ActuationCommand(((0.0, 0.0, 0.0),))
        result = solve_equilibrium([segment], command, LoadCase(payload_mass=20.0), coarse_settings)
        assert result.tendon_tensions == []
        assert result.tip_angle == pytest.approx(0.0, abs=1e-9)
        assert result.vertical_displacement == pytest.approx(0.0, abs=1e-9)

    def test_bending_plane_follows_tendon(self, segment, coarse_settings):
        """Test pulling tendon 2 reports its angle as the bending plane."""
        command = ActuationCommand.single(1, 0, 1, 20.0)
        result = solve_equilibrium([segment], command, LoadCase(gravity_enabled=False), coarse_settings)
        assert result.plane_angle == pytest.approx(2.0 * math.pi / 3.0, abs=1e-9)
        theta, _ = _closed_form(20.0, 7.0, 100.0, 7500.0, 70.0)
        assert result.tip_angle == pytest.approx(theta, rel=1e-5)

    def test_tension_offset(self, segment, coarse_settings):
        """Test the material tension offset is added to taut tendons."""
        shifted = replace(segment, material=segment.material.with_stiffness(7500.0, 70.0, 2.0))
        command = ActuationCommand.single(1, 0, 0, 20.0)
        load = LoadCase(gravity_enabled=False)
        plain = solve_equilibrium([segment], command, load, coarse_settings)
        offset = solve_equilibrium([shifted], command, load, coarse_settings)
        assert offset.max_tension == pytest.approx(plain.max_tension + 2.0, rel=1e-6)

    def test_command_shape_checked(self, segment, coarse_settings):
        """Test command and chain must agree."""
        with pytest.raises(InvalidArgumentError):
            solve_equilibrium([segment], ActuationCommand.single(2, 0, 0, 10.0), LoadCase(), coarse_settings)
        with pytest.raises(InvalidArgumentError):
            solve_equilibrium([segment], ActuationCommand.single(1, 0, 0, 10.0), LoadCase(),
                              coarse_settings, measured_segment=1)

    def test_planes_must_agree(self, segment, coarse_settings):
        """Test segments pulled in different planes are refused."""
        command = ActuationCommand(((10.0, 0.0, 0.0), (0.0, 10.0, 0.0)))
        with pytest.raises(InvalidArgumentError):
            solve_equilibrium([segment, segment], command, LoadCase(), coarse_settings)

    def test_settings_validation(self):
        """Test solver settings reject bad values."""
        with pytest.raises(InvalidArgumentError):
            SolverSettings(inner_tolerance=0.0)
        with pytest.raises(InvalidArgumentError):
            SolverSettings(marker_count=2)

    @pytest.mark.slow
    def test_payload_lowers_tip(self, segment, coarse_settings):
        """Test heavier payloads reduce angle and rise and raise tension."""
        command = ActuationCommand.single(1, 0, 0, 45.0)
        results = payload_sweep([segment], command, (0.0, 50.0, 200.0), settings=coarse_settings)
        angles = [r.ccfit_angle for r in results]
        rises = [r.vertical_displacement for r in results]
        tensions = [r.max_tension for r in results]
        assert angles[0] > angles[1] > angles[2] > 0.0
        assert rises[0] > rises[1] > rises[2]
        assert tensions[0] < tensions[1] < tensions[2]

    @pytest.mark.slow
    def test_stacking_reduces_base_bend(self, segment, coarse_settings):
        """Test each carried segment reduces the base bend and raises tension by a growing step."""
        results = stacking_sweep(segment, 40.0, counts=(1, 2, 3), settings=coarse_settings)
        angles = [r.ccfit_angle for r in results]
        tensions = [r.max_tension for r in results]
        assert angles[0] > angles[1] > angles[2] > 0.0
        assert tensions[0] < tensions[1] < tensions[2]
        assert tensions[2] - tensions[1] > tensions[1] - tensions[0]
        assert all(r.measured_segment == 0 for r in results)

    @pytest.mark.slow
    def test_distal_pull_in_two_segments(self, segment, coarse_settings):
        """Test a distal tendon bends both its own segment and pulls through the base."""
        command = ActuationCommand(((0.0, 0.0, 0.0), (30.0, 0.0, 0.0)))
        result = solve_equilibrium([segment, segment], command, LoadCase(gravity_enabled=False), coarse_settings)
        assert result.measured_segment == 1
        assert result.segment_angles[1] > result.segment_angles[0]
        assert tendon_path_length(result.state, [segment, segment], 1, 0) == pytest.approx(200.0 - 30.0, abs=1e-4)


class TestEnergyProperties:
    """Test closed-form energy values and solver invariants."""

    def test_straight_gravity_free_energy(self, segment):
        """Test a straight unstrained rod stores no energy."""
        load = LoadCase(gravity_enabled=False)
        state = RodState.straight(1, 10)
        assert total_energy(state, [segment], load) == 0.0
        np.testing.assert_array_equal(energy_gradient(state, [segment], load), 0.0)

    def test_uniform_bending_energy(self, segment):
        """Test uniform curvature stores EI kappa^2 l / 2."""
        state = RodState.uniform(1, 10, 0.01)
        energy = total_energy(state, [segment], LoadCase(gravity_enabled=False))
        assert energy == pytest.approx(0.5 * 7500.0 * 0.01 ** 2 * 100.0, rel=1e-12)

    def test_gradient_scales_with_stiffness(self, segment):
        """Test doubling EI doubles the bending part of the gradient."""
        load = LoadCase(gravity_enabled=False)
        doubled = replace(segment, material=segment.material.with_stiffness(15000.0, 70.0))
        state = RodState(np.linspace(0.0, 0.01, 10), np.zeros(10), 10)
        np.testing.assert_allclose(energy_gradient(state, [doubled], load)[:10],
                                   2.0 * energy_gradient(state, [segment], load)[:10], rtol=1e-12)

    def test_tendon_path_matches_kinematics(self, segment):
        """Test the discretized tendon path equals the arc tendon length."""
        from softarm.kinematics import ArcParams, tendon_lengths

        state = RodState.uniform(1, 10, 0.008)
        expected = tendon_lengths(ArcParams(0.008, 0.0, 100.0), segment.layout)
        for tendon in range(3):
            assert tendon_path_length(state, [segment], 0, tendon) == pytest.approx(expected[tendon], rel=1e-12)

    def test_inextensible_limit(self, layout, coarse_settings):
        """Test a nearly rigid axis pins the bend angle to pull / pitch."""
        rigid = SegmentSpec(100.0, layout, MaterialParams("rigid", 7500.0, 1e8))
        command = ActuationCommand.single(1, 0, 0, 10.0)
        result = solve_equilibrium([rigid], command, LoadCase(gravity_enabled=False), coarse_settings)
        assert result.tip_angle == pytest.approx(10.0 / 7.0, rel=1e-5)

    def test_tensions_complement_tendon_slack(self, segment, coarse_settings):
        """Test taut tendons end at their pulled length and slack tendons carry no tension."""
        chain = [segment, segment]
        command = ActuationCommand(((10.0, 0.0, 0.0), (30.0, 0.0, 0.0)))
        result = solve_equilibrium(chain, command, LoadCase(gravity_enabled=False), coarse_settings)
        by_segment = {t.segment: t for t in result.tendon_tensions}
        assert by_segment[0].slack and by_segment[0].tension == 0.0
        assert not by_segment[1].slack and by_segment[1].tension > 0.0
        for entry in result.tendon_tensions:
            assert entry.tension >= 0.0
            gap = (100.0 * (entry.segment + 1) - entry.pull
                   - tendon_path_length(result.state, chain, entry.segment, entry.tendon))
            assert gap >= -1e-4
            assert entry.tension * gap == pytest.approx(0.0, abs=1e-3)
        assert tendon_path_length(result.state, chain, 0, 0) < 100.0 - 10.0 - 1.0

    def test_equilibrium_energy_below_feasible_states(self, segment, coarse_settings):
        """Test the equilibrium stores no more energy than other states meeting the pull."""
        load = LoadCase(payload_mass=50.0)
        command = ActuationCommand.single(1, 0, 0, 30.0)
        result = solve_equilibrium([segment], command, load, coarse_settings)
        assert result.energy == pytest.approx(total_energy(result.state, [segment], load), rel=1e-12)
        arc = RodState.uniform(1, 8, 30.0 / (7.0 * 100.0))
        free = solve_equilibrium([segment], command, LoadCase(gravity_enabled=False), coarse_settings)
        for candidate in (arc, free.state):
            assert tendon_path_length(candidate, [segment], 0, 0) <= 70.0 + 1e-4
            assert result.energy <= total_energy(candidate, [segment], load) + 1e-4

    def test_deterministic(self, segment, coarse_settings):
        """Test identical inputs give bit-identical results."""
        command = ActuationCommand.single(1, 0, 0, 25.0)
        first = solve_equilibrium([segment], command, LoadCase(payload_mass=20.0), coarse_settings)
        second = solve_equilibrium([segment], command, LoadCase(payload_mass=20.0), coarse_settings)
        np.testing.assert_array_equal(first.state.as_vector(), second.state.as_vector())
        assert first.max_tension == second.max_tension

    @pytest.mark.slow
    def test_stiffness_ordering(self, layout, coarse_settings):
        """Test softer grades bend further and need less tension."""
        command = ActuationCommand.single(1, 0, 0, 45.0)
        results = []
        for bending, axial in ((1600.0, 32.0), (3500.0, 45.0), (7500.0, 56.0)):
            spec = SegmentSpec(120.0, layout, MaterialParams("grade", bending, axial, 0.45), end_cap_mass=5.0)
            results.append(solve_equilibrium([spec], command, LoadCase(), coarse_settings))
        angles = [r.ccfit_angle for r in results]
        tensions = [r.max_tension for r in results]
        assert angles[0] >= angles[1] >= angles[2]
        assert tensions[0] <= tensions[1] <= tensions[2]
