#!/usr/bin/env python3
"""
Unit tests for motion-capture parsing, filtering, circle fitting and analysis.
"""

import io
import math

import numpy as np
import pytest

from softarm.errors import DegenerateFitError, InvalidArgumentError, MocapFormatError, MocapParseError
from softarm.mocap import (
    FrameAlignment,
    MocapFrame,
    MocapTrajectory,
    bending_angle_series,
    fit_circle_3d,
    parse_mocap_csv,
    read_mocap_csv,
    smooth_trajectory,
    tip_cloud,
    trajectory_from_positions,
    vertical_series,
    write_mocap_csv,
)
from softarm.mocap.filters import median_filter
from softarm.mocap.synthetic import arc_markers, synthesize_bending, synthesize_sweep, tip_marker_ids
from softarm.statics import RodState, SegmentSpec, ccfit_angle_from_state, deformed_length, marker_positions
from softarm.workspace import SweepConfig, max_radial_reach, sweep_workspace

SAMPLE = """frame,time_s,marker_id,x_mm,y_mm,z_mm
0,0.0,tip1,0.0,0.0,80.0
0,0.0,tip2,0.0,0.0,100.0
1,0.01,tip1,1.0,0.0,80.0
2,0.02,tip1,2.0,0.0,80.0
2,0.02,tip2,3.0,0.0,99.0
"""


def _rotation(axis, angle):
    """Rotation matrix about a unit axis."""
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    skew = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    return np.eye(3) + math.sin(angle) * skew + (1.0 - math.cos(angle)) * skew @ skew


class TestParsing:
    """Test the marker CSV format."""

    def test_parse_with_gaps(self):
        """Test frames, marker ids and gaps."""
        trajectory = parse_mocap_csv(io.StringIO(SAMPLE))
        assert len(trajectory) == 3
        assert trajectory.marker_ids == ("tip1", "tip2")
        series = trajectory.series("tip2")
        assert np.all(np.isnan(series[1]))
        np.testing.assert_allclose(series[2], [3.0, 0.0, 99.0])
        np.testing.assert_allclose(trajectory.times, [0.0, 0.01, 0.02])

    def test_written_file_parses_back(self):
        """Test serialization keeps every value exactly."""
        trajectory = synthesize_bending([0.0, 0.004, 0.011], 100.0)
        text = write_mocap_csv(trajectory)
        parsed = parse_mocap_csv(io.StringIO(text))
        for original, copy in zip(trajectory.frames, parsed.frames):
            assert original.time == copy.time
            for marker, position in original.markers.items():
                np.testing.assert_array_equal(position, copy.markers[marker])

    def test_read_from_path(self, tmp_path):
        """Test reading from a file path."""
        path = tmp_path / "session.csv"
        path.write_text(SAMPLE, encoding="utf-8")
        assert len(read_mocap_csv(path)) == 3

    def test_empty_file(self):
        """Test an empty file reports line 1."""
        with pytest.raises(MocapFormatError) as excinfo:
            parse_mocap_csv(io.StringIO(""))
        assert excinfo.value.line == 1

    def test_header_only(self):
        """Test a file without marker rows."""
        with pytest.raises(MocapFormatError, match="no marker rows"):
            parse_mocap_csv(io.StringIO(SAMPLE.splitlines()[0] + "\n"))

    def test_bad_header(self):
        """Test the header must match exactly."""
        with pytest.raises(MocapFormatError):
            parse_mocap_csv(io.StringIO("frame,time,marker,x,y,z\n0,0,a,0,0,0\n"))

    def test_bad_number_reports_line(self):
        """Test parse errors carry the offending line."""
        broken = SAMPLE.replace("1,0.01,tip1,1.0,0.0,80.0", "1,0.01,tip1,abc,0.0,80.0")
        with pytest.raises(MocapParseError) as excinfo:
            parse_mocap_csv(io.StringIO(broken))
        assert excinfo.value.line == 4
        assert str(excinfo.value).startswith("line 4:")

    def test_frames_out_of_order(self):
        """Test decreasing frame numbers are refused."""
        broken = SAMPLE + "1,0.03,tip1,0.0,0.0,80.0\n"
        with pytest.raises(MocapFormatError):
            parse_mocap_csv(io.StringIO(broken))

    def test_repeated_marker(self):
        """Test a marker may appear once per frame."""
        broken = SAMPLE + "2,0.02,tip2,0.0,0.0,80.0\n"
        with pytest.raises(MocapParseError):
            parse_mocap_csv(io.StringIO(broken))

    def test_column_count(self):
        """Test rows need six columns."""
        with pytest.raises(MocapParseError):
            parse_mocap_csv(io.StringIO(SAMPLE + "3,0.03,tip1,0.0,0.0\n"))


class TestMedianFilter:
    """Test median smoothing."""

    def test_removes_spike(self):
        """Test an isolated spike is removed."""
        values = np.zeros((9, 1))
        values[4] = 50.0
        np.testing.assert_allclose(median_filter(values, 3), np.zeros((9, 1)))

    def test_endpoints_unchanged(self):
        """Test the first and last samples keep their values."""
        values = np.array([[5.0], [0.0], [0.0], [0.0], [7.0]])
        out = median_filter(values, 5)
        assert out[0, 0] == 5.0
        assert out[-1, 0] == 7.0

    def test_window_shrinks_near_ends(self):
        """Test the second sample uses a three-wide window."""
        values = np.array([[0.0], [10.0], [1.0], [2.0], [3.0], [4.0], [5.0]])
        out = median_filter(values, 5)
        assert out[1, 0] == 1.0

    def test_even_window_rejected(self):
        """Test smoothing windows are odd."""
        trajectory = parse_mocap_csv(io.StringIO(SAMPLE))
        with pytest.raises(InvalidArgumentError):
            smooth_trajectory(trajectory, 4)

    def test_window_one_is_identity(self):
        """Test a one-sample window leaves the trajectory alone."""
        trajectory = parse_mocap_csv(io.StringIO(SAMPLE))
        assert smooth_trajectory(trajectory, 1) is trajectory

    def test_gaps_stay_gaps(self):
        """Test smoothing neither fills nor crosses gaps."""
        frames = []
        for index in range(9):
            markers = {"a": np.array([float(index), 0.0, 0.0])}
            if index != 4:
                markers["b"] = np.array([0.0, 100.0 if index == 2 else 0.0, 0.0])
            frames.append(MocapFrame(index, index * 0.01, markers))
        smoothed = smooth_trajectory(MocapTrajectory(tuple(frames)), 3)
        assert "b" not in smoothed.frames[4].markers
        assert smoothed.frames[2].markers["b"][1] == 0.0
        np.testing.assert_allclose(smoothed.series("a")[:, 0], np.arange(9.0))


class TestCircleFit:
    """Test the 3D circle fit."""

    def test_exact_circle(self):
        """Test points on a known circle."""
        angles = np.linspace(0.2, 1.4, 6)
        points = np.column_stack([5.0 + 30.0 * np.cos(angles), -2.0 + 30.0 * np.sin(angles), np.full(6, 7.0)])
        fit = fit_circle_3d(points)
        assert fit.radius == pytest.approx(30.0, rel=1e-9)
        np.testing.assert_allclose(fit.center, [5.0, -2.0, 7.0], atol=1e-7)
        np.testing.assert_allclose(fit.normal, [0.0, 0.0, 1.0], atol=1e-9)
        assert fit.rms_residual < 1e-8
        assert fit.curvature == pytest.approx(1.0 / 30.0)

    def test_rigid_motion(self):
        """Test the fit moves with the points."""
        angles = np.linspace(0.0, 1.0, 5)
        points = np.column_stack([40.0 * np.cos(angles), 40.0 * np.sin(angles), np.zeros(5)])
        rotation = _rotation([1.0, 2.0, 0.5], 0.8)
        shift = np.array([3.0, -4.0, 12.0])
        base = fit_circle_3d(points)
        moved = fit_circle_3d(points @ rotation.T + shift)
        assert moved.radius == pytest.approx(base.radius, rel=1e-9)
        np.testing.assert_allclose(moved.center, rotation @ base.center + shift, atol=1e-7)
        np.testing.assert_allclose(moved.normal, rotation @ base.normal, atol=1e-9)

    def test_noisy_points_minimize_spread(self):
        """Test no nearby center gives a smaller distance spread."""
        rng = np.random.default_rng(7)
        angles = np.linspace(0.0, 1.5, 12)
        points = np.column_stack([25.0 * np.cos(angles), 25.0 * np.sin(angles), np.zeros(12)])
        points[:, :2] += rng.normal(scale=0.2, size=(12, 2))
        fit = fit_circle_3d(points)

        def spread(center):
            dist = np.linalg.norm(points[:, :2] - center, axis=1)
            return float(np.sum((dist - dist.mean()) ** 2))

        best = spread(fit.center[:2])
        for du in np.linspace(-0.5, 0.5, 11):
            for dv in np.linspace(-0.5, 0.5, 11):
                assert spread(fit.center[:2] + [du, dv]) >= best - 1e-9

    def test_random_circles_against_grid_search(self):
        """Test 50 noisy tilted arcs: a grid search around the fitted center never does better."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            radius = rng.uniform(30.0, 150.0)
            start = rng.uniform(0.0, 2.0 * math.pi)
            angles = start + np.linspace(0.0, rng.uniform(1.5, 4.0), 12)
            planar = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
            planar += rng.normal(scale=0.5, size=planar.shape)
            rotation = _rotation(rng.normal(size=3), rng.uniform(0.0, math.pi))
            shift = rng.uniform(-200.0, 200.0, size=3)
            points = np.column_stack([planar, np.zeros(12)]) @ rotation.T + shift
            fit = fit_circle_3d(points)
            center = (rotation.T @ (fit.center - shift))[:2]

            def spread(c):
                dist = np.linalg.norm(planar - c, axis=1)
                return float(np.sum((dist - dist.mean()) ** 2))

            best = spread(center)
            grid = np.linspace(-2.0, 2.0, 21)
            oracle = min(spread(center + [du, dv]) for du in grid for dv in grid)
            assert oracle >= best - 1e-9 * max(1.0, best)
            assert fit.radius == pytest.approx(np.linalg.norm(planar - center, axis=1).mean(), rel=1e-9)
            assert fit.radius == pytest.approx(radius, rel=0.25)

    def test_collinear(self):
        """Test collinear points are degenerate."""
        with pytest.raises(DegenerateFitError):
            fit_circle_3d([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])

    def test_coincident(self):
        """Test coincident points are degenerate."""
        with pytest.raises(DegenerateFitError):
            fit_circle_3d([[1.0, 1.0, 1.0]] * 4)

    def test_too_few_points(self):
        """Test at least three points are needed."""
        with pytest.raises(InvalidArgumentError):
            fit_circle_3d([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])


class TestAnalysis:
    """Test measurements derived from trajectories."""

    def test_bending_angle_recovers_curvature(self):
        """Test the measured angle equals kappa * length."""
        kappas = [0.005, 0.01, 0.02]
        trajectory = synthesize_bending(kappas, 100.0)
        series = bending_angle_series(trajectory, tip_marker_ids(5), 100.0)
        assert [t for t, _ in series] == pytest.approx([0.0, 0.01, 0.02])
        assert [a for _, a in series] == pytest.approx([k * 100.0 for k in kappas], rel=1e-7)

    def test_straight_frame_reads_zero(self):
        """Test collinear markers give a zero angle."""
        series = bending_angle_series(synthesize_bending([0.0], 100.0), tip_marker_ids(5), 100.0)
        assert series == [(0.0, 0.0)]

    def test_frames_without_markers_are_skipped(self):
        """Test frames with fewer than three tip markers are dropped."""
        good = {m: p for m, p in zip(tip_marker_ids(3), arc_markers(0.01, 0.0, 100.0, 3))}
        partial = {"tip1": good["tip1"]}
        trajectory = MocapTrajectory((MocapFrame(0, 0.0, good), MocapFrame(1, 0.01, partial)))
        series = bending_angle_series(trajectory, tip_marker_ids(3), 100.0)
        assert len(series) == 1

    def test_no_usable_frame(self):
        """Test a trajectory without usable frames is an error."""
        trajectory = MocapTrajectory((MocapFrame(0, 0.0, {"tip1": np.zeros(3)}),))
        with pytest.raises(InvalidArgumentError):
            bending_angle_series(trajectory, tip_marker_ids(3), 100.0)

    def test_synthetic_sweep_matches_model_reach(self):
        """Test the mocap tip cloud reproduces the model sweep reach."""
        theta = 1.1
        trajectory = synthesize_sweep(theta, 100.0, theta_steps=7, phi_steps=8)
        cloud = tip_cloud(trajectory, "tip5")
        model = sweep_workspace(SweepConfig.uniform(1, theta, 100.0, theta_steps=7, phi_steps=8))
        assert len(cloud) == 56
        assert max_radial_reach(cloud) == pytest.approx(max_radial_reach(model), rel=1e-9)

    def test_alignment(self):
        """Test a downward arm axis maps onto +z."""
        alignment = FrameAlignment((10.0, 0.0, 500.0), (0.0, 0.0, -1.0))
        mapped = alignment.apply(np.array([[10.0, 5.0, 400.0]]))
        np.testing.assert_allclose(mapped, [[0.0, -5.0, 100.0]], atol=1e-12)

    def test_oblique_alignment(self):
        """Test an oblique axis maps onto +z."""
        axis = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
        alignment = FrameAlignment((0.0, 0.0, 0.0), tuple(axis))
        np.testing.assert_allclose(alignment.apply(axis * 10.0), [[0.0, 0.0, 10.0]], atol=1e-12)

    def test_vertical_series(self):
        """Test heights are measured from the origin along mocap Z."""
        trajectory = trajectory_from_positions([[[0.0, 0.0, 420.0]], [[5.0, 0.0, 450.0]]], ["tip5"])
        series = vertical_series(trajectory, "tip5", FrameAlignment((0.0, 0.0, 500.0), (0.0, 0.0, -1.0)))
        assert series == [(0.0, -80.0), (0.01, -50.0)]

    def test_unknown_marker(self):
        """Test asking for a marker that never appears."""
        trajectory = synthesize_bending([0.01], 100.0)
        with pytest.raises(InvalidArgumentError):
            tip_cloud(trajectory, "elbow")

    def test_matches_model_ccfit_angle(self, layout, stiff_material):
        """Test markers taken from a rod state read the model's CC-fit angle after a rigid move."""
        chain = [SegmentSpec(100.0, layout, stiff_material), SegmentSpec(100.0, layout, stiff_material)]
        kappa = np.concatenate([np.full(5, 0.004), np.linspace(0.006, 0.014, 5)])
        state = RodState(kappa, np.full(10, 0.03), 5)
        rotation = _rotation([0.3, -1.0, 0.4], 1.1)
        for segment in range(2):
            markers = marker_positions(state, chain, segment=segment, count=5)
            moved = markers @ rotation.T + np.array([40.0, -15.0, 900.0])
            trajectory = trajectory_from_positions([moved], tip_marker_ids(5))
            series = bending_angle_series(trajectory, tip_marker_ids(5), deformed_length(state, chain, segment))
            expected = ccfit_angle_from_state(state, chain, 5, segment=segment)
            assert expected > 0.0
            assert series[0][1] == pytest.approx(expected, abs=1e-6)
