#!/usr/bin/env python3
"""
CLI interface for the soft-arm toolkit.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

import functools
import math
import re
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from loguru import logger
from rich.console import Console
from rich.progress import track
from rich.table import Table

from .calibration import (
    DEFAULT_AXIAL_STIFFNESS,
    DEFAULT_BENDING_STIFFNESS,
    RESIDUAL_HEADER,
    fit_material,
    read_observations,
    residual_report,
    write_material_library,
)
from .config_schema import ProjectConfig, load_config
from .errors import (
    ConfigError,
    DegenerateFitError,
    GeometryViolationError,
    InvalidArgumentError,
    MocapParseError,
    NoSolutionError,
    SolverFailureError,
)
from .kinematics import ActuationCommand
from .mocap import (
    bending_angle_series,
    read_mocap_csv,
    smooth_trajectory,
    tip_cloud,
    vertical_series,
    write_mocap_csv,
)
from .mocap.synthetic import synthesize_bending, synthesize_sweep
from .reporting import cloud_svg, shape_svg, write_csv, write_json
from .statics import hanging_state, rod_positions, solve_equilibrium
from .workspace import (
    SWEEP_MODES,
    compute_metrics,
    metrics_to_dict,
    scaling_report,
    sweep_workspace,
    write_cloud_csv,
)

console = Console()
error_console = Console(stderr=True)

USAGE_ERRORS = (ConfigError, InvalidArgumentError, MocapParseError)
NUMERICAL_ERRORS = (SolverFailureError, NoSolutionError, GeometryViolationError, DegenerateFitError)
CALIBRATED_CONFIG = "calibrated.json"
PULL_PATTERN = re.compile(r"^s(\d+)(?:\.t(\d+))?:(\d+(?:\.\d*)?|\.\d+)$")


def _guarded(command: Callable) -> Callable:
    """Map toolkit errors to the exit-code contract."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except USAGE_ERRORS as e:
            error_console.print(f"❌ Error: {e}", style="bold red")
            sys.exit(1)
        except NUMERICAL_ERRORS as e:
            error_console.print(f"❌ Numerical failure: {e}", style="bold red")
            sys.exit(2)

    return wrapper


def _config(ctx: click.Context) -> ProjectConfig:
    if "project" not in ctx.obj:
        ctx.obj["project"] = load_config(ctx.obj["config"])
    return ctx.obj["project"]


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_pulls(specs: Tuple[str, ...]) -> Dict[Tuple[int, int], float]:
    """``s2:40`` pulls tendon 1 of segment 2 by 40 mm; ``s1.t3:10`` names the tendon."""
    pulls: Dict[Tuple[int, int], float] = {}
    for spec in specs:
        match = PULL_PATTERN.match(spec.strip())
        if not match:
            raise InvalidArgumentError(f"cannot parse pull '{spec}' (expected sK:MM or sK.tT:MM)")
        segment, tendon = int(match.group(1)), int(match.group(2) or 1)
        if segment < 1 or tendon < 1:
            raise InvalidArgumentError(f"segment and tendon numbers start at 1 in '{spec}'")
        pulls[(segment - 1, tendon - 1)] = float(match.group(3))
    return pulls


class ArmGroup(click.Group):
    """Click group that reports usage errors with exit code 1."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(1)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)


@click.group(cls=ArmGroup)
@click.version_option(package_name="softarm-toolkit")
@click.option("--config", "-c", default="arm.json", help="Path to project configuration (JSON or YAML)")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.pass_context
def main(ctx: click.Context, config: str, verbose: bool) -> None:
    """Soft-arm kinematics, statics, workspace and calibration CLI."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@main.command()
@click.option("--pull", "pulls", multiple=True, required=True, help="Tendon pull, e.g. s1:45 or s2.t3:10 (mm)")
@click.option("--payload", type=float, default=0.0, show_default=True, help="Tip payload (g)")
@click.option("--material", help="Use this material for every segment")
@click.option("--length", type=float, help="Override every segment length (mm)")
@click.option("--segments", "n_segments", type=int, help="Number of stacked segments (default: highest pulled)")
@click.option("--measure", "measured", type=int, help="Segment whose angles are reported (default: last)")
@click.option("--no-gravity", is_flag=True, help="Disable gravity")
@click.option("--out", "-o", default="out", show_default=True, help="Output directory")
@click.pass_context
@_guarded
def simulate(ctx: click.Context, pulls: Tuple[str, ...], payload: float, material: Optional[str],
             length: Optional[float], n_segments: Optional[int], measured: Optional[int],
             no_gravity: bool, out: str) -> None:
    """Solve the static equilibrium for a tendon command and payload."""
    project = _config(ctx)
    requested = parse_pulls(pulls)
    count = n_segments or max(segment for segment, _ in requested) + 1
    chain = project.segment_specs(count, material, length)
    grid = [[0.0] * spec.layout.count for spec in chain]
    for (segment, tendon), value in requested.items():
        if segment >= count or tendon >= chain[segment].layout.count:
            raise InvalidArgumentError(f"pull s{segment + 1}.t{tendon + 1} is outside the {count}-segment chain")
        grid[segment][tendon] = value
    command = ActuationCommand(tuple(tuple(row) for row in grid))
    command.validate(project.defaults.delta_max)
    load = project.load_case(payload, False if no_gravity else None)
    settings = project.solver_settings()
    measured_index = None if measured is None else measured - 1

    with console.status("[bold green]Solving equilibrium..."):
        result = solve_equilibrium(chain, command, load, settings, measured_index)

    out_dir = _out_dir(out)
    report = {
        "command": "simulate",
        "segments": count,
        "materials": [spec.material.name for spec in chain],
        "payload_g": payload,
        "gravity": load.gravity_enabled,
        "measured_segment": result.measured_segment + 1,
        "plane_angle_deg": math.degrees(result.plane_angle),
        "tip_angle_deg": math.degrees(result.tip_angle),
        "ccfit_angle_deg": math.degrees(result.ccfit_angle),
        "vertical_displacement_mm": result.vertical_displacement,
        "nonuniformity": result.nonuniformity,
        "energy_nmm": result.energy,
        "kkt_residual": result.kkt_residual,
        "iterations": result.iterations,
        "tendons": [
            {
                "segment": t.segment + 1,
                "tendon": t.tendon + 1,
                "pull_mm": t.pull,
                "tension_n": t.tension,
                "slack": t.slack,
            }
            for t in result.tendon_tensions
        ],
        "per_segment": [
            {
                "segment": k + 1,
                "tip_angle_deg": math.degrees(result.segment_angles[k]),
                "ccfit_angle_deg": math.degrees(result.segment_ccfit_angles[k]),
                "vertical_displacement_mm": result.segment_displacements[k],
            }
            for k in range(count)
        ],
    }
    write_json(out_dir / "simulate.json", report)

    shape = rod_positions(result.state, chain)
    hanging = rod_positions(hanging_state(chain, load, settings.subdivisions), chain)
    write_csv(out_dir / "shape.csv", ("node", "x_mm", "z_mm", "hanging_x_mm", "hanging_z_mm"),
              [(i, *shape[i], *hanging[i]) for i in range(shape.shape[0])])
    shape_svg([hanging, shape], out_dir / "shape.svg")

    _display_equilibrium(report)
    console.print(f"✅ Results saved to {out_dir}")


@main.command()
@click.option("--segments", "n_segments", type=int, help="Number of stacked segments (default: all configured)")
@click.option("--theta-steps", type=int, help="Bend-angle samples per segment")
@click.option("--phi-steps", type=int, help="Bending-plane samples per segment")
@click.option("--theta-max", type=float, help="Bend limit per segment (rad)")
@click.option("--bin-height", type=float, help="Volume integration step (mm)")
@click.option("--mode", type=click.Choice(SWEEP_MODES), help="Sweep mode (default: from config)")
@click.option("--compare", is_flag=True, help="Also sweep 1..N-1 segments and report scaling ratios")
@click.option("--out", "-o", default="out", show_default=True, help="Output directory")
@click.pass_context
@_guarded
def workspace(ctx: click.Context, n_segments: Optional[int], theta_steps: Optional[int],
              phi_steps: Optional[int], theta_max: Optional[float], bin_height: Optional[float],
              mode: Optional[str], compare: bool, out: str) -> None:
    """Sweep the actuation space and compute reach, area and volume."""
    project = _config(ctx)
    count = n_segments or len(project.segments)
    if not 1 <= count <= len(project.segments):
        raise ConfigError(f"segment count must be between 1 and {len(project.segments)}, got {count}")
    height = bin_height or project.sweep.bin_height
    counts = list(range(1, count + 1)) if compare else [count]

    metrics = []
    for n in track(counts, description="Sweeping workspace...", console=error_console):
        cloud = sweep_workspace(project.sweep_config(n, theta_steps, phi_steps, theta_max, mode))
        metrics.append(compute_metrics(cloud, height))

    out_dir = _out_dir(out)
    report: Dict[str, Any] = {"command": "workspace", "segments": count, "mode": mode or project.sweep.mode,
                              "samples": len(cloud), **metrics_to_dict(metrics[-1])}
    if compare:
        usable = len(metrics) >= 2 and metrics[0].planar_area > 0.0 and metrics[0].volume > 0.0
        ratios = scaling_report(metrics) if usable else []
        report["scaling"] = [
            {"segments": n, **metrics_to_dict(m),
             "area_ratio": r.area_ratio if ratios else None,
             "volume_ratio": r.volume_ratio if ratios else None,
             "envelope_ratio": r.envelope_ratio if ratios else None}
            for n, m, r in zip(counts, metrics, ratios or [None] * len(metrics))
        ]
    write_json(out_dir / "workspace.json", report)
    write_cloud_csv(cloud, out_dir / "cloud.csv")
    cloud_svg(cloud.points, out_dir / "workspace.svg", r_max=metrics[-1].r_max)

    _display_metrics(report)
    console.print(f"✅ Results saved to {out_dir}")


@main.group()
def analyze() -> None:
    """Analyze motion-capture recordings."""


@analyze.command("workspace")
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--marker", help="Tip marker id (default: last configured tip marker)")
@click.option("--bin-height", type=float, help="Volume integration step (mm)")
@click.option("--out", "-o", default="out", show_default=True, help="Output directory")
@click.pass_context
@_guarded
def analyze_workspace(ctx: click.Context, input_csv: str, marker: Optional[str],
                      bin_height: Optional[float], out: str) -> None:
    """Reach metrics of a recorded tip trajectory."""
    project = _config(ctx)
    trajectory = smooth_trajectory(read_mocap_csv(input_csv), project.mocap.smoothing_window)
    cloud = tip_cloud(trajectory, marker or project.mocap.tip_marker_ids[-1], project.alignment())
    metrics = compute_metrics(cloud, bin_height or project.sweep.bin_height)

    out_dir = _out_dir(out)
    report = {"command": "analyze-workspace", "frames": len(trajectory), "samples": len(cloud),
              **metrics_to_dict(metrics)}
    write_json(out_dir / "workspace.json", report)
    write_cloud_csv(cloud, out_dir / "cloud.csv")
    cloud_svg(cloud.points, out_dir / "workspace.svg", r_max=metrics.r_max)

    _display_metrics(report)
    console.print(f"✅ Results saved to {out_dir}")


@analyze.command("bending")
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--length", type=float, help="Arc length for the CC extrapolation (default: first segment)")
@click.option("--out", "-o", default="out", show_default=True, help="Output directory")
@click.pass_context
@_guarded
def analyze_bending(ctx: click.Context, input_csv: str, length: Optional[float], out: str) -> None:
    """Bending-angle and tip-height series of a recording."""
    project = _config(ctx)
    trajectory = smooth_trajectory(read_mocap_csv(input_csv), project.mocap.smoothing_window)
    markers = project.mocap.tip_marker_ids
    series = bending_angle_series(trajectory, markers, length or project.segments[0].length)
    heights = vertical_series(trajectory, markers[-1], project.alignment())

    out_dir = _out_dir(out)
    write_csv(out_dir / "bending.csv", ("time_s", "angle_deg"), [(t, math.degrees(a)) for t, a in series])
    write_csv(out_dir / "vertical.csv", ("time_s", "z_mm"), heights)

    angles = np.degrees([a for _, a in series])
    table = Table(title="Bending Analysis")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="magenta")
    table.add_row("Frames used", str(len(series)))
    table.add_row("Mean angle", f"{angles.mean():.2f}°")
    table.add_row("Min / max angle", f"{angles.min():.2f}° / {angles.max():.2f}°")
    console.print(table)
    console.print(f"✅ Results saved to {out_dir}")


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--material", "materials", multiple=True, help="Material to fit (default: every material in the data)")
@click.option("--start-from-config", is_flag=True, help="Start from the configured stiffnesses")
@click.option("--out", "-o", default="out", show_default=True, help="Output directory")
@click.pass_context
@_guarded
def calibrate(ctx: click.Context, data_csv: str, materials: Tuple[str, ...],
              start_from_config: bool, out: str) -> None:
    """Fit material stiffnesses to payload observations."""
    project = _config(ctx)
    observations = read_observations(data_csv)
    names = list(materials) or list(dict.fromkeys(o.material for o in observations))
    settings = project.solver_settings()
    load = project.load_case()
    template = project.segment_specs(1)[0]

    fitted = {}
    rows: List[Dict[str, Any]] = []
    for name in names:
        subset = [o for o in observations if o.material == name]
        if not subset:
            raise InvalidArgumentError(f"no observations for material '{name}' in {data_csv}")
        initial = project.material(name)
        n_targets = sum(len(o.targets()) for o in subset)
        fit_bending = n_targets >= 2 and len({o.payload for o in subset}) >= 2
        if not fit_bending:
            logger.info(f"{name}: too few targets to separate EI from EA, holding EI at "
                        f"{initial.bending_stiffness:g} N*mm^2")
        if not start_from_config:
            bending = DEFAULT_BENDING_STIFFNESS if fit_bending else initial.bending_stiffness
            initial = initial.with_stiffness(bending, DEFAULT_AXIAL_STIFFNESS, 0.0)
        result = fit_material(subset, template, initial, settings, fit_offset=n_targets >= 3, load=load,
                              fit_bending=fit_bending)
        fitted[name] = result.material
        rows.extend(residual_report(result))
        _display_calibration(name, result.material, result.relative_residual_norm)

    out_dir = _out_dir(out)
    library = write_material_library(out_dir / CALIBRATED_CONFIG, fitted,
                                     base=project.model_dump(mode="json", exclude_none=True))
    write_csv(out_dir / "residuals.csv", RESIDUAL_HEADER,
              [["" if row[c] is None else row[c] for c in RESIDUAL_HEADER] for row in rows])
    console.print(f"✅ Results saved to {out_dir}; load the fitted materials with -c {library}")


@main.group()
def synth() -> None:
    """Write forward-generated motion-capture recordings."""


@synth.command("sweep")
@click.option("--length", type=float, help="Segment length (default: first segment)")
@click.option("--theta-max", type=float, help="Bend limit (rad, default: from the sweep settings)")
@click.option("--theta-steps", type=int, help="Bend-angle samples")
@click.option("--phi-steps", type=int, help="Bending-plane samples")
@click.option("--out", "-o", default="sweep.csv", show_default=True, help="Output CSV")
@click.pass_context
@_guarded
def synth_sweep(ctx: click.Context, length: Optional[float], theta_max: Optional[float],
                theta_steps: Optional[int], phi_steps: Optional[int], out: str) -> None:
    """Single-segment workspace sweep as marker data."""
    project = _config(ctx)
    length = length or project.segments[0].length
    limit = theta_max or project.theta_limits(1)[0]
    trajectory = synthesize_sweep(limit, length, theta_steps or project.sweep.theta_steps,
                                  phi_steps or project.sweep.phi_steps,
                                  project.mocap.marker_count, project.mocap.marker_span)
    _write_recording(trajectory, out)


@synth.command("bending")
@click.option("--kappa", "kappas", type=float, multiple=True, required=True, help="Curvature per frame (1/mm)")
@click.option("--length", type=float, help="Segment length (default: first segment)")
@click.option("--out", "-o", default="bending.csv", show_default=True, help="Output CSV")
@click.pass_context
@_guarded
def synth_bending(ctx: click.Context, kappas: Tuple[float, ...], length: Optional[float], out: str) -> None:
    """Constant-curvature bending frames as marker data."""
    project = _config(ctx)
    trajectory = synthesize_bending(kappas, length or project.segments[0].length,
                                    marker_count=project.mocap.marker_count,
                                    marker_span=project.mocap.marker_span)
    _write_recording(trajectory, out)


@main.command()
@click.option("--config", help="Override config path")
@click.pass_context
def validate_config(ctx: click.Context, config: Optional[str]) -> None:
    """Validate configuration file."""
    config_path = config or ctx.obj["config"]

    try:
        project = load_config(config_path)
        console.print("✅ Configuration is valid", style="bold green")

        table = Table(title="Configuration Summary")
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="magenta")

        table.add_row("Materials", ", ".join(sorted(project.materials)))
        table.add_row("Segments", " + ".join(f"{s.material} ({s.length:g} mm)" for s in project.segments))
        table.add_row("Sub-arcs per segment", str(project.solver.subdivisions))
        table.add_row("Sweep grid", f"{project.sweep.theta_steps} x {project.sweep.phi_steps} ({project.sweep.mode})")
        table.add_row("Gravity", "on" if project.defaults.gravity_enabled else "off")

        console.print(table)

    except ConfigError as e:
        error_console.print(f"❌ Configuration error: {e}", style="bold red")
        sys.exit(1)


def _write_recording(trajectory, out: str) -> None:
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        write_mocap_csv(trajectory, handle)
    console.print(f"✅ Wrote {len(trajectory)} frames to {path}")


def _display_equilibrium(report: Dict[str, Any]) -> None:
    """Display an equilibrium report in a formatted table."""
    table = Table(title="Equilibrium")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="magenta")

    table.add_row("Segments", str(report["segments"]))
    table.add_row("Payload", f"{report['payload_g']:g} g")
    table.add_row("CC-fit angle", f"{report['ccfit_angle_deg']:.2f}°")
    table.add_row("Tip angle", f"{report['tip_angle_deg']:.2f}°")
    table.add_row("Vertical displacement", f"{report['vertical_displacement_mm']:.2f} mm")
    table.add_row("Non-uniformity", f"{report['nonuniformity']:.3f}")
    for tendon in report["tendons"]:
        label = f"Tension s{tendon['segment']}.t{tendon['tendon']}"
        table.add_row(label, "slack" if tendon["slack"] else f"{tendon['tension_n']:.3f} N")

    console.print(table)


def _display_metrics(report: Dict[str, Any]) -> None:
    """Display workspace metrics, with scaling ratios when present."""
    table = Table(title="Workspace Metrics")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="magenta")

    table.add_row("Samples", str(report["samples"]))
    table.add_row("R_max", f"{report['r_max_mm']:.2f} mm")
    table.add_row("Planar area", f"{report['planar_area_mm2']:.4g} mm²")
    table.add_row("Volume", f"{report['volume_mm3']:.4g} mm³")
    table.add_row("Envelope volume", f"{report['envelope_volume_mm3']:.4g} mm³")
    table.add_row("Z range", f"{report['z_min_mm']:.2f} .. {report['z_max_mm']:.2f} mm")
    for row in report.get("scaling", []):
        if row["area_ratio"] is not None:
            table.add_row(f"{row['segments']} segment(s) vs 1",
                          f"area x{row['area_ratio']:.2f}, volume x{row['volume_ratio']:.2f}, "
                          f"envelope x{row['envelope_ratio']:.2f}")

    console.print(table)


def _display_calibration(name: str, material, residual: float) -> None:
    table = Table(title=f"Calibration: {name}")
    table.add_column("Parameter", style="cyan")
    table.add_column("Value", style="magenta")

    table.add_row("EI", f"{material.bending_stiffness:.5g} N·mm²")
    table.add_row("EA", f"{material.axial_stiffness:.5g} N")
    table.add_row("Tension offset", f"{material.tension_offset:.4g} N")
    table.add_row("Relative residual (RMS)", f"{residual:.2%}")

    console.print(table)


if __name__ == "__main__":
    main()
