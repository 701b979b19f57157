"""Command-line front end: simulate, field, sweep, validate.

All outputs are deterministic: CSV files carry a comment header with the
tool version, the scenario hash, and the resolved settings; JSON reports
embed the full provenance document.  Exit codes: 0 success, 2 validation
failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, sim
from .dynamics import validate_stability
from .errors import (
    DomainError,
    InteriorPointError,
    ScenarioError,
    SoftnavError,
)
from .geometry import gamma, gamma_soft, region_from_values
from .scenario import (
    LoadedScenario,
    bounding_box,
    canonical_json,
    load_ds_file,
    load_scenario_dict,
)
from .strategy import Scene, total_velocity

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _fmt(value) -> str:
    return repr(float(value))


def _resolved_settings(loaded: LoadedScenario) -> dict:
    return {
        "dt": loaded.settings.dt,
        "max_steps": loaded.settings.max_steps,
        "eps_conv": loaded.settings.eps_conv,
        "c": loaded.strategy.c,
        "theta2_policy": loaded.provenance["strategy"]["theta2_policy"],
        "intersection_pairs": loaded.provenance["strategy"]["intersection_pairs"],
    }


def _csv_header_lines(loaded: LoadedScenario) -> list[str]:
    return [
        f"# softnav {__version__}",
        f"# scenario_hash: {loaded.scenario_hash}",
        f"# resolved: {canonical_json(_resolved_settings(loaded))}",
    ]


def _report_header(loaded: LoadedScenario, seed=None) -> dict:
    header = {
        "tool_version": __version__,
        "scenario_hash": loaded.scenario_hash,
        "resolved": _resolved_settings(loaded),
        "scenario": loaded.provenance,
    }
    if seed is not None:
        header["seed"] = seed
    return header


def _write_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _print_error(kind: str, message: str, **extra):
    doc = {"error": {"type": kind, "message": message, **extra}}
    print(json.dumps(doc, sort_keys=True))


def write_trajectory_csv(path: Path, loaded: LoadedScenario,
                         record: sim.TrajectoryRecord, run_index=None):
    n_obs = len(loaded.obstacles)
    columns = ["t", "pos_x", "pos_y", "vel_x", "vel_y"]
    for i in range(n_obs):
        columns += [f"gamma_{i}", f"gamma_k_{i}", f"region_{i}"]
    columns.append("intersection")
    if run_index is not None:
        columns.insert(0, "run")
    lines = _csv_header_lines(loaded)
    lines.append(",".join(columns))
    for row in range(len(record.times)):
        cells = []
        if run_index is not None:
            cells.append(str(run_index))
        cells += [_fmt(record.times[row])]
        cells += [_fmt(v) for v in record.positions[row]]
        cells += [_fmt(v) for v in record.velocities[row]]
        for i in range(n_obs):
            cells += [
                _fmt(record.gammas[row, i]),
                _fmt(record.gammas_soft[row, i]),
                record.regions[row][i].value,
            ]
        cells.append("1" if record.intersection_flags[row] else "0")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _run_summary(start, record: sim.TrajectoryRecord) -> dict:
    stats = record.regional_stats
    return {
        "start": [float(v) for v in np.asarray(start, dtype=float)],
        "converged": record.converged,
        "steps": record.steps,
        "navigation_time": record.navigation_time,
        "min_gamma": record.min_gamma,
        "soft_mean_speed": stats.soft_mean_speed,
        "soft_max_speed": stats.soft_max_speed,
        "soft_steps": stats.soft_step_count,
        "intersection_mean_speed": stats.intersection_mean_speed,
        "intersection_max_speed": stats.intersection_max_speed,
        "intersection_steps": stats.intersection_step_count,
        "failure": record.failure,
    }


def _load_with_overrides(args) -> LoadedScenario:
    path = Path(args.scenario)
    try:
        doc = json.loads(path.read_text())
    except OSError as err:
        raise ScenarioError("scenario", f"cannot read {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ScenarioError("scenario", f"{path} is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario", "expected a JSON object")
    if getattr(args, "dt", None) is not None:
        doc.setdefault("integration", {})["dt"] = args.dt
    if getattr(args, "max_steps", None) is not None:
        doc.setdefault("integration", {})["max_steps"] = args.max_steps
    grid_flag = getattr(args, "starts_grid", None)
    if grid_flag is not None:
        counts = _parse_grid_flag(grid_flag)
        starts = doc.get("starts", {})
        if "grid" not in starts:
            raise ScenarioError(
                "starts.grid",
                "--starts-grid needs a grid block in the scenario to take its bounds from",
            )
        starts["grid"]["counts"] = counts
        starts.pop("points", None)
        doc["starts"] = starts
    return load_scenario_dict(doc, base_dir=path.parent)


def _parse_grid_flag(text: str) -> list[int]:
    parts = text.lower().split("x")
    try:
        counts = [int(p) for p in parts]
    except ValueError:
        raise ScenarioError("starts.grid", f"bad grid spec {text!r}, expected AxB") from None
    if len(counts) != 2 or any(c < 1 for c in counts):
        raise ScenarioError("starts.grid", f"bad grid spec {text!r}, expected AxB")
    return counts


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    loaded = _load_with_overrides(args)
    if not loaded.starts:
        _print_error("validation", "scenario defines no start points",
                     field_path="starts")
        return EXIT_VALIDATION

    initial = sim.posed_obstacles(loaded.runtime, 0.0)
    for index, start in enumerate(loaded.starts):
        for obs_index, obs in enumerate(initial):
            if gamma(obs, start) < 1.0:
                _print_error(
                    "validation",
                    f"start {index} lies inside the hard core of obstacle {obs_index}",
                    start_index=index, obstacle_index=obs_index,
                )
                return EXIT_VALIDATION

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = sim.batch_run(loaded.runtime, loaded.starts)

    if args.concat:
        n_obs = len(loaded.obstacles)
        lines = _csv_header_lines(loaded)
        columns = ["run", "t", "pos_x", "pos_y", "vel_x", "vel_y"]
        for i in range(n_obs):
            columns += [f"gamma_{i}", f"gamma_k_{i}", f"region_{i}"]
        columns.append("intersection")
        lines.append(",".join(columns))
        for run_index, record in enumerate(records):
            for row in range(len(record.times)):
                cells = [str(run_index), _fmt(record.times[row])]
                cells += [_fmt(v) for v in record.positions[row]]
                cells += [_fmt(v) for v in record.velocities[row]]
                for i in range(n_obs):
                    cells += [
                        _fmt(record.gammas[row, i]),
                        _fmt(record.gammas_soft[row, i]),
                        record.regions[row][i].value,
                    ]
                cells.append("1" if record.intersection_flags[row] else "0")
                lines.append(",".join(cells))
        (out_dir / "trajectories.csv").write_text("\n".join(lines) + "\n")
    else:
        for run_index, record in enumerate(records):
            write_trajectory_csv(out_dir / f"run_{run_index:03d}.csv", loaded, record)

    summary = {
        "header": _report_header(loaded, seed=args.seed),
        "runs": [_run_summary(s, r) for s, r in zip(loaded.starts, records)],
    }
    _write_json(out_dir / "summary.json", summary)

    if any(r.failure is not None for r in records):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_field(args) -> int:
    loaded = _load_with_overrides(args)
    counts = _parse_grid_flag(args.grid)
    if any(c < 2 for c in counts):
        _print_error("validation", "field grid needs at least 2 points per axis")
        return EXIT_VALIDATION
    if args.box is not None:
        try:
            edges = [float(v) for v in args.box.split(",")]
        except ValueError:
            edges = []
        if len(edges) != 4:
            _print_error("validation",
                         f"bad box {args.box!r}, expected xmin,xmax,ymin,ymax")
            return EXIT_VALIDATION
        lo = np.array([edges[0], edges[2]])
        hi = np.array([edges[1], edges[3]])
    else:
        lo, hi = bounding_box(loaded.ds, loaded.obstacles, loaded.starts,
                              loaded.settings)

    obstacles = sim.posed_obstacles(loaded.runtime, 0.0)
    scene = Scene(
        ds=loaded.ds, obstacles=obstacles, strategy=loaded.strategy,
        delta_att=sim.ATTRACTOR_GATE_FACTOR * loaded.settings.eps_conv,
    )
    n_obs = len(obstacles)
    lines = _csv_header_lines(loaded)
    columns = ["x", "y", "vx", "vy"]
    for i in range(n_obs):
        columns += [f"gamma_{i}", f"region_{i}"]
    columns.append("masked")
    lines.append(",".join(columns))

    for point in sim.grid_points(lo, hi, counts):
        values = [gamma(o, point) for o in obstacles]
        regions = [region_from_values(g, gamma_soft(o, point)).value
                   for g, o in zip(values, obstacles)]
        masked = any(g < 1.0 for g in values)
        velocity = None
        if not masked:
            try:
                velocity = total_velocity(scene, point)
            except SoftnavError:
                masked = True
        cells = [_fmt(point[0]), _fmt(point[1])]
        if masked:
            cells += ["nan", "nan"]
        else:
            cells += [_fmt(velocity[0]), _fmt(velocity[1])]
        for g, region in zip(values, regions):
            cells += [_fmt(g), region]
        cells.append("1" if masked else "0")
        lines.append(",".join(cells))

    Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    loaded = _load_with_overrides(args)
    try:
        k_values = [float(v) for v in args.k.split(",") if v.strip()]
    except ValueError:
        _print_error("validation", f"bad stiffness list {args.k!r}")
        return EXIT_VALIDATION
    if not k_values:
        _print_error("validation", "empty stiffness list")
        return EXIT_VALIDATION
    if not loaded.starts:
        _print_error("validation", "scenario defines no start points",
                     field_path="starts")
        return EXIT_VALIDATION
    if any(k < 1.0 for k in k_values):
        bad = min(k_values)
        _print_error("validation", f"stiffness must be >= 1, got {bad}")
        return EXIT_VALIDATION

    rows = sim.k_sweep(loaded.runtime, k_values, loaded.starts)
    report = {
        "header": _report_header(loaded, seed=args.seed),
        "k_sweep": [
            {
                "k": row.k,
                "n_runs": row.n_runs,
                "n_converged": row.n_converged,
                "convergence_rate": row.convergence_rate,
                "n_timed": row.n_timed,
                "median_navigation_time": row.median_navigation_time,
                "mean_navigation_time": row.mean_navigation_time,
            }
            for row in rows
        ],
    }
    # map the largest requested stiffness; with only k = 1 the map is
    # baseline-vs-baseline and every reduction is exactly zero
    soft_ks = [k for k in k_values if k > 1.0]
    k_map = max(soft_ks) if soft_ks else max(k_values)
    reduction = sim.time_reduction_map(loaded.runtime, k_map, loaded.starts)
    report["time_reduction"] = {
        "k": k_map,
        "rows": [
            {
                "start": [float(v) for v in row.start],
                "baseline_time": row.baseline_time,
                "soft_time": row.soft_time,
                "reduction": row.reduction,
                "baseline_min_gamma": row.baseline_min_gamma,
                "baseline_converged": row.baseline_converged,
                "soft_converged": row.soft_converged,
            }
            for row in reduction
        ],
    }
    _write_json(Path(args.out), report)
    return EXIT_OK


def cmd_validate(args) -> int:
    ds, _ = load_ds_file(args.ds)
    report = validate_stability(ds)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softnav",
        description="Simulate dynamical-system navigation among deformable obstacles",
    )
    parser.add_argument("--version", action="version", version=f"softnav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="integrate trajectories and export CSV")
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.add_argument("--dt", type=float)
    simulate.add_argument("--max-steps", type=int, dest="max_steps")
    simulate.add_argument("--starts-grid", dest="starts_grid",
                          help="AxB grid over the scenario's grid bounds")
    simulate.add_argument("--seed", type=int, help="recorded in the report header")
    simulate.add_argument("--concat", action="store_true",
                          help="one concatenated CSV instead of one per start")
    simulate.set_defaults(func=cmd_simulate)

    fieldcmd = sub.add_parser("field", help="sample the velocity field on a grid")
    fieldcmd.add_argument("--scenario", required=True)
    fieldcmd.add_argument("--out", required=True, help="output CSV path")
    fieldcmd.add_argument("--grid", required=True, help="AxB resolution")
    fieldcmd.add_argument("--box", help="xmin,xmax,ymin,ymax sample window")
    fieldcmd.add_argument("--dt", type=float)
    fieldcmd.add_argument("--max-steps", type=int, dest="max_steps")
    fieldcmd.set_defaults(func=cmd_field)

    sweep = sub.add_parser("sweep", help="stiffness sweep and time-reduction map")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--out", required=True, help="output JSON path")
    sweep.add_argument("--k", required=True, help="comma-separated stiffness values")
    sweep.add_argument("--dt", type=float)
    sweep.add_argument("--max-steps", type=int, dest="max_steps")
    sweep.add_argument("--starts-grid", dest="starts_grid")
    sweep.add_argument("--seed", type=int)
    sweep.set_defaults(func=cmd_sweep)

    validate = sub.add_parser("validate", help="check a system parameter file")
    validate.add_argument("--ds", required=True)
    validate.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as err:
        _print_error("validation", str(err), field_path=err.field_path)
        return EXIT_VALIDATION
    except DomainError as err:
        _print_error("validation", str(err))
        return EXIT_VALIDATION
    except InteriorPointError as err:
        _print_error("runtime", str(err))
        return EXIT_RUNTIME
    except SoftnavError as err:
        _print_error("runtime", str(err))
        return EXIT_RUNTIME
    except OSError as err:
        _print_error("io", str(err))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
