"""Trajectory integration, obstacle motion scripting, and benchmark sweeps.

Trajectories are integral curves of the complete velocity field, advanced by
classical fixed-step RK4.  Obstacle poses are frozen during the four stages
of a step and refreshed between steps from per-obstacle motion scripts.
Batch drivers rerun a scenario over many starts and stiffness values and
aggregate navigation-time statistics.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .dynamics import LinearDS, LpvDS
from .errors import DomainError, InteriorPointError, SoftnavError
from .geometry import (
    Obstacle,
    RegionLabel,
    gamma,
    gamma_values,
    region_from_values,
    rotation_matrix,
)
from .strategy import Scene, StrategyConfig, total_velocity

DEFAULT_DT = 0.01
DEFAULT_MAX_STEPS = 50000
DEFAULT_EPS_CONV = 1e-3

# the adaptive corrections switch off this many convergence radii from the goal
ATTRACTOR_GATE_FACTOR = 10.0


@dataclass(frozen=True)
class Target:
    """Ball whose first entry defines the navigation time."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise DomainError(f"target radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class IntegrationSettings:
    dt: float = DEFAULT_DT
    max_steps: int = DEFAULT_MAX_STEPS
    eps_conv: float = DEFAULT_EPS_CONV
    target: Target | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.max_steps < 1:
            raise DomainError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eps_conv <= 0:
            raise DomainError(f"eps_conv must be positive, got {self.eps_conv}")


@dataclass(frozen=True)
class Waypoint:
    time: float
    center: np.ndarray
    orientation: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


@dataclass(frozen=True)
class MotionScript:
    """Piecewise-linear pose schedule for one obstacle.

    Pose is held fixed (zero velocity) before the first and after the last
    waypoint; within a segment the derived velocities are the finite
    differences of the bracketing waypoints.
    """

    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        waypoints = tuple(self.waypoints)
        object.__setattr__(self, "waypoints", waypoints)
        if not waypoints:
            raise DomainError("a motion script needs at least one waypoint")
        times = [w.time for w in waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError(f"waypoint times must be strictly increasing, got {times}")

    def pose_at(self, t: float):
        """(center, orientation, linear_velocity, angular_velocity) at time t."""
        pts = self.waypoints
        if t <= pts[0].time:
            return pts[0].center, pts[0].orientation, np.zeros_like(pts[0].center), 0.0
        if t >= pts[-1].time:
            return pts[-1].center, pts[-1].orientation, np.zeros_like(pts[-1].center), 0.0
        for a, b in zip(pts, pts[1:]):
            if t < b.time:
                span = b.time - a.time
                frac = (t - a.time) / span
                center = a.center + frac * (b.center - a.center)
                orientation = a.orientation + frac * (b.orientation - a.orientation)
                lin_vel = (b.center - a.center) / span
                ang_vel = (b.orientation - a.orientation) / span
                return center, orientation, lin_vel, ang_vel
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class Scenario:
    """Runtime bundle consumed by the integration and sweep drivers."""

    ds: LinearDS | LpvDS
    obstacles: tuple[Obstacle, ...]
    strategy: StrategyConfig
    settings: IntegrationSettings
    motion_scripts: dict[int, MotionScript] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for idx in self.motion_scripts:
            if not 0 <= idx < len(self.obstacles):
                raise DomainError(f"motion script for unknown obstacle index {idx}")


def scenario_with_stiffness(scenario: Scenario, k: float) -> Scenario:
    """Rebuild every obstacle with stiffness k (shell ratio ln(k) + 1).

    The hard core is unchanged; the stiffness sets the thickness of the
    traversable shell around it.  ``k = 1`` strips the shells entirely, the
    rigid baseline against which soft traversal is compared.
    """
    if k < 1.0:
        raise DomainError(f"stiffness must be >= 1, got {k}")
    ratio = math.log(k) + 1.0
    obstacles = tuple(replace(o, soft_ratio=ratio) for o in scenario.obstacles)
    return replace(scenario, obstacles=obstacles)


def rk4_step(velocity_field, xi: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size dt.

    A field failure at any stage propagates with the stage index attached
    as ``rk4_stage`` on the exception.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    return _advance(velocity_field, np.asarray(xi, dtype=float), dt, None)


def _advance(velocity_field, xi, dt, k1):
    stage = 1
    try:
        if k1 is None:
            k1 = velocity_field(xi)
        stage = 2
        k2 = velocity_field(xi + (0.5 * dt) * k1)
        stage = 3
        k3 = velocity_field(xi + (0.5 * dt) * k2)
        stage = 4
        k4 = velocity_field(xi + dt * k3)
    except Exception as err:
        err.rk4_stage = stage
        raise
    return xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class TrajectoryRecord:
    """Per-step states plus run-level summary of one integration.

    Row ``i`` holds the state at time ``i * dt``: position, the velocity the
    field commanded there, each obstacle's hard and soft distance values and
    region label, and whether the point lay in a tracked shell overlap.
    """

    times: np.ndarray              # (n,)
    positions: np.ndarray          # (n, d)
    velocities: np.ndarray         # (n, d)
    gammas: np.ndarray             # (n, n_obstacles)
    gammas_soft: np.ndarray        # (n, n_obstacles)
    regions: list                  # n rows of RegionLabel tuples
    intersection_flags: np.ndarray  # (n,) bool
    converged: bool
    steps: int
    navigation_time: float | None
    min_gamma: float | None
    failure: str | None = None

    @cached_property
    def speeds(self) -> np.ndarray:
        if self.velocities.size == 0:
            return np.zeros(0)
        return np.linalg.norm(self.velocities, axis=1)

    @cached_property
    def regional_stats(self):
        return regional_speed_stats(self)


@dataclass(frozen=True)
class RegionalStats:
    """Speed statistics restricted to soft-shell and overlap passages."""

    soft_mean_speed: float | None
    soft_max_speed: float | None
    soft_step_count: int
    intersection_mean_speed: float | None
    intersection_max_speed: float | None
    intersection_step_count: int


def regional_speed_stats(record: TrajectoryRecord) -> RegionalStats:
    """Mean/max speed over soft-region rows and over overlap-flagged rows."""
    speeds = record.speeds
    soft_mask = np.array(
        [any(label is RegionLabel.SOFT_REGION for label in row) for row in record.regions],
        dtype=bool,
    )
    inter_mask = np.asarray(record.intersection_flags, dtype=bool)

    def stats(mask):
        if speeds.size == 0 or not mask.any():
            return None, None, 0
        selected = speeds[mask]
        return float(selected.mean()), float(selected.max()), int(mask.sum())

    soft_mean, soft_max, soft_count = stats(soft_mask)
    inter_mean, inter_max, inter_count = stats(inter_mask)
    return RegionalStats(soft_mean, soft_max, soft_count, inter_mean, inter_max, inter_count)


def posed_obstacles(scenario: Scenario, t: float) -> tuple[Obstacle, ...]:
    if not scenario.motion_scripts:
        return scenario.obstacles
    obstacles = list(scenario.obstacles)
    for idx, script in scenario.motion_scripts.items():
        base = obstacles[idx]
        center, orientation, lin_vel, ang_vel = script.pose_at(t)
        local_ref = base.to_local(base.reference_point)
        if orientation != 0.0 and base.dim == 2:
            ref = center + rotation_matrix(orientation) @ local_ref
        else:
            ref = center + local_ref
        obstacles[idx] = replace(
            base,
            center=center,
            orientation=orientation,
            reference_point=ref,
            linear_velocity=lin_vel,
            angular_velocity=ang_vel,
        )
    return tuple(obstacles)


def integrate(scenario: Scenario, start, settings: IntegrationSettings | None = None
              ) -> TrajectoryRecord:
    """Advance one trajectory until convergence, the step budget, or failure.

    Raises :class:`InteriorPointError` if the start lies inside a hard core;
    failures later in the run truncate the record and set ``failure``.
    """
    settings = settings if settings is not None else scenario.settings
    xi = np.asarray(start, dtype=float)
    initial_obstacles = posed_obstacles(scenario, 0.0)
    for idx, obs in enumerate(initial_obstacles):
        if gamma(obs, xi) < 1.0:
            raise InteriorPointError(
                f"start {xi} lies inside the hard core of obstacle {idx}",
                obstacle_index=idx,
            )

    dt = settings.dt
    attractor = np.asarray(scenario.ds.attractor, dtype=float)
    delta_att = ATTRACTOR_GATE_FACTOR * settings.eps_conv
    # membership in any soft-shell overlap is a geometric fact of the scene,
    # recorded regardless of which pairs the strategy acts on
    n_obs = len(scenario.obstacles)
    pairs = [(n, p) for n in range(n_obs) for p in range(n + 1, n_obs)]
    target = settings.target
    static_scene = None
    if not scenario.motion_scripts:
        static_scene = Scene(
            ds=scenario.ds,
            obstacles=scenario.obstacles,
            strategy=scenario.strategy,
            delta_att=delta_att,
        )

    times, positions, velocities = [], [], []
    gammas, gammas_soft, regions, inter_flags = [], [], [], []
    converged = False
    navigation_time = None
    failure = None

    step = 0
    while True:
        t = step * dt
        if static_scene is not None:
            scene = static_scene
            obstacles = scenario.obstacles
        else:
            obstacles = posed_obstacles(scenario, t)
            scene = Scene(
                ds=scenario.ds,
                obstacles=obstacles,
                strategy=scenario.strategy,
                delta_att=delta_att,
            )
        try:
            vel = total_velocity(scene, xi)
        except SoftnavError as err:
            failure = f"field evaluation failed at t={t:.6g}: {err}"
            break

        times.append(t)
        positions.append(xi)
        velocities.append(vel)
        row_g, row_gk, row_label = [], [], []
        for obs in obstacles:
            g, gk = gamma_values(obs, xi)
            row_g.append(g)
            row_gk.append(gk)
            row_label.append(region_from_values(g, gk))
        gammas.append(row_g)
        gammas_soft.append(row_gk)
        regions.append(tuple(row_label))
        inter_flags.append(any(
            row_g[n] > 1.0 and row_g[p] > 1.0
            and 0.0 < row_gk[n] <= 1.0 and 0.0 < row_gk[p] <= 1.0
            for n, p in pairs
        ))

        if navigation_time is None and target is not None:
            if np.linalg.norm(xi - target.center) < target.radius:
                navigation_time = t
        if np.linalg.norm(xi - attractor) < settings.eps_conv:
            converged = True
            break
        if step >= settings.max_steps:
            break
        try:
            xi = _advance(lambda q: total_velocity(scene, q), xi, dt, vel)
        except SoftnavError as err:
            stage = getattr(err, "rk4_stage", "?")
            failure = f"integration failed at t={t:.6g} (stage {stage}): {err}"
            break
        step += 1

    n_obs = len(scenario.obstacles)
    gam_arr = np.asarray(gammas, dtype=float).reshape(len(times), n_obs)
    return TrajectoryRecord(
        times=np.asarray(times, dtype=float),
        positions=np.asarray(positions, dtype=float).reshape(len(times), -1),
        velocities=np.asarray(velocities, dtype=float).reshape(len(times), -1),
        gammas=gam_arr,
        gammas_soft=np.asarray(gammas_soft, dtype=float).reshape(len(times), n_obs),
        regions=regions,
        intersection_flags=np.asarray(inter_flags, dtype=bool),
        converged=converged,
        steps=max(len(times) - 1, 0),
        navigation_time=navigation_time,
        min_gamma=float(gam_arr.min()) if gam_arr.size else None,
        failure=failure,
    )


def batch_run(scenario: Scenario, starts, settings: IntegrationSettings | None = None
              ) -> list[TrajectoryRecord]:
    """Independent runs over many starts; failures become failed records."""
    records = []
    for start in starts:
        try:
            records.append(integrate(scenario, start, settings))
        except SoftnavError as err:
            records.append(_failed_record(len(scenario.obstacles), str(err)))
    return records


def _failed_record(n_obstacles: int, message: str) -> TrajectoryRecord:
    return TrajectoryRecord(
        times=np.zeros(0),
        positions=np.zeros((0, 2)),
        velocities=np.zeros((0, 2)),
        gammas=np.zeros((0, n_obstacles)),
        gammas_soft=np.zeros((0, n_obstacles)),
        regions=[],
        intersection_flags=np.zeros(0, dtype=bool),
        converged=False,
        steps=0,
        navigation_time=None,
        min_gamma=None,
        failure=message,
    )


@dataclass(frozen=True)
class StiffnessSweepRow:
    k: float
    n_runs: int
    n_converged: int
    convergence_rate: float
    n_timed: int
    median_navigation_time: float | None
    mean_navigation_time: float | None


def k_sweep(scenario: Scenario, k_values, starts,
            settings: IntegrationSettings | None = None) -> list[StiffnessSweepRow]:
    """Batch-run the scenario once per stiffness value and summarize times."""
    rows = []
    for k in k_values:
        records = batch_run(scenario_with_stiffness(scenario, k), starts, settings)
        times = [r.navigation_time for r in records if r.navigation_time is not None]
        n_converged = sum(r.converged for r in records)
        rows.append(StiffnessSweepRow(
            k=float(k),
            n_runs=len(records),
            n_converged=n_converged,
            convergence_rate=n_converged / len(records) if records else 0.0,
            n_timed=len(times),
            median_navigation_time=statistics.median(times) if times else None,
            mean_navigation_time=statistics.fmean(times) if times else None,
        ))
    return rows


@dataclass(frozen=True)
class ReductionRow:
    start: np.ndarray
    baseline_time: float | None
    soft_time: float | None
    reduction: float | None
    baseline_min_gamma: float | None
    baseline_converged: bool
    soft_converged: bool


def time_reduction_map(scenario: Scenario, k: float, starts,
                       settings: IntegrationSettings | None = None) -> list[ReductionRow]:
    """Per-start relative navigation-time gain of stiffness k over rigid.

    Each start runs twice: with the requested stiffness and with the rigid
    baseline.  Rows where either run produced no navigation time report an
    absent reduction rather than zero.
    """
    soft_records = batch_run(scenario_with_stiffness(scenario, k), starts, settings)
    base_records = batch_run(scenario_with_stiffness(scenario, 1.0), starts, settings)
    rows = []
    for start, soft, base in zip(starts, soft_records, base_records):
        reduction = None
        if soft.navigation_time is not None and base.navigation_time is not None:
            reduction = (base.navigation_time - soft.navigation_time) / base.navigation_time
        rows.append(ReductionRow(
            start=np.asarray(start, dtype=float),
            baseline_time=base.navigation_time,
            soft_time=soft.navigation_time,
            reduction=reduction,
            baseline_min_gamma=base.min_gamma,
            baseline_converged=base.converged,
            soft_converged=soft.converged,
        ))
    return rows


def grid_points(minimum, maximum, counts) -> list[np.ndarray]:
    """Axis-aligned grid in deterministic order (first axis slowest)."""
    minimum = np.asarray(minimum, dtype=float)
    maximum = np.asarray(maximum, dtype=float)
    counts = [int(c) for c in counts]
    if len(counts) != minimum.shape[0] or any(c < 1 for c in counts):
        raise DomainError(f"bad grid counts {counts}")
    axes = [np.linspace(minimum[i], maximum[i], counts[i]) for i in range(len(counts))]
    points = []
    index = [0] * len(counts)
    total = int(np.prod(counts))
    for flat in range(total):
        rem = flat
        for axis in reversed(range(len(counts))):
            index[axis] = rem % counts[axis]
            rem //= counts[axis]
        points.append(np.array([axes[i][index[i]] for i in range(len(counts))]))
    return points
