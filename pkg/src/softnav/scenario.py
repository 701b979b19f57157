"""Scenario files: strict parsing, default resolution, and provenance.

A scenario file is a JSON document bundling a dynamical system, an obstacle
set, strategy tuning, integration settings, and start points.  Parsing is
strict: unknown fields and invariant violations fail with the exact field
path.  Loading resolves every ``"auto"`` value and default into a normalized
provenance document whose hash identifies the run; re-loading a provenance
document reproduces an equivalent scenario.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import sim
from .dynamics import LinearDS, LpvDS, evaluate_ds
from .errors import DomainError, ScenarioError
from .geometry import Obstacle, gamma_soft
from .strategy import FIXED, FOLLOW_VELOCITY, StrategyConfig

AUTO_C_FRACTION = 0.05
AUTO_C_GRID = 21
AUTO_PAIR_SAMPLES = 180


@dataclass(frozen=True)
class LoadedScenario:
    """A fully resolved scenario plus its reproducibility metadata."""

    runtime: sim.Scenario
    starts: tuple[np.ndarray, ...]
    metadata: dict
    provenance: dict
    scenario_hash: str

    @property
    def ds(self):
        return self.runtime.ds

    @property
    def obstacles(self):
        return self.runtime.obstacles

    @property
    def strategy(self):
        return self.runtime.strategy

    @property
    def settings(self):
        return self.runtime.settings


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def scenario_digest(provenance: dict) -> str:
    return hashlib.sha256(canonical_json(provenance).encode()).hexdigest()


# ---------------------------------------------------------------------------
# strict-parsing helpers

def _check_keys(obj, path, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ScenarioError(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise ScenarioError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in obj:
            raise ScenarioError(f"{path}.{key}", "missing required field")


def _number(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    return value


def _string(value, path) -> str:
    if not isinstance(value, str):
        raise ScenarioError(path, f"expected a string, got {value!r}")
    return value


def _vector(value, path, length=None) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, f"expected a non-empty array, got {value!r}")
    out = [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        raise ScenarioError(path, f"expected {length} entries, got {len(out)}")
    return out


def _matrix(value, path, rows=None, cols=None) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, f"expected a non-empty array of rows, got {value!r}")
    out = [_vector(row, f"{path}[{i}]", cols) for i, row in enumerate(value)]
    if rows is not None and len(out) != rows:
        raise ScenarioError(path, f"expected {rows} rows, got {len(out)}")
    if len({len(row) for row in out}) != 1:
        raise ScenarioError(path, "rows have inconsistent lengths")
    return out


# ---------------------------------------------------------------------------
# dynamical-system records

def parse_ds(doc, path="ds") -> tuple[LinearDS | LpvDS, dict]:
    """Build a dynamical system from its record; returns it with the
    normalized record echoed for provenance."""
    _check_keys(doc, path, required=("kind",),
                optional=("attractor", "gain_matrix", "components", "P",
                          "reproject_offsets"))
    kind = _string(doc["kind"], f"{path}.kind")
    if kind == "linear":
        _check_keys(doc, path, required=("kind", "attractor", "gain_matrix"))
        attractor = _vector(doc["attractor"], f"{path}.attractor")
        gain = _matrix(doc["gain_matrix"], f"{path}.gain_matrix",
                       rows=len(attractor), cols=len(attractor))
        try:
            ds = LinearDS(gain_matrix=gain, attractor=attractor)
        except DomainError as err:
            raise ScenarioError(f"{path}.gain_matrix", str(err)) from None
        return ds, {"kind": "linear", "attractor": attractor, "gain_matrix": gain}

    if kind == "lpv":
        _check_keys(doc, path, required=("kind", "attractor", "P", "components"),
                    optional=("reproject_offsets",))
        attractor = _vector(doc["attractor"], f"{path}.attractor")
        d = len(attractor)
        p_mat = _matrix(doc["P"], f"{path}.P", rows=d, cols=d)
        comps = doc["components"]
        if not isinstance(comps, list) or not comps:
            raise ScenarioError(f"{path}.components", "expected a non-empty array")
        priors, means, covs, gains, offsets = [], [], [], [], []
        norm_comps = []
        for i, comp in enumerate(comps):
            cpath = f"{path}.components[{i}]"
            _check_keys(comp, cpath, required=("prior", "mean", "covariance", "A", "b"))
            prior = _number(comp["prior"], f"{cpath}.prior")
            mean = _vector(comp["mean"], f"{cpath}.mean", d)
            cov = _matrix(comp["covariance"], f"{cpath}.covariance", rows=d, cols=d)
            a_mat = _matrix(comp["A"], f"{cpath}.A", rows=d, cols=d)
            b_vec = _vector(comp["b"], f"{cpath}.b", d)
            priors.append(prior)
            means.append(mean)
            covs.append(cov)
            gains.append(a_mat)
            offsets.append(b_vec)
            norm_comps.append({"prior": prior, "mean": mean, "covariance": cov,
                               "A": a_mat, "b": b_vec})
        reproject = doc.get("reproject_offsets", False)
        if not isinstance(reproject, bool):
            raise ScenarioError(f"{path}.reproject_offsets", "expected a boolean")
        try:
            ds = LpvDS(priors=priors, means=means, covariances=covs, gains=gains,
                       offsets=offsets, lyapunov_matrix=p_mat, attractor=attractor,
                       reproject_offsets=reproject)
        except DomainError as err:
            raise ScenarioError(path, str(err)) from None
        normalized = {"kind": "lpv", "attractor": attractor, "P": p_mat,
                      "components": norm_comps}
        if reproject:
            normalized["reproject_offsets"] = True
        return ds, normalized

    raise ScenarioError(f"{path}.kind", f"unknown system kind {kind!r}")


def load_ds_file(ds_path) -> tuple[LinearDS | LpvDS, dict]:
    ds_path = Path(ds_path)
    try:
        doc = json.loads(ds_path.read_text())
    except OSError as err:
        raise ScenarioError("ds", f"cannot read {ds_path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ScenarioError("ds", f"{ds_path} is not valid JSON: {err}") from None
    return parse_ds(doc)


# ---------------------------------------------------------------------------
# obstacles

_OBSTACLE_FIELDS = ("center", "hard_semi_axes", "soft_ratio", "orientation_rad",
                    "exponent", "reference_point", "safety_factor",
                    "linear_velocity", "angular_velocity")


def _parse_obstacle(doc, path) -> tuple[Obstacle, dict]:
    _check_keys(doc, path, required=("center", "hard_semi_axes"),
                optional=_OBSTACLE_FIELDS[2:])
    center = _vector(doc["center"], f"{path}.center")
    d = len(center)
    axes = _vector(doc["hard_semi_axes"], f"{path}.hard_semi_axes", d)
    if any(a <= 0 for a in axes):
        raise ScenarioError(f"{path}.hard_semi_axes", "entries must be positive")
    soft_ratio = _number(doc.get("soft_ratio", 1.0), f"{path}.soft_ratio")
    if soft_ratio < 1.0:
        raise ScenarioError(f"{path}.soft_ratio", f"must be >= 1, got {soft_ratio}")
    orientation = _number(doc.get("orientation_rad", 0.0), f"{path}.orientation_rad")
    exponent = _integer(doc.get("exponent", 1), f"{path}.exponent")
    if exponent < 1:
        raise ScenarioError(f"{path}.exponent", f"must be >= 1, got {exponent}")
    reference = doc.get("reference_point")
    if reference is not None:
        reference = _vector(reference, f"{path}.reference_point", d)
    safety = doc.get("safety_factor")
    if safety is not None:
        safety = _vector(safety, f"{path}.safety_factor", d)
        if any(e < 1.0 for e in safety):
            raise ScenarioError(f"{path}.safety_factor", "entries must be >= 1")
    lin_vel = doc.get("linear_velocity")
    if lin_vel is not None:
        lin_vel = _vector(lin_vel, f"{path}.linear_velocity", d)
    ang_vel = _number(doc.get("angular_velocity", 0.0), f"{path}.angular_velocity")
    try:
        obstacle = Obstacle(
            center=center, hard_semi_axes=axes, soft_ratio=soft_ratio,
            orientation=orientation, exponent=exponent, reference_point=reference,
            safety_factor=safety, linear_velocity=lin_vel, angular_velocity=ang_vel,
        )
    except DomainError as err:
        raise ScenarioError(path, str(err)) from None
    normalized = {
        "center": center,
        "hard_semi_axes": axes,
        "soft_ratio": soft_ratio,
        "orientation_rad": orientation,
        "exponent": exponent,
        "reference_point": [float(v) for v in obstacle.reference_point],
        "safety_factor": [float(v) for v in obstacle.safety_factor],
        "linear_velocity": [float(v) for v in obstacle.linear_velocity],
        "angular_velocity": ang_vel,
    }
    return obstacle, normalized


# ---------------------------------------------------------------------------
# strategy, integration, starts, motion

def _parse_strategy(doc, path):
    """Returns (c_or_auto, theta2_mode, theta2_angle, pairs_or_auto)."""
    _check_keys(doc, path, optional=("c", "theta2_policy", "intersection_pairs",
                                     "sgn_zero_value"))
    c_raw = doc.get("c", "auto")
    if c_raw != "auto":
        c_raw = _number(c_raw, f"{path}.c")
        if c_raw < 0:
            raise ScenarioError(f"{path}.c", f"must be >= 0, got {c_raw}")
    policy = doc.get("theta2_policy", FOLLOW_VELOCITY)
    if policy == FOLLOW_VELOCITY:
        mode, angle = FOLLOW_VELOCITY, 0.0
    elif isinstance(policy, dict):
        _check_keys(policy, f"{path}.theta2_policy", required=("fixed",))
        angle = _number(policy["fixed"], f"{path}.theta2_policy.fixed")
        if not (-math.pi < angle <= math.pi):
            raise ScenarioError(f"{path}.theta2_policy.fixed",
                                f"angle must lie in (-pi, pi], got {angle}")
        mode = FIXED
    else:
        raise ScenarioError(f"{path}.theta2_policy",
                            f"expected \"follow_velocity\" or {{\"fixed\": angle}}, got {policy!r}")
    pairs = doc.get("intersection_pairs", "auto")
    if pairs != "auto":
        if not isinstance(pairs, list):
            raise ScenarioError(f"{path}.intersection_pairs",
                                "expected \"auto\" or an array of index pairs")
        parsed = []
        for i, pair in enumerate(pairs):
            ppath = f"{path}.intersection_pairs[{i}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise ScenarioError(ppath, f"expected [n, p], got {pair!r}")
            parsed.append((_integer(pair[0], f"{ppath}[0]"),
                           _integer(pair[1], f"{ppath}[1]")))
        pairs = parsed
    if "sgn_zero_value" in doc and _integer(doc["sgn_zero_value"],
                                            f"{path}.sgn_zero_value") != 1:
        raise ScenarioError(f"{path}.sgn_zero_value", "only +1 is supported")
    return c_raw, mode, angle, pairs


def _parse_integration(doc, path) -> sim.IntegrationSettings:
    _check_keys(doc, path, optional=("dt", "max_steps", "eps_conv", "target"))
    kwargs = {}
    if "dt" in doc:
        kwargs["dt"] = _number(doc["dt"], f"{path}.dt")
    if "max_steps" in doc:
        kwargs["max_steps"] = _integer(doc["max_steps"], f"{path}.max_steps")
    if "eps_conv" in doc:
        kwargs["eps_conv"] = _number(doc["eps_conv"], f"{path}.eps_conv")
    if "target" in doc:
        tpath = f"{path}.target"
        _check_keys(doc["target"], tpath, required=("center", "radius"))
        kwargs["target"] = sim.Target(
            center=_vector(doc["target"]["center"], f"{tpath}.center"),
            radius=_number(doc["target"]["radius"], f"{tpath}.radius"),
        )
    try:
        return sim.IntegrationSettings(**kwargs)
    except DomainError as err:
        raise ScenarioError(path, str(err)) from None


def _parse_starts(doc, path, dim) -> list[np.ndarray]:
    _check_keys(doc, path, optional=("points", "grid"))
    starts: list[np.ndarray] = []
    if "points" in doc:
        pts = doc["points"]
        if not isinstance(pts, list):
            raise ScenarioError(f"{path}.points", "expected an array of points")
        for i, pt in enumerate(pts):
            starts.append(np.array(_vector(pt, f"{path}.points[{i}]", dim)))
    if "grid" in doc:
        gpath = f"{path}.grid"
        _check_keys(doc["grid"], gpath, required=("min", "max", "counts"))
        minimum = _vector(doc["grid"]["min"], f"{gpath}.min", dim)
        maximum = _vector(doc["grid"]["max"], f"{gpath}.max", dim)
        counts = [_integer(c, f"{gpath}.counts[{i}]")
                  for i, c in enumerate(doc["grid"]["counts"])]
        if len(counts) != dim:
            raise ScenarioError(f"{gpath}.counts", f"expected {dim} entries")
        try:
            starts.extend(sim.grid_points(minimum, maximum, counts))
        except DomainError as err:
            raise ScenarioError(f"{gpath}.counts", str(err)) from None
    return starts


def _parse_motion_scripts(doc, path, n_obstacles) -> dict[int, sim.MotionScript]:
    if not isinstance(doc, dict):
        raise ScenarioError(path, "expected an object keyed by obstacle index")
    scripts = {}
    for key, waypoints in doc.items():
        kpath = f"{path}.{key}"
        try:
            idx = int(key)
        except ValueError:
            raise ScenarioError(kpath, "keys must be obstacle indices") from None
        if not 0 <= idx < n_obstacles:
            raise ScenarioError(kpath, f"no obstacle with index {idx}")
        if not isinstance(waypoints, list) or not waypoints:
            raise ScenarioError(kpath, "expected a non-empty array of waypoints")
        parsed = []
        for i, wp in enumerate(waypoints):
            wpath = f"{kpath}[{i}]"
            _check_keys(wp, wpath, required=("time", "center"),
                        optional=("orientation",))
            parsed.append(sim.Waypoint(
                time=_number(wp["time"], f"{wpath}.time"),
                center=_vector(wp["center"], f"{wpath}.center"),
                orientation=_number(wp.get("orientation", 0.0),
                                    f"{wpath}.orientation"),
            ))
        try:
            scripts[idx] = sim.MotionScript(waypoints=tuple(parsed))
        except DomainError as err:
            raise ScenarioError(kpath, str(err)) from None
    return scripts


# ---------------------------------------------------------------------------
# auto resolution

def bounding_box(ds, obstacles, starts, settings):
    points = [np.asarray(ds.attractor, dtype=float)]
    points.extend(np.asarray(s, dtype=float) for s in starts)
    if settings.target is not None:
        points.append(np.asarray(settings.target.center, dtype=float))
    for obs in obstacles:
        reach = obs.soft_ratio * float(np.max(obs.hard_semi_axes))
        points.append(obs.center + reach)
        points.append(obs.center - reach)
    stacked = np.vstack(points)
    lo, hi = stacked.min(axis=0), stacked.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, 0.1 * span, 1.0)
    return lo - pad, hi + pad


def _auto_c(ds, obstacles, starts, settings) -> float:
    lo, hi = bounding_box(ds, obstacles, starts, settings)
    max_speed = 0.0
    for x in np.linspace(lo[0], hi[0], AUTO_C_GRID):
        for y in np.linspace(lo[1], hi[1], AUTO_C_GRID):
            speed = float(np.linalg.norm(evaluate_ds(ds, np.array([x, y]))))
            if speed > max_speed:
                max_speed = speed
    return AUTO_C_FRACTION * max_speed


def _soft_shells_overlap(obs_a: Obstacle, obs_b: Obstacle) -> bool:
    """Approximate overlap test by sampling each soft boundary."""
    def boundary(obs, t):
        local = obs.soft_ratio * obs.hard_semi_axes * np.array(
            [math.cos(t), math.sin(t)]
        )
        return obs.to_world(local)

    if gamma_soft(obs_b, obs_a.center) <= 1.0 or gamma_soft(obs_a, obs_b.center) <= 1.0:
        return True
    for t in np.linspace(0.0, 2 * math.pi, AUTO_PAIR_SAMPLES, endpoint=False):
        if gamma_soft(obs_b, boundary(obs_a, t)) <= 1.0:
            return True
        if gamma_soft(obs_a, boundary(obs_b, t)) <= 1.0:
            return True
    return False


def _auto_pairs(obstacles) -> list[tuple[int, int]]:
    pairs = []
    for i in range(len(obstacles)):
        for j in range(i + 1, len(obstacles)):
            if obstacles[i].dim == 2 and obstacles[j].dim == 2:
                if _soft_shells_overlap(obstacles[i], obstacles[j]):
                    pairs.append((i, j))
    return pairs


# ---------------------------------------------------------------------------
# top-level loading

def load_scenario_dict(doc: dict, base_dir=None) -> LoadedScenario:
    """Parse, validate, and resolve a scenario document."""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    _check_keys(doc, "scenario", required=("ds", "obstacles"),
                optional=("metadata", "strategy", "integration", "starts",
                          "motion_scripts"))

    metadata = doc.get("metadata", {})
    _check_keys(metadata, "metadata", optional=("name", "seed", "notes"))
    metadata = dict(metadata)

    ds_doc = doc["ds"]
    if isinstance(ds_doc, dict) and set(ds_doc) == {"file"}:
        ref = _string(ds_doc["file"], "ds.file")
        ds, ds_norm = load_ds_file(base_dir / ref)
    else:
        ds, ds_norm = parse_ds(ds_doc)

    if not isinstance(doc["obstacles"], list):
        raise ScenarioError("obstacles", "expected an array")
    obstacles, obstacle_norms = [], []
    for i, entry in enumerate(doc["obstacles"]):
        obstacle, normalized = _parse_obstacle(entry, f"obstacles[{i}]")
        if obstacle.dim != ds.dim:
            raise ScenarioError(f"obstacles[{i}].center",
                                f"dimension {obstacle.dim} does not match the "
                                f"system dimension {ds.dim}")
        obstacles.append(obstacle)
        obstacle_norms.append(normalized)

    settings = _parse_integration(doc.get("integration", {}), "integration")
    starts = _parse_starts(doc.get("starts", {}), "starts", ds.dim)

    c_raw, theta2_mode, theta2_angle, pairs_raw = _parse_strategy(
        doc.get("strategy", {}), "strategy"
    )
    if c_raw == "auto" and ds.dim != 2:
        raise ScenarioError("strategy.c",
                            "automatic resolution only supports planar systems; "
                            "set an explicit value")
    c_value = c_raw if c_raw != "auto" else _auto_c(ds, obstacles, starts, settings)
    pairs = pairs_raw if pairs_raw != "auto" else _auto_pairs(obstacles)
    for i, (n, p) in enumerate(pairs):
        if not (0 <= n < len(obstacles) and 0 <= p < len(obstacles)) or n == p:
            raise ScenarioError(f"strategy.intersection_pairs[{i}]",
                                f"invalid obstacle pair ({n}, {p})")
    try:
        strategy = StrategyConfig(c=c_value, theta2_mode=theta2_mode,
                                  theta2_angle=theta2_angle,
                                  intersection_pairs=tuple(pairs))
    except DomainError as err:
        raise ScenarioError("strategy", str(err)) from None

    scripts = _parse_motion_scripts(doc.get("motion_scripts", {}),
                                    "motion_scripts", len(obstacles))

    runtime = sim.Scenario(ds=ds, obstacles=tuple(obstacles), strategy=strategy,
                           settings=settings, motion_scripts=scripts)

    provenance = {
        "metadata": metadata,
        "ds": ds_norm,
        "obstacles": obstacle_norms,
        "strategy": {
            "c": c_value,
            "theta2_policy": (FOLLOW_VELOCITY if theta2_mode == FOLLOW_VELOCITY
                              else {"fixed": theta2_angle}),
            "intersection_pairs": [[n, p] for n, p in pairs],
            "sgn_zero_value": 1,
        },
        "integration": {
            "dt": settings.dt,
            "max_steps": settings.max_steps,
            "eps_conv": settings.eps_conv,
            **({"target": {"center": [float(v) for v in settings.target.center],
                           "radius": settings.target.radius}}
               if settings.target is not None else {}),
        },
        "starts": {"points": [[float(v) for v in s] for s in starts]},
    }
    if scripts:
        provenance["motion_scripts"] = {
            str(idx): [{"time": w.time, "center": [float(v) for v in w.center],
                        "orientation": w.orientation}
                       for w in script.waypoints]
            for idx, script in sorted(scripts.items())
        }

    return LoadedScenario(
        runtime=runtime,
        starts=tuple(starts),
        metadata=metadata,
        provenance=provenance,
        scenario_hash=scenario_digest(provenance),
    )


def load_scenario(path) -> LoadedScenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as err:
        raise ScenarioError("scenario", f"cannot read {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ScenarioError("scenario", f"{path} is not valid JSON: {err}") from None
    return load_scenario_dict(doc, base_dir=path.parent)
