"""Adaptive velocity corrections applied on top of the modulated field.

Two additive corrections shape how the robot treats soft shells: a traversal
term that grows quadratically as the soft-shell distance value drops below 1,
pushing motion through compliant material, and an intersection term that
decelerates passage where two soft shells overlap.  Both scale with a single
velocity-unit factor ``c`` and share a sign convention tied to the angle
between the current heading and the obstacle frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LinearDS, LpvDS, evaluate_ds
from .errors import DomainError
from .geometry import (
    Obstacle,
    gamma_gradient,
    gamma_soft,
    in_intersection,
    reference_direction,
    rotation_matrix,
    tangent_basis,
)
from .modulation import combine_multi

log = logging.getLogger(__name__)

FOLLOW_VELOCITY = "follow_velocity"
FIXED = "fixed"

ZERO_VELOCITY_TOL = 1e-12


@dataclass(frozen=True)
class StrategyConfig:
    """Tuning of the adaptive corrections.

    ``c`` is the correction strength in velocity units.  ``theta2_mode``
    selects how the desired heading angle is obtained: from the live
    (post-modulation) velocity, or a fixed angle.  ``intersection_pairs``
    lists the obstacle index pairs whose overlap triggers the deceleration;
    each unordered pair contributes one term, attributed to its first member.
    ``sgn_zero_value`` records the sign convention at the dead-center heading
    (cosine exactly zero); only +1 is supported.
    """

    c: float
    theta2_mode: str = FOLLOW_VELOCITY
    theta2_angle: float = 0.0
    intersection_pairs: tuple[tuple[int, int], ...] = ()
    sgn_zero_value: int = 1

    def __post_init__(self):
        if self.c < 0:
            raise DomainError(f"correction factor c must be >= 0, got {self.c}")
        if self.theta2_mode not in (FOLLOW_VELOCITY, FIXED):
            raise DomainError(f"unknown theta2 mode {self.theta2_mode!r}")
        if self.theta2_mode == FIXED and not (-math.pi < self.theta2_angle <= math.pi):
            raise DomainError(
                f"fixed heading angle must lie in (-pi, pi], got {self.theta2_angle}"
            )
        if self.sgn_zero_value != 1:
            raise DomainError("the sign convention at cos = 0 is fixed to +1")
        object.__setattr__(
            self,
            "intersection_pairs",
            tuple((int(n), int(p)) for n, p in self.intersection_pairs),
        )


def sign_factor(theta2: float, theta1: float) -> float:
    """Sign of cos(theta2 - theta1), with +1 at the zero crossing."""
    return 1.0 if math.cos(theta2 - theta1) >= 0.0 else -1.0


def resolve_theta2(cfg: StrategyConfig, current_velocity: np.ndarray) -> float:
    """Desired heading angle per the configured policy.

    Following a zero velocity is undefined; the angle falls back to 0 and the
    event is logged.
    """
    if cfg.theta2_mode == FIXED:
        return cfg.theta2_angle
    vx, vy = float(current_velocity[0]), float(current_velocity[1])
    if math.hypot(vx, vy) <= ZERO_VELOCITY_TOL:
        log.debug("heading requested for a zero velocity; falling back to 0")
        return 0.0
    return math.atan2(vy, vx)


def _soft_terms(obstacles, xi, cfg, theta2, attractor, delta_att):
    if cfg.c == 0.0:
        return []
    if attractor is not None and delta_att > 0.0:
        if np.linalg.norm(xi - attractor) < delta_att:
            log.debug("soft-region term suppressed inside the attractor ball")
            return []
    terms = []
    rot = rotation_matrix(theta2)
    for obs in obstacles:
        if obs.is_rigid:
            log.debug("soft-region term skipped for rigid obstacle")
            continue
        gk = gamma_soft(obs, xi)
        r_hat = reference_direction(obs, xi)
        s = sign_factor(theta2, obs.orientation)
        terms.append((s * cfg.c / gk**2) * (rot @ r_hat))
    return terms


def _intersection_terms(obstacles, xi, cfg, theta2):
    if cfg.c == 0.0 or not cfg.intersection_pairs:
        return []
    terms = []
    rot = rotation_matrix(theta2)
    for n, p in cfg.intersection_pairs:
        obs_n, obs_p = obstacles[n], obstacles[p]
        if not in_intersection(obs_n, obs_p, xi):
            continue
        gk_sum = gamma_soft(obs_n, xi) + gamma_soft(obs_p, xi)
        e1 = tangent_basis(gamma_gradient(obs_n, xi))[0]
        align = float(reference_direction(obs_n, xi) @ e1)
        s = sign_factor(theta2, obs_n.orientation)
        terms.append((-s * align * cfg.c * (2.0 / gk_sum) ** 2) * (rot @ e1))
    return terms


def soft_region_adjustment(obstacles, xi, xdot, cfg: StrategyConfig, *,
                           attractor=None, delta_att=0.0, theta2=None) -> np.ndarray:
    """Add the soft-shell traversal term of every compliant obstacle.

    Each term has magnitude ``c / gamma_soft**2`` and points along the
    heading-rotated reference direction, signed by :func:`sign_factor`.
    Rigid obstacles contribute nothing, and everything is suppressed inside
    a ``delta_att`` ball around the attractor.
    """
    xdot = np.asarray(xdot, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if theta2 is None:
        theta2 = resolve_theta2(cfg, xdot)
    terms = _soft_terms(obstacles, xi, cfg, theta2, attractor, delta_att)
    if not terms:
        return xdot
    return xdot + sum(terms)


def intersection_adjustment(obstacles, xi, xdot, cfg: StrategyConfig, *,
                            theta2=None) -> np.ndarray:
    """Decelerate through regions where two soft shells overlap.

    Applies only at points passing the pairwise overlap membership test.
    The subtracted vector points along the heading-rotated tangent of the
    pair's first obstacle, scaled by how aligned that obstacle's reference
    direction is with its tangent.
    """
    xdot = np.asarray(xdot, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if theta2 is None:
        theta2 = resolve_theta2(cfg, xdot)
    terms = _intersection_terms(obstacles, xi, cfg, theta2)
    if not terms:
        return xdot
    return xdot + sum(terms)


@dataclass(frozen=True)
class Scene:
    """Everything needed to evaluate the complete velocity field at a point."""

    ds: LinearDS | LpvDS
    obstacles: tuple[Obstacle, ...]
    strategy: StrategyConfig
    delta_att: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


def total_velocity(scene: Scene, xi: np.ndarray) -> np.ndarray:
    """Complete velocity: nominal field, modulation, then both corrections.

    The heading angle is resolved once from the modulated velocity and shared
    by both correction terms.
    """
    xi = np.asarray(xi, dtype=float)
    f_val = evaluate_ds(scene.ds, xi)
    modulated = combine_multi(scene.obstacles, f_val, xi)
    cfg = scene.strategy
    theta2 = resolve_theta2(cfg, modulated)
    terms = _soft_terms(scene.obstacles, xi, cfg, theta2,
                        scene.ds.attractor, scene.delta_att)
    terms += _intersection_terms(scene.obstacles, xi, cfg, theta2)
    if not terms:
        return modulated
    out = modulated + sum(terms)
    # corrections must stay within their advertised magnitude budget
    assert np.linalg.norm(out - modulated) <= sum(
        np.linalg.norm(t) for t in terms
    ) + 1e-12
    return out
