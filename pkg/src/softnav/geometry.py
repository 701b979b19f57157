"""Deformable-obstacle geometry: level-set distance functions and local frames.

An obstacle is an ellipsoidal hard core wrapped in a soft shell obtained by
inflating every hard semi-axis by the soft/hard extent ratio.  The hard
boundary is the unit level set of :func:`gamma`; the soft boundary is the
unit level set of :func:`gamma_soft`.  Points with ``gamma > 1`` and
``gamma_soft <= 1`` lie in the traversable soft region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import DegeneratePointError, DomainError


def stiffness_coefficient(a: float, b: float) -> float:
    """Stiffness k = exp(b/a - 1) of a shell with hard extent a and soft extent b.

    k = 1 is the rigid limit (b = a, no shell); larger k means a thicker,
    more compliant shell.
    """
    if a <= 0:
        raise DomainError(f"hard extent must be positive, got a={a}")
    if b < a:
        raise DomainError(f"soft extent must cover the hard core, got b={b} < a={a}")
    return math.exp(b / a - 1.0)


def rotation_matrix(angle: float) -> np.ndarray:
    """2-D counterclockwise rotation matrix."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


class RegionLabel(Enum):
    EXTERIOR = "exterior"
    SOFT_REGION = "soft_region"
    SOFT_BOUNDARY = "soft_boundary"
    HARD_BOUNDARY = "hard_boundary"
    HARD_INTERIOR = "hard_interior"


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Ellipsoidal obstacle with a rigid core and a uniformly scaled soft shell.

    Attributes:
        center: core center in world coordinates.
        hard_semi_axes: per-axis extents of the hard core, all > 0.
        soft_ratio: soft/hard extent ratio b/a >= 1; the soft shell is the
            hard core inflated by this factor.  1 means rigid (no shell).
        orientation: rotation of the obstacle frame, radians (2-D only).
        exponent: positive integer sharpness of the level-set function.
        reference_point: interior point the modulation compresses toward;
            defaults to the center.
        safety_factor: per-axis clearance inflation eta_i >= 1 applied only
            inside the modulation, not to the distance functions.
        linear_velocity: rigid-body translation rate (zero when static).
        angular_velocity: rigid-body spin rate, radians/time (2-D scalar).
    """

    center: np.ndarray
    hard_semi_axes: np.ndarray
    soft_ratio: float = 1.0
    orientation: float = 0.0
    exponent: int = 1
    reference_point: np.ndarray | None = None
    safety_factor: np.ndarray | None = None
    linear_velocity: np.ndarray | None = None
    angular_velocity: float = 0.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        axes = np.asarray(self.hard_semi_axes, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "hard_semi_axes", axes)
        if center.ndim != 1 or axes.shape != center.shape:
            raise DomainError(
                f"center and hard_semi_axes must be vectors of equal length, "
                f"got shapes {center.shape} and {axes.shape}"
            )
        if np.any(axes <= 0):
            raise DomainError(f"hard_semi_axes must all be positive, got {axes}")
        if self.soft_ratio < 1.0:
            raise DomainError(f"soft_ratio must be >= 1, got {self.soft_ratio}")
        if self.exponent < 1 or int(self.exponent) != self.exponent:
            raise DomainError(f"exponent must be a positive integer, got {self.exponent}")
        d = center.shape[0]
        if self.orientation != 0.0 and d != 2:
            raise DomainError("nonzero orientation is only supported in 2-D")

        ref = self.reference_point
        ref = center if ref is None else np.asarray(ref, dtype=float)
        object.__setattr__(self, "reference_point", ref)

        eta = self.safety_factor
        eta = np.ones(d) if eta is None else np.asarray(eta, dtype=float)
        if eta.shape != (d,):
            raise DomainError(f"safety_factor must have {d} entries, got {eta}")
        if np.any(eta < 1.0):
            raise DomainError(f"safety_factor entries must be >= 1, got {eta}")
        object.__setattr__(self, "safety_factor", eta)

        vel = self.linear_velocity
        vel = np.zeros(d) if vel is None else np.asarray(vel, dtype=float)
        if vel.shape != (d,):
            raise DomainError(f"linear_velocity must have {d} entries, got {vel}")
        object.__setattr__(self, "linear_velocity", vel)

        if gamma(self, ref) >= 1.0:
            raise DomainError(
                f"reference_point {ref} must lie strictly inside the hard core"
            )

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @cached_property
    def stiffness(self) -> float:
        """Derived stiffness k = exp(soft_ratio - 1); 1 for rigid obstacles."""
        return math.exp(self.soft_ratio - 1.0)

    @property
    def is_rigid(self) -> bool:
        return self.soft_ratio == 1.0

    @cached_property
    def is_moving(self) -> bool:
        return self.angular_velocity != 0.0 or bool(np.any(self.linear_velocity != 0.0))

    @cached_property
    def has_safety_margin(self) -> bool:
        return bool(np.any(self.safety_factor != 1.0))

    @cached_property
    def _rot(self) -> np.ndarray | None:
        if self.dim == 2 and self.orientation != 0.0:
            return rotation_matrix(self.orientation)
        return None

    def to_local(self, xi: np.ndarray) -> np.ndarray:
        """World position -> obstacle-frame coordinates."""
        rel = np.asarray(xi, dtype=float) - self.center
        if self._rot is None:
            return rel
        return self._rot.T @ rel

    def to_world(self, local: np.ndarray) -> np.ndarray:
        """Obstacle-frame coordinates -> world position."""
        if self._rot is None:
            return self.center + local
        return self.center + self._rot @ local

    def direction_to_world(self, vec: np.ndarray) -> np.ndarray:
        """Rotate an obstacle-frame direction into the world frame."""
        if self._rot is None:
            return vec
        return self._rot @ vec


def gamma(obs: Obstacle, xi: np.ndarray) -> float:
    """Hard-core distance function: 1 on the core surface, < 1 inside, > 1 outside.

    Sum over axes of (|coordinate| / semi_axis)^(2p) in the obstacle frame;
    increases monotonically along rays from the center.
    """
    local = obs.to_local(xi)
    return float(np.sum((np.abs(local) / obs.hard_semi_axes) ** (2 * obs.exponent)))


def gamma_soft(obs: Obstacle, xi: np.ndarray) -> float:
    """Soft-shell distance function: the hard-core value rescaled so the
    inflated (soft) boundary is its unit level set.

    Equal to ``gamma(obs, xi) / soft_ratio**(2p)``; identical to gamma for
    rigid obstacles.
    """
    return gamma(obs, xi) / obs.soft_ratio ** (2 * obs.exponent)


def gamma_values(obs: Obstacle, xi: np.ndarray) -> tuple[float, float]:
    """Hard and soft distance values in one frame transform."""
    g = gamma(obs, xi)
    return g, g / obs.soft_ratio ** (2 * obs.exponent)


def gamma_gradient(obs: Obstacle, xi: np.ndarray) -> np.ndarray:
    """World-frame gradient of :func:`gamma`; nonzero everywhere but the center."""
    local = obs.to_local(xi)
    if not np.any(local):
        raise DegeneratePointError(f"gamma gradient is undefined at the center {obs.center}")
    p2 = 2 * obs.exponent
    grad_local = p2 * local ** (p2 - 1) / obs.hard_semi_axes ** p2
    return obs.direction_to_world(grad_local)


def reference_direction(obs: Obstacle, xi: np.ndarray) -> np.ndarray:
    """Unit vector from the obstacle's reference point to the query point."""
    rel = np.asarray(xi, dtype=float) - obs.reference_point
    if rel.shape[0] == 2:
        norm = math.hypot(rel[0], rel[1])
    else:
        norm = float(np.linalg.norm(rel))
    if norm == 0.0:
        raise DegeneratePointError(
            f"reference direction is undefined at the reference point {obs.reference_point}"
        )
    return rel / norm


def tangent_basis(normal: np.ndarray) -> list[np.ndarray]:
    """Deterministic orthonormal basis of the hyperplane orthogonal to ``normal``.

    In 2-D the single tangent is the 90-degree counterclockwise rotation of
    the normalized input.  In higher dimensions the basis comes from a
    Householder reflection mapping the first coordinate axis onto the normal.
    """
    n = np.asarray(normal, dtype=float)
    norm = float(np.linalg.norm(n))
    if norm == 0.0:
        raise DegeneratePointError("tangent basis is undefined for a zero normal")
    v = n / norm
    d = v.shape[0]
    if d == 2:
        return [np.array([-v[1], v[0]])]
    w = v.copy()
    w[0] += 1.0 if v[0] >= 0 else -1.0
    w /= np.linalg.norm(w)
    house = np.eye(d) - 2.0 * np.outer(w, w)
    return [house[:, i].copy() for i in range(1, d)]


def region_from_values(g: float, gk: float, tol: float = 1e-9) -> RegionLabel:
    """Region label from precomputed hard and soft distance values."""
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if abs(g - 1.0) <= tol:
        return RegionLabel.HARD_BOUNDARY
    if g < 1.0:
        return RegionLabel.HARD_INTERIOR
    if abs(gk - 1.0) <= tol:
        return RegionLabel.SOFT_BOUNDARY
    if gk < 1.0:
        return RegionLabel.SOFT_REGION
    return RegionLabel.EXTERIOR


def classify_region(obs: Obstacle, xi: np.ndarray, tol: float = 1e-9) -> RegionLabel:
    """Label the query point relative to the hard core and soft shell.

    Boundary labels win within ``tol`` of the corresponding unit level set.
    """
    return region_from_values(gamma(obs, xi), gamma_soft(obs, xi), tol)


def in_intersection(obs_a: Obstacle, obs_b: Obstacle, xi: np.ndarray) -> bool:
    """True iff the point lies in both obstacles' soft regions simultaneously."""
    ga = gamma(obs_a, xi)
    if ga <= 1.0:
        return False
    gb = gamma(obs_b, xi)
    if gb <= 1.0:
        return False
    gka = gamma_soft(obs_a, xi)
    if not (0.0 < gka <= 1.0):
        return False
    gkb = gamma_soft(obs_b, xi)
    return 0.0 < gkb <= 1.0
