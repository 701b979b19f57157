"""Velocity modulation around obstacles.

The nominal velocity is reshaped by a state-dependent matrix built from the
obstacle's local frame: motion toward the obstacle is compressed to zero at
the hard boundary while tangential motion is stretched, so integral curves
wrap around the core without creating new equilibria.  Safety factors inflate
the surface at which the compression bottoms out; moving obstacles are
handled in their own reference frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePointError,
    DomainError,
    InteriorPointError,
    SingularBasisError,
)
from .geometry import (
    Obstacle,
    gamma,
    gamma_gradient,
    reference_direction,
    tangent_basis,
)

# Queries marginally inside the hard boundary (numerical drift) are clamped
# back onto it; queries deeper inside than INTERIOR_TOL are a hard error.
GAMMA_CLAMP = 1e-9
INTERIOR_TOL = 1e-6

DET_TOL = 1e-12


@dataclass(frozen=True)
class ModulationResult:
    """Modulation factors at one query point.

    ``matrix`` equals ``basis @ eigenvalue_matrix @ inv(basis)``; the first
    basis column is the reference direction, the rest the tangent basis.
    ``gamma_used`` is the distance value fed to the eigenvalue law, after
    safety scaling and clamping.
    """

    basis: np.ndarray
    eigenvalue_matrix: np.ndarray
    matrix: np.ndarray
    lambda_r: float
    lambda_e: np.ndarray
    gamma_used: float


def eigenvalue_pair(gamma_value: float) -> tuple[float, float]:
    """Compression/stretch eigenvalues (1 - 1/g, 1 + 1/g) for g >= 1.

    The compression hits 0 on the hard boundary and both factors approach 1
    far away.  Values below 1 are the caller's responsibility to clamp.
    """
    if gamma_value < 1.0:
        raise DomainError(
            f"eigenvalue law is undefined inside the boundary, got gamma={gamma_value}"
        )
    inv = 1.0 / gamma_value
    return 1.0 - inv, 1.0 + inv


def safety_scaled_point(obs: Obstacle, xi: np.ndarray) -> np.ndarray:
    """Query point contracted toward the obstacle center by the safety factor.

    The division is element-wise in the obstacle frame, so evaluating the
    distance functions at the returned point is equivalent to inflating the
    obstacle per-axis.  Identity when every factor is 1.
    """
    if not obs.has_safety_margin:
        return np.asarray(xi, dtype=float)
    return obs.to_world(obs.to_local(xi) / obs.safety_factor)


def basis_matrix(obs: Obstacle, xi: np.ndarray) -> np.ndarray:
    """Frame matrix with the reference direction first, tangents after."""
    r_hat = reference_direction(obs, xi)
    tangents = tangent_basis(gamma_gradient(obs, xi))
    basis = np.column_stack([r_hat, *tangents])
    if abs(np.linalg.det(basis)) < DET_TOL:
        raise SingularBasisError(
            f"reference direction is parallel to the tangent plane at {np.asarray(xi)}; "
            f"move the reference point"
        )
    return basis


def _inv(mat: np.ndarray) -> np.ndarray:
    if mat.shape == (2, 2):
        det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
        return np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]]) / det
    return np.linalg.inv(mat)


def _build(obs: Obstacle, xi: np.ndarray) -> tuple[ModulationResult, float]:
    """Modulation factors plus the raw safety-scaled distance value."""
    if obs.dim == 2:
        return _build_2d(obs, xi)
    xi_eff = safety_scaled_point(obs, xi)
    g_raw = gamma(obs, xi_eff)
    if g_raw < 1.0 - INTERIOR_TOL:
        raise InteriorPointError(
            f"point {np.asarray(xi)} lies inside the (safety-scaled) hard core "
            f"(gamma={g_raw:.6g})"
        )
    g_used = g_raw if g_raw >= 1.0 + GAMMA_CLAMP else 1.0 + GAMMA_CLAMP
    lam_r, lam_e = eigenvalue_pair(g_used)
    basis = basis_matrix(obs, xi_eff)
    d = basis.shape[0]
    eig = np.diag([lam_r] + [lam_e] * (d - 1))
    matrix = basis @ eig @ _inv(basis)
    result = ModulationResult(
        basis=basis,
        eigenvalue_matrix=eig,
        matrix=matrix,
        lambda_r=lam_r,
        lambda_e=np.full(d - 1, lam_e),
        gamma_used=g_used,
    )
    return result, g_raw


def _build_2d(obs: Obstacle, xi) -> tuple[ModulationResult, float]:
    """Scalar-arithmetic twin of :func:`_build`; field evaluation hot path."""
    x0 = float(xi[0])
    x1 = float(xi[1])
    cx = obs.center
    rot = obs._rot
    rx, ry = x0 - cx[0], x1 - cx[1]
    if rot is None:
        l0, l1 = rx, ry
    else:
        l0 = rot[0, 0] * rx + rot[1, 0] * ry
        l1 = rot[0, 1] * rx + rot[1, 1] * ry
    if obs.has_safety_margin:
        eta = obs.safety_factor
        l0 /= eta[0]
        l1 /= eta[1]
        if rot is None:
            e0, e1c = cx[0] + l0, cx[1] + l1
        else:
            e0 = cx[0] + rot[0, 0] * l0 + rot[0, 1] * l1
            e1c = cx[1] + rot[1, 0] * l0 + rot[1, 1] * l1
    else:
        e0, e1c = x0, x1

    axes = obs.hard_semi_axes
    a0, a1 = axes[0], axes[1]
    p2 = 2 * obs.exponent
    if p2 == 2:
        g_raw = (l0 / a0) ** 2 + (l1 / a1) ** 2
        d0 = 2.0 * l0 / (a0 * a0)
        d1 = 2.0 * l1 / (a1 * a1)
    else:
        g_raw = abs(l0 / a0) ** p2 + abs(l1 / a1) ** p2
        d0 = p2 * l0 ** (p2 - 1) / a0**p2
        d1 = p2 * l1 ** (p2 - 1) / a1**p2
    if g_raw < 1.0 - INTERIOR_TOL:
        raise InteriorPointError(
            f"point ({x0}, {x1}) lies inside the (safety-scaled) hard core "
            f"(gamma={g_raw:.6g})"
        )
    g_used = g_raw if g_raw >= 1.0 + GAMMA_CLAMP else 1.0 + GAMMA_CLAMP
    inv_g = 1.0 / g_used
    lam_r = 1.0 - inv_g
    lam_e = 1.0 + inv_g

    if rot is None:
        gx, gy = d0, d1
    else:
        gx = rot[0, 0] * d0 + rot[0, 1] * d1
        gy = rot[1, 0] * d0 + rot[1, 1] * d1
    grad_norm = math.hypot(gx, gy)
    if grad_norm == 0.0:
        raise DegeneratePointError(
            f"gamma gradient is undefined at the center {obs.center}"
        )
    tx, ty = -gy / grad_norm, gx / grad_norm

    ref = obs.reference_point
    ux, uy = e0 - ref[0], e1c - ref[1]
    ref_norm = math.hypot(ux, uy)
    if ref_norm == 0.0:
        raise DegeneratePointError(
            f"reference direction is undefined at the reference point {ref}"
        )
    ux /= ref_norm
    uy /= ref_norm

    det = ux * ty - tx * uy
    if abs(det) < DET_TOL:
        raise SingularBasisError(
            f"reference direction is parallel to the tangent plane at "
            f"({x0}, {x1}); move the reference point"
        )

    # E diag(lam_r, lam_e) E^-1 expanded for the 2x2 case
    m00 = (lam_r * ux * ty - lam_e * tx * uy) / det
    m01 = (ux * tx * (lam_e - lam_r)) / det
    m10 = (uy * ty * (lam_r - lam_e)) / det
    m11 = (lam_e * ux * ty - lam_r * tx * uy) / det

    result = ModulationResult(
        basis=np.array([[ux, tx], [uy, ty]]),
        eigenvalue_matrix=np.array([[lam_r, 0.0], [0.0, lam_e]]),
        matrix=np.array([[m00, m01], [m10, m11]]),
        lambda_r=lam_r,
        lambda_e=np.array([lam_e]),
        gamma_used=g_used,
    )
    return result, g_raw


def modulation_matrix(obs: Obstacle, xi: np.ndarray) -> ModulationResult:
    """Modulation factors at a point outside the (safety-scaled) hard core."""
    result, _ = _build(obs, xi)
    return result


def modulate_static(obs: Obstacle, f_val: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Apply the modulation matrix to a nominal velocity."""
    return modulation_matrix(obs, xi).matrix @ np.asarray(f_val, dtype=float)


def obstacle_point_velocity(obs: Obstacle, xi: np.ndarray) -> np.ndarray:
    """Rigid-body velocity of the obstacle material at a world point."""
    velocity = obs.linear_velocity
    omega = obs.angular_velocity
    if omega != 0.0:
        if obs.dim != 2:
            raise DomainError("angular velocity is only supported in 2-D")
        rel = np.asarray(xi, dtype=float) - obs.center
        velocity = velocity + np.array([-omega * rel[1], omega * rel[0]])
    return velocity


def modulate_moving(obs: Obstacle, f_val: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Modulate relative to a moving obstacle, then restore its velocity.

    Reduces exactly to :func:`modulate_static` when the obstacle is static.
    """
    if not obs.is_moving:
        return modulate_static(obs, f_val, xi)
    f_val = np.asarray(f_val, dtype=float)
    v_obs = obstacle_point_velocity(obs, xi)
    matrix = modulation_matrix(obs, xi).matrix
    return matrix @ (f_val - v_obs) + v_obs


def combine_multi(obstacles, f_val: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Blend per-obstacle modulated velocities across a whole scene.

    Each obstacle's velocity is weighted by the product of the other
    obstacles' boundary distances, so the obstacle whose (safety-scaled)
    boundary is being approached takes over completely.  With one obstacle
    this is exactly :func:`modulate_moving`; far from all obstacles the
    result approaches the nominal velocity.
    """
    f_val = np.asarray(f_val, dtype=float)
    if not obstacles:
        return f_val

    velocities = []
    distances = []
    for idx, obs in enumerate(obstacles):
        try:
            result, g_raw = _build(obs, xi)
        except InteriorPointError as err:
            if err.obstacle_index is None:
                err.obstacle_index = idx
            raise
        if obs.is_moving:
            v_obs = obstacle_point_velocity(obs, xi)
            velocities.append(result.matrix @ (f_val - v_obs) + v_obs)
        else:
            velocities.append(result.matrix @ f_val)
        distances.append(max(g_raw, 1.0))

    if len(velocities) == 1:
        return velocities[0]

    weights = []
    for n in range(len(obstacles)):
        w = 1.0
        for m, g in enumerate(distances):
            if m != n:
                w *= g - 1.0
        weights.append(w)
    total = sum(weights)
    if total == 0.0:
        # two or more boundaries meet at this point: split evenly among them
        on_boundary = [float(g == 1.0) for g in distances]
        weights = on_boundary
        total = sum(weights)

    blended = np.zeros_like(f_val)
    for w, v in zip(weights, velocities):
        if w != 0.0:
            blended = blended + (w / total) * v
    return blended
