import cmath
import math

import numpy as np
import pytest

from softnav.errors import DegeneratePointError, DomainError
from softnav.geometry import (
    Obstacle,
    RegionLabel,
    classify_region,
    gamma,
    gamma_gradient,
    gamma_soft,
    in_intersection,
    reference_direction,
    stiffness_coefficient,
    tangent_basis,
)

UNIT_CIRCLE = Obstacle(center=[0.0, 0.0], hard_semi_axes=[1.0, 1.0])
SOFT_CIRCLE = Obstacle(center=[0.0, 0.0], hard_semi_axes=[1.0, 1.0], soft_ratio=1.5)


def rotate_independent(point, angle):
    """Rotation oracle via complex multiplication, independent of the package."""
    z = complex(point[0], point[1]) * cmath.exp(1j * angle)
    return np.array([z.real, z.imag])


def finite_difference_gradient(obs, xi, step=1e-6):
    grad = np.zeros(len(xi))
    for i in range(len(xi)):
        hi = np.array(xi, dtype=float)
        lo = np.array(xi, dtype=float)
        hi[i] += step
        lo[i] -= step
        grad[i] = (gamma(obs, hi) - gamma(obs, lo)) / (2 * step)
    return grad


class TestStiffnessCoefficient:
    def test_cotton_wrapped_cylinder(self):
        # 4-unit hard core with a shell extending to 6 units
        assert stiffness_coefficient(4.0, 6.0) == pytest.approx(math.exp(0.5), rel=1e-12)

    def test_rigid_degenerate_case(self):
        assert stiffness_coefficient(5.0, 5.0) == 1.0

    def test_shell_smaller_than_core_rejected(self):
        with pytest.raises(DomainError):
            stiffness_coefficient(2.0, 0.0)

    def test_nonpositive_core_rejected(self):
        with pytest.raises(DomainError):
            stiffness_coefficient(0.0, 1.0)
        with pytest.raises(DomainError):
            stiffness_coefficient(-1.0, 1.0)


class TestGamma:
    def test_unit_circle(self):
        assert gamma(UNIT_CIRCLE, [2.0, 0.0]) == pytest.approx(4.0, abs=1e-14)

    def test_point_on_hard_boundary(self):
        ellipse = Obstacle(center=[0.0, 0.0], hard_semi_axes=[2.0, 1.0])
        assert gamma(ellipse, [2.0, 0.0]) == pytest.approx(1.0, abs=1e-14)

    def test_rotated_ellipse_against_rotation_oracle(self):
        ellipse = Obstacle(
            center=[0.0, 0.0], hard_semi_axes=[2.0, 1.0], orientation=math.pi / 2
        )
        point = np.array([1.0, 0.0])
        assert gamma(ellipse, point) == pytest.approx(1.0, abs=1e-12)
        # oracle: map the point into the obstacle frame independently
        local = rotate_independent(point, -math.pi / 2)
        expected = (local[0] / 2.0) ** 2 + (local[1] / 1.0) ** 2
        assert gamma(ellipse, point) == pytest.approx(expected, abs=1e-12)

    def test_scaling_identity(self):
        rng = np.random.default_rng(7)
        for k in [1.0, math.exp(0.25), math.exp(0.5), math.exp(1.5)]:
            obs = Obstacle(
                center=[0.3, -0.2],
                hard_semi_axes=[2.0, 0.7],
                soft_ratio=math.log(k) + 1.0,
                orientation=0.4,
                exponent=2,
            )
            scale = (math.log(obs.stiffness) + 1.0) ** (2 * obs.exponent)
            for _ in range(50):
                xi = rng.uniform(-5, 5, size=2)
                assert gamma_soft(obs, xi) * scale == pytest.approx(
                    gamma(obs, xi), rel=1e-12
                )

    def test_monotone_along_rays(self):
        obs = Obstacle(center=[1.0, 2.0], hard_semi_axes=[1.5, 0.5], orientation=0.7)
        rng = np.random.default_rng(11)
        for _ in range(100):
            theta = rng.uniform(0, 2 * math.pi)
            u = np.array([math.cos(theta), math.sin(theta)])
            s1, s2 = sorted(rng.uniform(0.01, 10.0, size=2))
            if s1 == s2:
                continue
            assert gamma(obs, obs.center + s1 * u) < gamma(obs, obs.center + s2 * u)

    def test_boundary_exactness(self):
        obs = Obstacle(
            center=[0.5, -1.0],
            hard_semi_axes=[2.0, 0.8],
            soft_ratio=1.5,
            orientation=0.3,
        )
        angles = np.linspace(0.0, 2 * math.pi, 1000, endpoint=False)
        for t in angles:
            # independent boundary construction: parametric ellipse, rotated
            local = np.array([2.0 * math.cos(t), 0.8 * math.sin(t)])
            world = obs.center + rotate_independent(local, 0.3)
            assert abs(gamma(obs, world) - 1.0) < 1e-9
            soft_world = obs.center + rotate_independent(local * 1.5, 0.3)
            assert abs(gamma_soft(obs, soft_world) - 1.0) < 1e-9

    def test_frame_invariance(self):
        base = Obstacle(center=[1.0, -0.5], hard_semi_axes=[1.2, 0.6], orientation=0.2)
        rng = np.random.default_rng(3)
        for _ in range(50):
            xi = rng.uniform(-4, 4, size=2)
            dtheta = rng.uniform(-math.pi, math.pi)
            turned = Obstacle(
                center=base.center,
                hard_semi_axes=base.hard_semi_axes,
                orientation=0.2 + dtheta,
            )
            xi_turned = base.center + rotate_independent(xi - base.center, dtheta)
            assert gamma(turned, xi_turned) == pytest.approx(gamma(base, xi), rel=1e-12)


class TestGammaSoft:
    def test_point_on_soft_boundary(self):
        assert gamma_soft(SOFT_CIRCLE, [1.5, 0.0]) == pytest.approx(1.0, abs=1e-14)

    def test_rigid_obstacle_matches_gamma(self):
        rng = np.random.default_rng(5)
        obs = Obstacle(center=[0.0, 0.0], hard_semi_axes=[2.0, 1.0], soft_ratio=1.0)
        for _ in range(20):
            xi = rng.uniform(-4, 4, size=2)
            assert gamma_soft(obs, xi) == gamma(obs, xi)

    def test_scaled_value(self):
        # hard-core value 9 divided by the squared shell ratio 1.5^2
        assert gamma_soft(SOFT_CIRCLE, [3.0, 0.0]) == pytest.approx(9.0 / 2.25, rel=1e-12)


class TestGammaGradient:
    def test_circle_axis_points(self):
        assert gamma_gradient(UNIT_CIRCLE, [2.0, 0.0]) == pytest.approx([4.0, 0.0])
        assert gamma_gradient(UNIT_CIRCLE, [0.0, 3.0]) == pytest.approx([0.0, 6.0])

    def test_center_is_degenerate(self):
        with pytest.raises(DegeneratePointError):
            gamma_gradient(UNIT_CIRCLE, [0.0, 0.0])

    @pytest.mark.parametrize("exponent", [1, 2])
    @pytest.mark.parametrize("orientation", [0.0, math.pi / 4, -1.1])
    def test_matches_finite_differences(self, exponent, orientation):
        obs = Obstacle(
            center=[0.4, -0.3],
            hard_semi_axes=[1.8, 0.9],
            orientation=orientation,
            exponent=exponent,
        )
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 100:
            xi = rng.uniform(-5, 5, size=2)
            if gamma(obs, xi) < 1.1:
                continue
            analytic = gamma_gradient(obs, xi)
            numeric = finite_difference_gradient(obs, xi)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric)
            checked += 1


class TestReferenceDirection:
    def test_axis_aligned(self):
        assert reference_direction(UNIT_CIRCLE, [3.0, 0.0]) == pytest.approx([1.0, 0.0])

    def test_offset_reference_point(self):
        obs = Obstacle(
            center=[1.0, 1.5], hard_semi_axes=[1.0, 1.0], reference_point=[1.0, 1.0]
        )
        assert reference_direction(obs, [1.0, 2.0]) == pytest.approx([0.0, 1.0])

    def test_normalization(self):
        r = reference_direction(UNIT_CIRCLE, [1.0, 1.0])
        assert r == pytest.approx([math.sqrt(2) / 2, math.sqrt(2) / 2])

    def test_degenerate_at_reference_point(self):
        with pytest.raises(DegeneratePointError):
            reference_direction(UNIT_CIRCLE, [0.0, 0.0])


class TestTangentBasis:
    def test_2d_convention(self):
        (e1,) = tangent_basis([1.0, 0.0])
        assert e1 == pytest.approx([0.0, 1.0])

    def test_2d_unnormalized_input(self):
        (e1,) = tangent_basis([0.0, 2.0])
        assert e1 == pytest.approx([-1.0, 0.0])

    def test_3d_basis_spans_complement(self):
        basis = tangent_basis([0.0, 0.0, 1.0])
        assert len(basis) == 2
        for e in basis:
            assert abs(e[2]) < 1e-12
            assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-12)
        assert abs(basis[0] @ basis[1]) < 1e-12

    def test_random_normals_are_orthonormal(self):
        rng = np.random.default_rng(9)
        for d in (2, 3, 4):
            for _ in range(25):
                n = rng.normal(size=d)
                basis = tangent_basis(n)
                mat = np.column_stack(basis)
                gram = mat.T @ mat
                assert np.allclose(gram, np.eye(d - 1), atol=1e-12)
                assert np.allclose(mat.T @ (n / np.linalg.norm(n)), 0.0, atol=1e-12)

    def test_orthogonal_to_gradient(self):
        obs = Obstacle(center=[0.0, 0.0], hard_semi_axes=[2.0, 1.0], orientation=0.6)
        rng = np.random.default_rng(13)
        for _ in range(50):
            xi = rng.uniform(-4, 4, size=2)
            if gamma(obs, xi) < 1.05:
                continue
            grad = gamma_gradient(obs, xi)
            for e in tangent_basis(grad):
                assert abs(e @ grad) < 1e-12 * np.linalg.norm(grad)

    def test_zero_normal_rejected(self):
        with pytest.raises(DegeneratePointError):
            tangent_basis([0.0, 0.0])


class TestClassifyRegion:
    def test_soft_region(self):
        assert classify_region(SOFT_CIRCLE, [1.2, 0.0]) is RegionLabel.SOFT_REGION

    def test_exterior(self):
        assert classify_region(SOFT_CIRCLE, [5.0, 0.0]) is RegionLabel.EXTERIOR

    def test_hard_interior(self):
        assert classify_region(SOFT_CIRCLE, [0.5, 0.0]) is RegionLabel.HARD_INTERIOR

    def test_boundaries_within_tolerance(self):
        assert classify_region(SOFT_CIRCLE, [1.0, 0.0]) is RegionLabel.HARD_BOUNDARY
        assert classify_region(SOFT_CIRCLE, [1.5, 0.0]) is RegionLabel.SOFT_BOUNDARY

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            classify_region(SOFT_CIRCLE, [1.2, 0.0], tol=0.0)


class TestInIntersection:
    @pytest.fixture
    def pair(self):
        a = Obstacle(center=[-1.0, 0.0], hard_semi_axes=[1.0, 1.0], soft_ratio=1.5)
        b = Obstacle(center=[1.0, 0.0], hard_semi_axes=[1.0, 1.0], soft_ratio=1.5)
        return a, b

    def test_point_in_overlap(self, pair):
        a, b = pair
        xi = np.array([0.0, 0.3])
        # oracle: evaluate both distance functions directly
        ga = (xi[0] + 1.0) ** 2 + xi[1] ** 2
        assert ga == pytest.approx(1.09)
        assert ga / 2.25 <= 1.0
        assert in_intersection(a, b, xi)

    def test_exterior_point(self, pair):
        a, b = pair
        assert not in_intersection(a, b, [4.0, 0.0])

    def test_point_inside_one_core(self, pair):
        a, b = pair
        assert not in_intersection(a, b, [1.0, 0.0])


class TestObstacleInvariants:
    def test_soft_ratio_below_one_rejected(self):
        with pytest.raises(DomainError):
            Obstacle(center=[0.0, 0.0], hard_semi_axes=[1.0, 1.0], soft_ratio=0.9)

    def test_nonpositive_axis_rejected(self):
        with pytest.raises(DomainError):
            Obstacle(center=[0.0, 0.0], hard_semi_axes=[1.0, 0.0])

    def test_reference_point_outside_core_rejected(self):
        with pytest.raises(DomainError):
            Obstacle(
                center=[0.0, 0.0], hard_semi_axes=[1.0, 1.0], reference_point=[2.0, 0.0]
            )

    def test_safety_factor_below_one_rejected(self):
        with pytest.raises(DomainError):
            Obstacle(
                center=[0.0, 0.0], hard_semi_axes=[1.0, 1.0], safety_factor=[0.5, 1.0]
            )

    def test_derived_stiffness(self):
        assert SOFT_CIRCLE.stiffness == pytest.approx(math.exp(0.5), rel=1e-15)
        assert UNIT_CIRCLE.stiffness == 1.0
        assert UNIT_CIRCLE.is_rigid
