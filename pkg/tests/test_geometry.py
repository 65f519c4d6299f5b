import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as ScipyRotation

from gridreg.errors import InvalidInputError
from gridreg.geometry import (
    EulerAngles,
    RigidTransform,
    apply_transform,
    as_point_cloud,
    build_rotation_grid,
    compose,
    euler_from_rotation,
    min_chebyshev_separation,
    random_rotation,
    rotation_from_euler,
    rotation_geodesic_angle,
    wrap_angle,
)

# ---------------------------------------------------------------------------
# oracles


def scipy_matrix(theta, phi, xi):
    # lowercase "xyz" = extrinsic rotations about fixed axes, X applied first
    return ScipyRotation.from_euler("xyz", [theta, phi, xi]).as_matrix()


def scipy_geodesic_deg(ra, rb):
    rel = ScipyRotation.from_matrix(ra).inv() * ScipyRotation.from_matrix(rb)
    return math.degrees(rel.magnitude())


def brute_min_chebyshev(points):
    best = math.inf
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            best = min(best, max(abs(points[i][k] - points[j][k]) for k in range(3)))
    return best


angles_st = st.tuples(
    st.floats(-math.pi, math.pi),
    st.floats(-math.pi / 2 + 0.05, math.pi / 2 - 0.05),
    st.floats(-math.pi, math.pi),
)


# ---------------------------------------------------------------------------


class TestRotationFromEuler:
    def test_zero_angles_is_identity(self):
        assert np.array_equal(rotation_from_euler((0.0, 0.0, 0.0)), np.eye(3))

    def test_single_axis_hand_values(self):
        c, s = math.cos(0.3), math.sin(0.3)
        np.testing.assert_allclose(
            rotation_from_euler((0.3, 0, 0)),
            [[1, 0, 0], [0, c, -s], [0, s, c]], atol=1e-15)
        np.testing.assert_allclose(
            rotation_from_euler((0, 0.3, 0)),
            [[c, 0, s], [0, 1, 0], [-s, 0, c]], atol=1e-15)
        np.testing.assert_allclose(
            rotation_from_euler((0, 0, 0.3)),
            [[c, -s, 0], [s, c, 0], [0, 0, 1]], atol=1e-15)

    def test_matches_scipy_extrinsic_xyz(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            th, ph, xi = rng.uniform(-math.pi, math.pi, 3)
            np.testing.assert_allclose(
                rotation_from_euler((th, ph, xi)), scipy_matrix(th, ph, xi),
                atol=1e-13)

    def test_accepts_euler_angles_instance(self):
        e = EulerAngles(0.1, -0.2, 0.3)
        assert np.array_equal(rotation_from_euler(e),
                              rotation_from_euler((0.1, -0.2, 0.3)))

    def test_rejects_bad_input(self):
        with pytest.raises(InvalidInputError):
            rotation_from_euler((1.0, 2.0))
        with pytest.raises(InvalidInputError):
            rotation_from_euler((np.nan, 0, 0))


class TestEulerFromRotation:
    def test_roundtrip_recovers_angles(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            th = rng.uniform(-math.pi, math.pi)
            ph = rng.uniform(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6)
            xi = rng.uniform(-math.pi, math.pi)
            e = euler_from_rotation(rotation_from_euler((th, ph, xi)))
            np.testing.assert_allclose(e.as_array(), [th, ph, xi], atol=1e-9)

    def test_matrix_roundtrip_on_random_rotations(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            r = random_rotation(rng)
            np.testing.assert_allclose(
                rotation_from_euler(euler_from_rotation(r)), r, atol=1e-12)

    def test_angle_ranges(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            e = euler_from_rotation(random_rotation(rng))
            assert -math.pi <= e.theta <= math.pi
            assert -math.pi / 2 <= e.phi <= math.pi / 2
            assert -math.pi <= e.xi <= math.pi

    def test_gimbal_singularity_pins_theta(self):
        for sign in (1.0, -1.0):
            r = rotation_from_euler((0.4, sign * math.pi / 2, -0.9))
            e = euler_from_rotation(r)
            assert e.theta == 0.0
            assert abs(e.phi - sign * math.pi / 2) < 1e-12
            # the split is not unique but the matrix must reconstruct
            np.testing.assert_allclose(rotation_from_euler(e), r, atol=1e-12)

    @given(angles_st)
    @settings(max_examples=150, deadline=None)
    def test_reconstruction_property(self, angles):
        r = rotation_from_euler(angles)
        np.testing.assert_allclose(
            rotation_from_euler(euler_from_rotation(r)), r, atol=1e-11)


class TestGeodesicAngle:
    def test_zero_for_equal(self):
        r = rotation_from_euler((0.2, 0.1, -0.4))
        assert rotation_geodesic_angle(r, r) == 0.0

    def test_single_axis_angle(self):
        a = rotation_from_euler((0, 0, 0))
        b = rotation_from_euler((math.radians(30), 0, 0))
        assert abs(rotation_geodesic_angle(a, b) - 30.0) < 1e-10

    def test_matches_scipy(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            ra, rb = random_rotation(rng), random_rotation(rng)
            assert abs(rotation_geodesic_angle(ra, rb)
                       - scipy_geodesic_deg(ra, rb)) < 1e-8

    def test_symmetry(self):
        rng = np.random.default_rng(13)
        ra, rb = random_rotation(rng), random_rotation(rng)
        assert rotation_geodesic_angle(ra, rb) == pytest.approx(
            rotation_geodesic_angle(rb, ra), abs=1e-12)


class TestRotationGrid:
    def test_count_and_lex_order(self):
        g = build_rotation_grid(2, math.radians(3.0))
        assert len(g) == 5 ** 3
        assert g.indices.shape == (125, 3)
        # strictly increasing lexicographically
        keys = [tuple(row) for row in g.indices]
        assert keys == sorted(keys)
        assert keys[0] == (-2, -2, -2) and keys[-1] == (2, 2, 2)

    def test_matrices_match_euler_construction(self):
        step = math.radians(7.0)
        g = build_rotation_grid(2, step)
        for idx, mat in zip(g.indices, g.matrices):
            np.testing.assert_allclose(
                mat, rotation_from_euler(idx * step), atol=1e-13)

    def test_identity_at_zero_index(self):
        g = build_rotation_grid(1, 0.5)
        mid = np.flatnonzero(np.all(g.indices == 0, axis=1))[0]
        np.testing.assert_allclose(g.matrices[mid], np.eye(3), atol=1e-15)

    def test_half_width_zero(self):
        g = build_rotation_grid(0, 0.1)
        assert len(g) == 1
        np.testing.assert_allclose(g.matrices[0], np.eye(3))

    def test_rejects_wrapping_grid(self):
        with pytest.raises(InvalidInputError):
            build_rotation_grid(10, 0.5)  # 5 rad > pi

    def test_rejects_bad_step(self):
        with pytest.raises(InvalidInputError):
            build_rotation_grid(2, 0.0)
        with pytest.raises(InvalidInputError):
            build_rotation_grid(-1, 0.1)

    def test_all_matrices_orthonormal(self):
        g = build_rotation_grid(3, 0.4)
        prod = np.einsum("nij,nik->njk", g.matrices, g.matrices)
        np.testing.assert_allclose(prod, np.broadcast_to(np.eye(3), prod.shape),
                                   atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(g.matrices), 1.0, atol=1e-12)


class TestRigidTransform:
    def test_apply_matches_manual(self):
        rng = np.random.default_rng(21)
        r = random_rotation(rng)
        t = rng.uniform(-1, 1, 3)
        tf = RigidTransform(r, t)
        pts = rng.uniform(-1, 1, (20, 3))
        np.testing.assert_allclose(tf.apply(pts), pts @ r.T + t, atol=1e-15)

    def test_identity(self):
        pts = np.random.default_rng(0).uniform(-1, 1, (5, 3))
        assert np.array_equal(RigidTransform.identity().apply(pts), pts)

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(22)
        tf = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        pts = rng.uniform(-1, 1, (15, 3))
        np.testing.assert_allclose(tf.inverse().apply(tf.apply(pts)), pts,
                                   atol=1e-12)

    def test_compose_matches_sequential(self):
        rng = np.random.default_rng(23)
        a = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        b = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        pts = rng.uniform(-1, 1, (10, 3))
        np.testing.assert_allclose(
            compose(a, b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)

    def test_rejects_non_rotation(self):
        with pytest.raises(InvalidInputError):
            RigidTransform(np.eye(3) * 2.0, np.zeros(3))
        refl = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvalidInputError):
            RigidTransform(refl, np.zeros(3))

    def test_arrays_are_read_only(self):
        tf = RigidTransform.identity()
        with pytest.raises(ValueError):
            tf.rotation[0, 0] = 5.0
        with pytest.raises(ValueError):
            tf.translation[0] = 5.0

    def test_equality(self):
        a = RigidTransform.identity()
        b = RigidTransform(np.eye(3), np.zeros(3))
        c = RigidTransform(np.eye(3), np.array([0.0, 0.0, 1.0]))
        assert a == b and a != c

    def test_from_euler_and_euler_roundtrip(self):
        tf = RigidTransform.from_euler((0.1, 0.2, 0.3), (1, 2, 3))
        e = tf.euler()
        np.testing.assert_allclose(e.as_array(), [0.1, 0.2, 0.3], atol=1e-12)
        np.testing.assert_allclose(tf.translation, [1, 2, 3])

    def test_grid_coords_stored_as_int_tuple(self):
        tf = RigidTransform(np.eye(3), np.zeros(3), grid_coords=np.array([1, -2, 0]))
        assert tf.grid_coords == (1, -2, 0)

    @given(angles_st, st.tuples(*[st.floats(-2, 2)] * 3))
    @settings(max_examples=100, deadline=None)
    def test_inverse_property(self, angles, t):
        tf = RigidTransform.from_euler(angles, t)
        back = tf.inverse()
        np.testing.assert_allclose(
            compose(back, tf).rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(compose(back, tf).translation, 0, atol=1e-12)


class TestHelpers:
    def test_wrap_angle_values(self):
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(math.pi) == pytest.approx(-math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(-math.pi)
        assert wrap_angle(2 * math.pi) == pytest.approx(0.0, abs=1e-12)
        assert wrap_angle(math.radians(350)) == pytest.approx(math.radians(-10))
        np.testing.assert_allclose(wrap_angle([0.1, -0.1]), [0.1, -0.1])

    def test_as_point_cloud_validation(self):
        with pytest.raises(InvalidInputError):
            as_point_cloud(np.zeros((0, 3)))
        with pytest.raises(InvalidInputError):
            as_point_cloud(np.zeros((4, 2)))
        with pytest.raises(InvalidInputError):
            as_point_cloud([[0.0, 0.0, np.inf]])
        out = as_point_cloud([[1, 2, 3]])
        assert out.dtype == np.float64 and out.flags.c_contiguous

    def test_min_chebyshev_separation_matches_brute(self):
        rng = np.random.default_rng(31)
        pts = rng.uniform(-1, 1, (12, 3))
        assert min_chebyshev_separation(pts) == pytest.approx(
            brute_min_chebyshev(pts.tolist()), abs=1e-15)

    def test_min_chebyshev_single_point(self):
        assert min_chebyshev_separation([[0.0, 0.0, 0.0]]) == math.inf

    def test_random_rotation_is_rotation(self):
        rng = np.random.default_rng(32)
        for _ in range(20):
            r = random_rotation(rng)
            np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_apply_transform_preserves_order(self):
        rng = np.random.default_rng(33)
        tf = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        pts = rng.uniform(-1, 1, (6, 3))
        out = apply_transform(tf, pts)
        for i in range(6):
            np.testing.assert_allclose(out[i], tf.rotation @ pts[i] + tf.translation,
                                       atol=1e-14)
