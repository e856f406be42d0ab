import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ifind_sim.transforms import (Pose, RigidTransform, matrix_from_quat,
                                  quat_angle, quat_from_matrix, quat_multiply,
                                  quat_slerp, rotation_about_axis,
                                  rotvec_from_matrix, rpy_matrix)

from oracles import quat_from_matrix_oracle

unit_angles = st.floats(-math.pi, math.pi, allow_nan=False)


def random_rotation(seed):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return rotation_about_axis(axis, rng.uniform(-math.pi, math.pi))


def test_rotation_about_z_matches_rpy():
    assert np.allclose(rotation_about_axis(np.array([0.0, 0.0, 1.0]), 0.3),
                       rpy_matrix(0.0, 0.0, 0.3))


@pytest.mark.parametrize("seed", range(25))
def test_quat_matrix_round_trip(seed):
    r = random_rotation(seed)
    q = quat_from_matrix(r)
    assert np.allclose(matrix_from_quat(q), r, atol=1e-12)
    assert np.allclose(q, quat_from_matrix_oracle(r), atol=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_rotvec_log_exp_round_trip(seed):
    r = random_rotation(seed)
    v = rotvec_from_matrix(r)
    angle = np.linalg.norm(v)
    if angle > 1e-12:
        r2 = rotation_about_axis(v / angle, angle)
        assert np.allclose(r2, r, atol=1e-9)


def test_rotvec_near_pi():
    r = rotation_about_axis(np.array([0.0, 1.0, 0.0]), math.pi - 1e-9)
    v = rotvec_from_matrix(r)
    assert np.linalg.norm(v) == pytest.approx(math.pi - 1e-9, abs=1e-6)
    assert abs(v[1]) == pytest.approx(np.linalg.norm(v), abs=1e-9)


def test_rotvec_identity_is_zero():
    assert np.allclose(rotvec_from_matrix(np.eye(3)), np.zeros(3))


@given(unit_angles, unit_angles)
def test_quat_multiply_matches_matrix_product(a, b):
    za = np.array([0.0, 0.0, 1.0])
    xb = np.array([1.0, 0.0, 0.0])
    qa = quat_from_matrix(rotation_about_axis(za, a))
    qb = quat_from_matrix(rotation_about_axis(xb, b))
    lhs = matrix_from_quat(quat_multiply(qa, qb))
    rhs = rotation_about_axis(za, a) @ rotation_about_axis(xb, b)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_quat_angle_of_known_rotation():
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    q1 = quat_from_matrix(rotation_about_axis(np.array([0.0, 0.0, 1.0]),
                                              0.7))
    assert quat_angle(q0, q1) == pytest.approx(0.7, abs=1e-12)


def test_quat_slerp_endpoints_and_midpoint():
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    q1 = quat_from_matrix(rotation_about_axis(np.array([0.0, 1.0, 0.0]),
                                              1.0))
    assert np.allclose(quat_slerp(q0, q1, 0.0), q0)
    assert np.allclose(quat_slerp(q0, q1, 1.0), q1)
    mid = quat_slerp(q0, q1, 0.5)
    assert quat_angle(q0, mid) == pytest.approx(0.5, abs=1e-9)


def test_rigid_transform_compose_and_inverse():
    a = RigidTransform.from_rpy((0.1, -0.2, 0.3), (0.5, -1.0, 2.0))
    b = RigidTransform.from_rpy((-0.7, 0.4, 0.0), (0.0, 0.1, -0.3))
    p = np.array([0.3, 0.4, 0.5])
    assert np.allclose((a @ b).apply(p), a.apply(b.apply(p)), atol=1e-12)
    assert np.allclose((a @ a.inverse()).apply(p), p, atol=1e-12)


def test_pose_validates_quaternion_norm():
    with pytest.raises(ValueError):
        Pose(np.zeros(3), np.array([1.0, 0.1, 0.0, 0.0]))
    pose = Pose(np.zeros(3), np.array([0.0, 0.0, 1.0, 0.0]))
    assert np.allclose(pose.z_axis(), [0.0, 0.0, -1.0])
