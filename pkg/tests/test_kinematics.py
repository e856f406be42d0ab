import math

import numpy as np
import pytest

import ifind_sim as ifs
from ifind_sim.chain import (_compiled, _fk_jac_python, fk_jacobian_raw,
                             home, wrap_angles)
from ifind_sim.ik import IKOptions
from ifind_sim.transforms import quat_angle

from conftest import PRESETS, preset_config_path, random_joint_vectors
from oracles import chain_matrices_from_yaml, fk_oracle, \
    quat_from_matrix_oracle

# Frozen from the independent 4x4-chain oracle (tests/oracles.py) before
# the library FK existed.
V2_SAMPLE_Q = np.array([0.3, 0.5, -0.4, 1.0, 0.6, 0.1, -0.2, 0.8])
V2_SAMPLE_POS = np.array(
    [0.13460656203543636, 0.15193020157141462, 0.2322702107335159])
V2_SAMPLE_QUAT = np.array(
    [0.20364157611360703, 0.8393859395760194, -0.5039258044865383,
     0.004487370348468449])


class TestPresets:
    def test_v2_has_eight_joints(self, chains):
        chain = chains["ifind-v2"]
        assert len(chain) == 8
        assert chain.joint_ids() == tuple(f"J{i}" for i in range(1, 9))

    def test_v1_has_seven_joints_three_orthogonal_prismatic(self, chains):
        chain = chains["ifind-v1"]
        assert len(chain) == 7
        first = chain.joints[:3]
        assert all(j.kind == "prismatic" for j in first)
        for a in range(3):
            for b in range(a + 1, 3):
                assert abs(first[a].axis @ first[b].axis) < 1e-12

    def test_v2_wrist_segments_sum_to_quarter_meter(self, chains):
        chain = chains["ifind-v2"]
        lengths = [np.linalg.norm(j.fixed_pre_transform.translation)
                   for j in chain.joints[4:]]
        lengths.append(np.linalg.norm(chain.tool_transform.translation))
        assert sum(lengths) == pytest.approx(0.25, abs=1e-12)

    def test_v2_wrist_roll_full_circle(self, chains):
        j4 = chains["ifind-v2"].joints[3]
        assert j4.id == "J4"
        assert j4.full_circle

    def test_limit_inversion_rejected(self):
        config = {
            "name": "custom",
            "joints": [{"id": "J1", "kind": "revolute",
                        "axis": [0, 0, 1], "limits": [0.5, -0.5]}],
        }
        with pytest.raises(ifs.InvalidConfig):
            ifs.load_chain(config)

    def test_non_unit_axis_rejected(self):
        config = {
            "name": "custom",
            "joints": [{"id": "J1", "kind": "revolute",
                        "axis": [0, 0, 2], "limits": [-1, 1]}],
        }
        with pytest.raises(ifs.InvalidConfig):
            ifs.load_chain(config)

    def test_wrong_joint_count_for_named_preset_rejected(self):
        config = {
            "name": "ifind-v2",
            "joints": [{"id": "J1", "kind": "revolute",
                        "axis": [0, 0, 1], "limits": [-1, 1]}],
        }
        with pytest.raises(ifs.InvalidConfig):
            ifs.load_chain(config)

    def test_unknown_preset(self):
        with pytest.raises(ifs.UnknownPreset):
            ifs.load_chain("ifind-v99")


class TestForwardKinematics:
    @pytest.mark.parametrize("preset", PRESETS)
    def test_home_equals_fixed_transform_product(self, chains, preset):
        chain = chains[preset]
        pose = ifs.forward_kinematics(chain, home(chain))
        pos, rot = fk_oracle(preset_config_path(preset), home(chain))
        assert np.allclose(pose.position, pos, atol=1e-12)
        assert np.allclose(pose.orientation, quat_from_matrix_oracle(rot),
                           atol=1e-12)

    def test_base_rotation_symmetry(self, v2):
        # J1 = pi spins the tip half a turn about the base vertical axis
        # (the line through J1's origin).
        base = v2.joints[0].fixed_pre_transform.translation
        q = home(v2)
        tip0 = ifs.forward_kinematics(v2, q).position
        q[0] = math.pi
        tip = ifs.forward_kinematics(v2, q).position
        rot = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
        expected = base + rot @ (tip0 - base)
        assert np.allclose(tip, expected, atol=1e-9)

    def test_v2_sample_matches_frozen_oracle_pose(self, v2):
        pose = ifs.forward_kinematics(v2, V2_SAMPLE_Q)
        assert np.allclose(pose.position, V2_SAMPLE_POS, atol=1e-12)
        assert np.allclose(pose.orientation, V2_SAMPLE_QUAT, atol=1e-12)

    @pytest.mark.parametrize("preset", PRESETS)
    def test_random_configurations_match_oracle(self, chains, preset):
        chain = chains[preset]
        for q in random_joint_vectors(chain, 20, seed=7):
            pose = ifs.forward_kinematics(chain, q)
            pos, rot = fk_oracle(preset_config_path(preset), q)
            assert np.allclose(pose.position, pos, atol=1e-12)
            assert np.allclose(pose.rotation_matrix(), rot, atol=1e-12)

    def test_out_of_limit_raises(self, v2):
        q = home(v2)
        q[1] = 1.5  # J2 limit is 0.9
        with pytest.raises(ifs.LimitViolation):
            ifs.forward_kinematics(v2, q)

    def test_full_circle_joint_accepts_any_angle_in_pi_range(self, v2):
        q = home(v2)
        for value in (-math.pi, -1.0, 2.2, math.pi):
            q[3] = value
            ifs.forward_kinematics(v2, q)  # no LimitViolation

    def test_wrap_angles_only_touches_full_circle_joints(self, v2):
        q = home(v2)
        q[3] = 3 * math.pi / 2
        q[4] = 0.5
        wrapped = wrap_angles(v2, q)
        assert wrapped[3] == pytest.approx(-math.pi / 2)
        assert wrapped[4] == 0.5

    def test_determinism_bit_identical(self, v2):
        a = ifs.forward_kinematics(v2, V2_SAMPLE_Q)
        b = ifs.forward_kinematics(v2, V2_SAMPLE_Q)
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.orientation, b.orientation)


class TestLinkFrames:
    @pytest.mark.parametrize("preset", PRESETS)
    def test_length_is_joint_count_plus_one(self, chains, preset):
        chain = chains[preset]
        frames = ifs.link_frames(chain, home(chain))
        assert len(frames) == len(chain) + 1

    def test_last_frame_equals_fk(self, v2):
        frames = ifs.link_frames(v2, V2_SAMPLE_Q)
        pose = ifs.forward_kinematics(v2, V2_SAMPLE_Q)
        assert np.allclose(frames[-1].position, pose.position, atol=1e-15)
        assert np.allclose(frames[-1].orientation, pose.orientation,
                           atol=1e-15)

    def test_frames_match_oracle_prefix_products(self, v2):
        mats = chain_matrices_from_yaml(preset_config_path("ifind-v2"),
                                        V2_SAMPLE_Q)
        frames = ifs.link_frames(v2, V2_SAMPLE_Q)
        for mat, frame in zip(mats, frames):
            assert np.allclose(frame.position, mat[:3, 3], atol=1e-9)
            assert np.allclose(frame.rotation_matrix(), mat[:3, :3],
                               atol=1e-9)


class TestParallelogram:
    def test_wrist_mount_orientation_independent_of_arm_joints(self, v2):
        reference = None
        for q2, q3 in [(0.0, 0.0), (0.5, -0.3), (-0.7, 1.1), (0.9, 1.4),
                       (-0.9, -1.4)]:
            q = home(v2)
            q[1], q[2] = q2, q3
            mount = ifs.link_frames(v2, q)[3]  # frame after J4
            if reference is None:
                reference = mount.orientation
            else:
                assert quat_angle(reference, mount.orientation) < 1e-9

    def test_arm_joints_still_move_the_mount_position(self, v2):
        q = home(v2)
        p0 = ifs.link_frames(v2, q)[3].position
        q[1] = 0.5
        p1 = ifs.link_frames(v2, q)[3].position
        assert np.linalg.norm(p1 - p0) > 0.05


class TestJacobian:
    def test_prismatic_columns_have_zero_angular_part(self, chains):
        chain = chains["ifind-v1"]
        jac = ifs.jacobian(chain, home(chain))
        for i, joint in enumerate(chain.joints):
            if joint.kind == "prismatic":
                assert np.allclose(jac[3:, i], 0.0)

    def test_revolute_axis_through_tip_gives_zero_linear_column(self, v2):
        # At home, J8's axis passes through the tool tip (the tool offset
        # is along that axis), so its linear column vanishes.
        jac = ifs.jacobian(v2, home(v2))
        assert np.allclose(jac[:3, 7], 0.0, atol=1e-12)

    @pytest.mark.parametrize("preset", PRESETS)
    def test_matches_central_finite_differences(self, chains, preset):
        chain = chains[preset]
        path = preset_config_path(preset)
        eps = 1e-6
        for q in random_joint_vectors(chain, 25, seed=11):
            jac = ifs.jacobian(chain, q)
            scale = max(1.0, np.abs(jac).max())
            for i in range(len(chain)):
                qp = q.copy()
                qp[i] += eps
                qm = q.copy()
                qm[i] -= eps
                pp, rp = fk_oracle(path, qp)
                pm, rm = fk_oracle(path, qm)
                lin = (pp - pm) / (2 * eps)
                _, r0 = fk_oracle(path, q)
                w = (rp - rm) @ r0.T / (2 * eps)
                ang = np.array([w[2, 1], w[0, 2], w[1, 0]])
                col = np.concatenate([lin, ang])
                assert np.abs(jac[:, i] - col).max() / scale < 1e-5


class TestRawKernel:
    def test_kernel_and_numpy_paths_bit_identical(self, v2):
        cc = _compiled(v2)
        for q in random_joint_vectors(v2, 10, seed=3):
            r1, t1, j1 = fk_jacobian_raw(v2, q)
            r2, t2, j2 = _fk_jac_python(cc, q)
            assert np.array_equal(r1, r2)
            assert np.array_equal(t1, t2)
            assert np.array_equal(j1, j2)


class TestInverseKinematics:
    def test_fixed_point_returns_seed(self, v2):
        q0 = V2_SAMPLE_Q
        target = ifs.forward_kinematics(v2, q0)
        assert np.allclose(ifs.solve_ik(v2, target, q0), q0, atol=1e-12)

    def test_perturbed_home_round_trip(self, v2):
        q = home(v2)
        q[[1, 2, 4]] = [0.2, -0.1, 0.3]
        target = ifs.forward_kinematics(v2, q)
        sol = ifs.solve_ik(v2, target, home(v2))
        reached = ifs.forward_kinematics(v2, sol)
        assert np.linalg.norm(reached.position - target.position) < 1e-6
        assert quat_angle(reached.orientation, target.orientation) < 1e-6

    @pytest.mark.parametrize("preset", PRESETS)
    def test_round_trip_rate_and_limits(self, chains, preset):
        chain = chains[preset]
        seed_q = home(chain)
        lo = np.array([j.limits[0] for j in chain.joints])
        hi = np.array([j.limits[1] for j in chain.joints])
        converged = 0
        n = 100
        for q in random_joint_vectors(chain, n, seed=13):
            target = ifs.forward_kinematics(chain, q)
            try:
                sol = ifs.solve_ik(chain, target, seed_q)
            except ifs.NotConverged:
                continue
            assert (sol >= lo - 1e-9).all() and (sol <= hi + 1e-9).all()
            reached = ifs.forward_kinematics(chain, sol)
            if (np.linalg.norm(reached.position - target.position) < 1e-6
                    and quat_angle(reached.orientation,
                                   target.orientation) < 1e-6):
                converged += 1
        assert converged >= 0.95 * n

    def test_unreachable_target_reports_residual(self, v2):
        target = ifs.Pose(np.array([10.0, 0.0, 0.0]),
                          np.array([0.0, 0.0, 1.0, 0.0]))
        with pytest.raises(ifs.NotConverged) as info:
            ifs.solve_ik(v2, target, home(v2))
        # 10^5-sample workspace bound: the tip never reaches further than
        # the longest chain extension (~1.3 m from base at (-0.6, 0, .3)),
        # so the residual must stay enormous.
        qs = random_joint_vectors(v2, 100_000, seed=17)
        lengths = np.empty(len(qs))
        cc = _compiled(v2)
        for i, q in enumerate(qs):
            _, t, _ = fk_jacobian_raw(v2, q)
            lengths[i] = np.linalg.norm(np.array([10.0, 0.0, 0.0]) - t)
        assert info.value.position_residual >= lengths.min() - 0.05

    def test_deterministic_from_given_seed(self, v2):
        q = random_joint_vectors(v2, 1, seed=23)[0]
        target = ifs.forward_kinematics(v2, q)
        a = ifs.solve_ik(v2, target, home(v2))
        b = ifs.solve_ik(v2, target, home(v2))
        assert np.array_equal(a, b)

    def test_options_respected(self, v2):
        q = home(v2)
        q[1] = 0.4
        target = ifs.forward_kinematics(v2, q)
        with pytest.raises(ifs.NotConverged):
            ifs.solve_ik(v2, target, home(v2),
                         IKOptions(max_iterations=1, restarts=0))


class TestHome:
    @pytest.mark.parametrize("preset,n", [("ifind-v1", 7), ("ifind-v2", 8),
                                          ("ifind-v3-arm", 8)])
    def test_home_vector_length_and_values(self, chains, preset, n):
        chain = chains[preset]
        h = home(chain)
        assert h.shape == (n,)
        assert np.allclose(h, [j.home for j in chain.joints])
