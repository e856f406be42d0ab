"""The 17-DOF dual-probe rig: assembly, clearance, coordinated IK, sweeps.

Both arm bases ride a single gantry carriage (J0, prismatic along the
bed axis), so the rig's joint vector is ``[q0, left J1..J8, right
J1..J8]``. Arm-vs-arm clearance uses one capsule per link; the patient
surface is deliberately not an obstacle (the probes are supposed to
touch it).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .chain import (JointSpec, KinematicChain, _parse_joint, _parse_transform,
                    bundled_config_path, chain_from_config, check_limits,
                    fk_jacobian_raw, home as chain_home, load_chain)
from .errors import (ClearanceInfeasible, InvalidConfig, LimitViolation,
                     NotConverged, ParseError, PlanFailed, UnknownPreset)
from .surface import SweepPath, pose_from_contact
from .transforms import Pose, RigidTransform, rotvec_from_matrix

RIG_PRESETS = ("ifind-v3",)


@dataclass(frozen=True)
class Capsule:
    """Sphere-swept segment attached to a link frame (local endpoints)."""

    frame_index: int
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float))
        if self.radius <= 0.0:
            raise InvalidConfig("capsule radius must be > 0")


@dataclass(frozen=True)
class CapsuleSet:
    capsules: tuple[Capsule, ...]

    def __post_init__(self):
        object.__setattr__(self, "capsules", tuple(self.capsules))

    def __len__(self):
        return len(self.capsules)


def build_capsules(chain: KinematicChain, arm_radius: float = 0.04,
                   wrist_radius: float = 0.03,
                   probe_radius: float = 0.025) -> CapsuleSet:
    """One capsule per link: joint origin to the next joint/tool origin.

    Link frames 0..2 (base rotation and the two parallel-link bars) get
    the arm radius, the wrist links the wrist radius, and the final
    (probe) segment its own slimmer envelope. Every capsule must
    reference an existing frame.
    """
    caps = []
    n = len(chain)
    for i in range(n):
        if i + 1 < n:
            nxt = chain.joints[i + 1].fixed_pre_transform.translation
            radius = arm_radius if i < 3 else wrist_radius
        else:
            nxt = chain.tool_transform.translation
            radius = probe_radius
        caps.append(Capsule(i, np.zeros(3), nxt, radius))
    return CapsuleSet(tuple(caps))


@dataclass(frozen=True)
class DualArmRig:
    """Gantry + two arms; total DOF must come to 17."""

    gantry: JointSpec
    arm_left: KinematicChain
    arm_right: KinematicChain
    base_offsets: tuple[RigidTransform, RigidTransform]
    capsules_left: CapsuleSet
    capsules_right: CapsuleSet
    name: str = "ifind-v3"
    clearance_margin_default: float = 0.02

    def __post_init__(self):
        total = 1 + len(self.arm_left) + len(self.arm_right)
        if total != 17:
            raise InvalidConfig(f"rig must total 17 DOF, got {total}")

    def __len__(self) -> int:
        return 17

    def joint_ids(self) -> tuple[str, ...]:
        return ((self.gantry.id,)
                + tuple(f"left.{j}" for j in self.arm_left.joint_ids())
                + tuple(f"right.{j}" for j in self.arm_right.joint_ids()))

    def split(self, q17: np.ndarray):
        q17 = np.asarray(q17, dtype=float)
        nl = len(self.arm_left)
        return float(q17[0]), q17[1:1 + nl], q17[1 + nl:]

    def home(self) -> np.ndarray:
        return np.concatenate([[self.gantry.home], chain_home(self.arm_left),
                               chain_home(self.arm_right)])

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = [self.gantry.limits[0]]
        hi = [self.gantry.limits[1]]
        for arm in (self.arm_left, self.arm_right):
            lo.extend(j.limits[0] for j in arm.joints)
            hi.extend(j.limits[1] for j in arm.joints)
        return np.array(lo), np.array(hi)


def check_rig_limits(rig: DualArmRig, q17: np.ndarray) -> np.ndarray:
    q17 = np.asarray(q17, dtype=float)
    if q17.shape != (17,):
        raise LimitViolation("rig joint vector must have 17 entries")
    q0, ql, qr = rig.split(q17)
    lo, hi = rig.gantry.limits
    if q0 < lo - 1e-9 or q0 > hi + 1e-9:
        raise LimitViolation(f"gantry value {q0:.4f} outside [{lo}, {hi}]")
    check_limits(rig.arm_left, ql)
    check_limits(rig.arm_right, qr)
    return q17


def assemble_rig(config) -> DualArmRig:
    """Build the rig from a preset name, config path, or parsed mapping."""
    if isinstance(config, dict):
        node = config
    else:
        text = str(config)
        if text in RIG_PRESETS:
            path = bundled_config_path("rigs", f"{text}.yaml")
        else:
            path = Path(text)
            if not path.exists():
                raise UnknownPreset(
                    f"unknown rig preset {text!r}; bundled: {RIG_PRESETS}")
        try:
            node = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"cannot parse rig config: {exc}") from exc
    try:
        gantry = _parse_joint(node["gantry"])
        arm_node = node["arm"]
        if isinstance(arm_node, str):
            arm = load_chain(arm_node)
        else:
            arm = chain_from_config(arm_node)
        offsets = (_parse_transform(node["base_offsets"]["left"]),
                   _parse_transform(node["base_offsets"]["right"]))
        radii = node.get("capsule_radii", {})
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(f"malformed rig config: {exc}") from exc
    if gantry.kind != "prismatic":
        raise InvalidConfig("gantry joint must be prismatic")
    caps = build_capsules(arm, float(radii.get("arm", 0.04)),
                          float(radii.get("wrist", 0.03)),
                          float(radii.get("probe", 0.025)))
    return DualArmRig(
        gantry=gantry, arm_left=arm, arm_right=arm,
        base_offsets=offsets, capsules_left=caps, capsules_right=caps,
        name=str(node.get("name", "ifind-v3")),
        clearance_margin_default=float(node.get("clearance_margin", 0.02)))


def carriage_transform(rig: DualArmRig, q0: float) -> RigidTransform:
    pre = rig.gantry.fixed_pre_transform
    return pre @ RigidTransform(np.eye(3), rig.gantry.axis * q0)


def _arm_base(rig: DualArmRig, q0: float, side: int) -> RigidTransform:
    return carriage_transform(rig, q0) @ rig.base_offsets[side]


def _arm_fk(rig: DualArmRig, q17, side: int):
    """(rotation, position) of one arm's tip plus its raw frames."""
    q0, ql, qr = rig.split(q17)
    base = _arm_base(rig, q0, side)
    arm = rig.arm_left if side == 0 else rig.arm_right
    r, t, _ = fk_jacobian_raw(arm, ql if side == 0 else qr)
    return base.rotation @ r, base.rotation @ t + base.translation


def rig_tip_poses(rig: DualArmRig, q17) -> tuple[Pose, Pose]:
    q17 = check_rig_limits(rig, q17)
    poses = []
    for side in range(2):
        r, t = _arm_fk(rig, q17, side)
        poses.append(RigidTransform(r, t).to_pose())
    return poses[0], poses[1]


def _raw_frames(chain: KinematicChain, q: np.ndarray,
                base_r: np.ndarray, base_t: np.ndarray):
    """World (rotation, origin) per joint frame, array-only hot path."""
    from .chain import _compiled, _fast_rotation
    cc = _compiled(chain)
    r = base_r.copy()
    t = base_t.copy()
    rs = np.empty((cc.n, 3, 3))
    ts = np.empty((cc.n, 3))
    for i in range(cc.n):
        t = r @ cc.pre_t[i] + t
        r = r @ cc.pre_r[i]
        d = cc.comp_driver[i]
        if d >= 0:
            r = r @ _fast_rotation(cc.axes[d], -q[d])
        if cc.revolute[i]:
            r = r @ _fast_rotation(cc.axes[i], q[i])
        else:
            t = t + (r @ cc.axes[i]) * q[i]
        rs[i] = r
        ts[i] = t
    return rs, ts


def _world_segments(rig: DualArmRig, q17: np.ndarray):
    """Capsule endpoints in world coordinates for both arms.

    Returns (left, right) arrays of shape (k, 2, 3) plus radii arrays.
    """
    q0, ql, qr = rig.split(q17)
    out = []
    radii_out = []
    for side, (arm, caps, q) in enumerate(
            ((rig.arm_left, rig.capsules_left, ql),
             (rig.arm_right, rig.capsules_right, qr))):
        base = _arm_base(rig, q0, side)
        rs, ts = _raw_frames(arm, q, base.rotation, base.translation)
        segs = np.empty((len(caps), 2, 3))
        radii = np.empty(len(caps))
        for k, cap in enumerate(caps.capsules):
            fi = cap.frame_index
            segs[k, 0] = rs[fi] @ cap.p0 + ts[fi]
            segs[k, 1] = rs[fi] @ cap.p1 + ts[fi]
            radii[k] = cap.radius
        out.append(segs)
        radii_out.append(radii)
    return out[0], out[1], radii_out[0], radii_out[1]


def pairwise_segment_distances(segs_a: np.ndarray,
                               segs_b: np.ndarray) -> np.ndarray:
    """Exact segment-segment distances for every (a, b) pair, vectorized.

    Clamped closest-point solution on the two segment parameters, with
    degenerate (point-like) segments handled by the same guards as the
    scalar routine.
    """
    p1 = segs_a[:, 0][:, None, :]          # (n, 1, 3)
    d1 = (segs_a[:, 1] - segs_a[:, 0])[:, None, :]
    p2 = segs_b[:, 0][None, :, :]          # (1, m, 3)
    d2 = (segs_b[:, 1] - segs_b[:, 0])[None, :, :]
    r = p1 - p2
    a = np.einsum("ijk,ijk->ij", d1, d1)
    e = np.einsum("ijk,ijk->ij", d2, d2)
    b = np.einsum("ijk,ijk->ij", d1, d2)
    c = np.einsum("ijk,ijk->ij", d1, r)
    f = np.einsum("ijk,ijk->ij", d2, r)
    tiny = 1e-30
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > tiny, np.clip((b * f - c * e) / denom, 0.0, 1.0),
                     0.0)
        t = np.where(e > tiny, (b * s + f) / e, 0.0)
        t_cl = np.clip(t, 0.0, 1.0)
        s = np.where((t != t_cl) & (a > tiny),
                     np.clip((b * t_cl - c) / a, 0.0, 1.0), s)
        s = np.where(a <= tiny, 0.0, s)
    w = r + s[..., None] * d1 - t_cl[..., None] * d2
    return np.sqrt(np.einsum("ijk,ijk->ij", w, w))


def segment_segment_distance(p1, q1, p2, q2):
    """Exact closest distance between two segments plus witness points."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 1e-30 and e <= 1e-30:
        return float(np.linalg.norm(r)), p1.copy(), p2.copy()
    if a <= 1e-30:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= 1e-30:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-30 \
                else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    w1 = p1 + s * d1
    w2 = p2 + t * d2
    return float(np.linalg.norm(w1 - w2)), w1, w2


@dataclass(frozen=True)
class SeparationReport:
    """Clearance between the two arms (negative = capsule penetration)."""

    min_distance: float
    witness_pair: tuple[int, int]
    pair_distances: np.ndarray = field(repr=False)
    witness_points: tuple[np.ndarray, np.ndarray] = field(repr=False,
                                                          default=None)


def min_separation(rig: DualArmRig, q17) -> SeparationReport:
    """Exact capsule-capsule clearance over every left x right link pair."""
    q17 = check_rig_limits(rig, q17)
    segs_l, segs_r, rad_l, rad_r = _world_segments(rig, q17)
    dists = (pairwise_segment_distances(segs_l, segs_r)
             - rad_l[:, None] - rad_r[None, :])
    flat = int(np.argmin(dists))
    i, j = divmod(flat, dists.shape[1])
    _, w1, w2 = segment_segment_distance(
        segs_l[i, 0], segs_l[i, 1], segs_r[j, 0], segs_r[j, 1])
    return SeparationReport(float(dists[i, j]), (i, j), dists, (w1, w2))


@dataclass(frozen=True)
class DualIKOptions:
    clearance_margin: float = 0.02
    max_iterations: int = 300
    damping: float = 0.05
    position_tolerance: float = 1e-6
    orientation_tolerance: float = 1e-6
    step_norm_cap: float = 0.3
    error_clamp_position: float = 0.25
    error_clamp_orientation: float = 1.0
    repulsion_gain: float = 4.0
    # Repulsion activates below margin + buffer so solutions land strictly
    # clear of the margin rather than grazing it.
    activation_buffer: float = 0.01


def _stacked_task(rig: DualArmRig, q17, target_l: Pose, target_r: Pose):
    """12-d task error and 12x17 stacked Jacobian for both tips."""
    q0, ql, qr = rig.split(q17)
    nl = len(rig.arm_left)
    err = np.empty(12)
    jac = np.zeros((12, 17))
    res = []
    for side, (arm, q, target) in enumerate(
            ((rig.arm_left, ql, target_l), (rig.arm_right, qr, target_r))):
        base = _arm_base(rig, q0, side)
        r_arm, t_arm, j_arm = fk_jacobian_raw(arm, q)
        r_w = base.rotation @ r_arm
        t_w = base.rotation @ t_arm + base.translation
        e_pos = target.position - t_w
        e_rot = rotvec_from_matrix(target.rotation_matrix() @ r_w.T)
        rows = slice(6 * side, 6 * side + 6)
        err[rows] = np.concatenate([e_pos, e_rot])
        # Arm columns, rotated into world by the (orientation-only) base.
        cols = slice(1 + nl * side, 1 + nl * side + len(arm))
        jac[rows.start:rows.start + 3, cols] = base.rotation @ j_arm[:3]
        jac[rows.start + 3:rows.start + 6, cols] = base.rotation @ j_arm[3:]
        # Gantry column: both tips translate along the gantry axis.
        jac[rows.start:rows.start + 3, 0] = rig.gantry.axis
        res.append((float(np.linalg.norm(e_pos)),
                    float(np.linalg.norm(e_rot))))
    return err, jac, res


def _clearance_gradient(rig: DualArmRig, q17: np.ndarray, report,
                        eps: float = 1e-6) -> np.ndarray:
    """d(min clearance)/dq via central differences on the witness pair.

    Only arm joints matter (the gantry moves both arms rigidly, so its
    entry is exactly zero by construction).
    """
    grad = np.zeros(17)
    i, j = report.witness_pair
    for k in range(1, 17):
        qp = q17.copy()
        qp[k] += eps
        qm = q17.copy()
        qm[k] -= eps
        dp = _pair_clearance(rig, qp, i, j)
        dm = _pair_clearance(rig, qm, i, j)
        grad[k] = (dp - dm) / (2.0 * eps)
    return grad


def _pair_clearance(rig: DualArmRig, q17, i: int, j: int) -> float:
    segs_l, segs_r, rad_l, rad_r = _world_segments(rig, q17)
    d, _, _ = segment_segment_distance(
        segs_l[i, 0], segs_l[i, 1], segs_r[j, 0], segs_r[j, 1])
    return d - rad_l[i] - rad_r[j]


def _clamp_rig(rig: DualArmRig, q17: np.ndarray) -> np.ndarray:
    lo, hi = rig.limits()
    q = q17.copy()
    idx = 1
    q[0] = min(max(q[0], lo[0]), hi[0])
    for arm in (rig.arm_left, rig.arm_right):
        for j in arm.joints:
            if j.full_circle:
                q[idx] = math.remainder(q[idx], 2.0 * math.pi)
            else:
                q[idx] = min(max(q[idx], lo[idx]), hi[idx])
            idx += 1
    return q


def solve_dual_ik(rig: DualArmRig, target_left: Pose, target_right: Pose,
                  seed, opts: DualIKOptions | None = None) -> np.ndarray:
    """Coordinated IK: both tips on target with the arms kept apart.

    Stacked damped-least-squares step for the 12-d task, plus a clearance
    repulsion gradient projected into the task nullspace. Raises
    :class:`NotConverged` when the tips cannot reach the targets and
    :class:`ClearanceInfeasible` when they can but the clearance margin
    cannot be met at the same time.
    """
    opts = opts or DualIKOptions()
    q = check_rig_limits(rig, np.asarray(seed, dtype=float)).copy()
    lam2_max = opts.damping ** 2
    lam2_min = (0.02 * opts.damping) ** 2
    eye12 = np.eye(12)
    activation = opts.clearance_margin + opts.activation_buffer
    best = None          # (pos+rot residual, q, res, clearance)
    best_feasible = None
    for _ in range(opts.max_iterations + 1):
        err, jac, res = _stacked_task(rig, q, target_left, target_right)
        report = min_separation(rig, q)
        pos_res = max(res[0][0], res[1][0])
        rot_res = max(res[0][1], res[1][1])
        converged = (pos_res <= opts.position_tolerance
                     and rot_res <= opts.orientation_tolerance)
        key = pos_res + rot_res
        if best is None or key < best[0]:
            best = (key, q.copy(), (pos_res, rot_res), report.min_distance)
        if converged and report.min_distance >= opts.clearance_margin:
            return q
        if converged and (best_feasible is None
                          or report.min_distance > best_feasible[1]):
            best_feasible = (q.copy(), report.min_distance,
                             (pos_res, rot_res))
        e = err.copy()
        for side in range(2):
            p = e[6 * side:6 * side + 3]
            pn = np.linalg.norm(p)
            if pn > opts.error_clamp_position:
                p *= opts.error_clamp_position / pn
            o = e[6 * side + 3:6 * side + 6]
            on = np.linalg.norm(o)
            if on > opts.error_clamp_orientation:
                o *= opts.error_clamp_orientation / on
        lam2 = min(lam2_max, max(lam2_min, float(e @ e)))
        jjt = jac @ jac.T + lam2 * eye12
        dq = jac.T @ np.linalg.solve(jjt, e)
        if report.min_distance < activation:
            grad = _clearance_gradient(rig, q, report)
            push = opts.repulsion_gain * (activation - report.min_distance)
            dq_rep = push * grad
            # Project the repulsion into the task nullspace so it cannot
            # fight the tip targets.
            j_pinv = jac.T @ np.linalg.solve(jjt, jac)
            dq += dq_rep - j_pinv @ dq_rep
        step = float(np.linalg.norm(dq))
        if step > opts.step_norm_cap:
            dq *= opts.step_norm_cap / step
        q = _clamp_rig(rig, q + dq)
    if best_feasible is not None:
        q_bf, clearance, res_bf = best_feasible
        if clearance >= opts.clearance_margin:
            return q_bf
    if best is not None and (best[2][0] <= opts.position_tolerance
                             and best[2][1] <= opts.orientation_tolerance):
        raise ClearanceInfeasible(
            f"targets reached but clearance {best[3]:.4f} m is below the "
            f"{opts.clearance_margin:.4f} m margin",
            best_q=best[1], best_clearance=best[3],
            position_residual=best[2][0], orientation_residual=best[2][1])
    raise NotConverged(
        f"dual IK did not converge: position residual {best[2][0]:.3e} m, "
        f"orientation residual {best[2][1]:.3e} rad",
        best_q=best[1], position_residual=best[2][0],
        orientation_residual=best[2][1])


@dataclass(frozen=True)
class TrajectoryPoint:
    tick: int
    q17: np.ndarray
    min_clearance: float


@dataclass(frozen=True)
class DualSweepOptions:
    margin: float = 0.02
    max_joint_step: float = 0.35
    ik: DualIKOptions | None = None


def plan_dual_sweep(rig: DualArmRig, path_left: SweepPath,
                    path_right: SweepPath, margin: float,
                    opts: DualSweepOptions | None = None
                    ) -> list[TrajectoryPoint]:
    """Plan a synchronized dual-probe sweep, warm-starting each waypoint.

    Both paths must already have equal waypoint counts (resample first).
    Raises :class:`PlanFailed` carrying the partial trajectory and the
    failing waypoint index.
    """
    if len(path_left.waypoints) != len(path_right.waypoints):
        raise ValueError("paths must have equal waypoint counts")
    if margin <= 0.0:
        raise ValueError("margin must be > 0")
    opts = opts or DualSweepOptions(margin=margin)
    ik_opts = opts.ik or DualIKOptions(clearance_margin=margin)
    trajectory: list[TrajectoryPoint] = []
    seed = rig.home()
    for k, (cl, cr) in enumerate(zip(path_left.waypoints,
                                     path_right.waypoints)):
        target_l = pose_from_contact(cl)
        target_r = pose_from_contact(cr)
        try:
            q = solve_dual_ik(rig, target_l, target_r, seed, ik_opts)
        except (NotConverged, ClearanceInfeasible) as exc:
            raise PlanFailed(
                f"dual sweep failed at waypoint {k}: {exc}", k,
                trajectory) from exc
        if trajectory:
            step = np.abs(q - trajectory[-1].q17).max()
            if step > opts.max_joint_step:
                raise PlanFailed(
                    f"dual sweep discontinuity at waypoint {k}: max joint "
                    f"step {step:.3f} rad exceeds {opts.max_joint_step}",
                    k, trajectory)
        clearance = min_separation(rig, q).min_distance
        trajectory.append(TrajectoryPoint(k, q, clearance))
        seed = q
    return trajectory


def save_trajectory(trajectory, path) -> None:
    """One JSON record per waypoint: tick, 17 joint values, clearance."""
    with open(path, "w") as fh:
        for pt in trajectory:
            fh.write(json.dumps(
                {"tick": pt.tick, "q": [float(v) for v in pt.q17],
                 "min_clearance": float(pt.min_clearance)},
                sort_keys=True, separators=(",", ":")) + "\n")


def load_trajectory(path) -> list[TrajectoryPoint]:
    points = []
    try:
        for line in open(path):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            points.append(TrajectoryPoint(int(rec["tick"]),
                                          np.array(rec["q"], dtype=float),
                                          float(rec["min_clearance"])))
    except (OSError, ValueError, KeyError) as exc:
        raise ParseError(f"cannot load trajectory {path}: {exc}") from exc
    return points
