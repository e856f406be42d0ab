"""Discrete-time simulation loop: commands in, telemetry out.

One authoritative :class:`Simulator` owns the state; commands are queued
FIFO and applied at most one per tick; every tick emits one telemetry
frame (and appends it to the session log, so scenario runs are fully
replayable). Faults surface as safety-state transitions, never as
exceptions from :meth:`Simulator.step`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .chain import (KinematicChain, bundled_config_path, fk_jacobian_raw,
                    home as chain_home, load_chain, load_chain_config)
from .dualarm import (DualArmRig, DualIKOptions, assemble_rig, min_separation,
                      rig_tip_poses, solve_dual_ik)
from .errors import (IfindError, NotConverged, ParseError, RejectedInFault,
                     UnknownPreset)
from .ik import IKOptions, solve_ik
from .safety import (ClutchState, ContactForce, SafetyLimits, SafetyState,
                     SafetyStatus, SensorModel, contact_force, sense,
                     supervisor_step, update_clutch)
from .session import (SessionEvent, SessionLog, StandardView, append_event,
                      grade_acquisition, load_views)
from .surface import (ContactPose, SurfaceMesh, SweepPath, _tangent_basis,
                      closest_point, generate_sweep, load_mesh,
                      pose_from_contact, resample_sweep)
from .transforms import Pose, RigidTransform, quat_angle, quat_slerp

MOTION_COMMANDS = ("jog", "move_to", "follow_sweep", "home")
COMMAND_KINDS = MOTION_COMMANDS + ("set_indentation", "estop", "reset",
                                   "grade", "questionnaire")


class SimMode(str, enum.Enum):
    IDLE = "IDLE"
    JOGGING = "JOGGING"
    MOVE_TO = "MOVE_TO"
    FOLLOWING = "FOLLOWING"
    FAULT = "FAULT"


FAULT_STATES = (SafetyState.CLUTCH_TRIPPED, SafetyState.RETRACTED,
                SafetyState.ESTOP)


@dataclass(frozen=True)
class Command:
    kind: str
    params: dict = field(default_factory=dict)
    request_id: str = ""

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise ValueError(f"unknown command kind {self.kind!r}")


@dataclass(frozen=True)
class CommandResponse:
    request_id: str
    ok: bool
    error: str = ""
    detail: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Plants: uniform facade over a single chain and the dual rig


class _SingleArmPlant:
    def __init__(self, chain: KinematicChain, caps_cfg: dict):
        self.chain = chain
        self.joint_ids = list(chain.joint_ids())
        self.n = len(chain)
        rev = float(caps_cfg.get("revolute", 0.8))
        pri = float(caps_cfg.get("prismatic", 0.15))
        self.velocity_caps = np.array(
            [rev if j.kind == "revolute" else pri for j in chain.joints])
        self.thresholds = [j.clutch_threshold for j in chain.joints]
        self.lo = np.array([j.limits[0] for j in chain.joints])
        self.hi = np.array([j.limits[1] for j in chain.joints])

    def home(self):
        return chain_home(self.chain)

    def tips(self, q):
        r, t, _ = fk_jacobian_raw(self.chain, q)
        return [RigidTransform(r, t).to_pose()]

    def frames(self, q):
        from .chain import _chain_frames
        return [[f.translation.tolist() for f in _chain_frames(self.chain, q)]]

    def loads(self, q, world_forces):
        _, _, jac = fk_jacobian_raw(self.chain, q)
        wrench = np.concatenate([world_forces[0], np.zeros(3)])
        return jac.T @ wrench

    def clearance(self, q):
        return None

    def clearance_info(self, q):
        return None, None

    def ik(self, target: Pose, arm: int, seed):
        return solve_ik(self.chain, target, seed, IKOptions())

    def dual_follow_targets(self, *_args):
        raise IfindError("single-arm plant cannot follow dual sweeps")


class _DualArmPlant:
    def __init__(self, rig: DualArmRig, caps_cfg: dict):
        self.rig = rig
        self.joint_ids = list(rig.joint_ids())
        self.n = 17
        rev = float(caps_cfg.get("revolute", 0.8))
        pri = float(caps_cfg.get("prismatic", 0.15))
        caps = [pri if rig.gantry.kind == "prismatic" else rev]
        thresholds = [rig.gantry.clutch_threshold]
        for arm in (rig.arm_left, rig.arm_right):
            caps.extend(rev if j.kind == "revolute" else pri
                        for j in arm.joints)
            thresholds.extend(j.clutch_threshold for j in arm.joints)
        self.velocity_caps = np.array(caps)
        self.thresholds = thresholds
        self.lo, self.hi = rig.limits()

    def home(self):
        return self.rig.home()

    def tips(self, q):
        left, right = rig_tip_poses(self.rig, q)
        return [left, right]

    def frames(self, q):
        from .chain import _chain_frames
        from .dualarm import _arm_base
        q0, ql, qr = self.rig.split(q)
        out = []
        for side, (arm, qa) in enumerate(((self.rig.arm_left, ql),
                                          (self.rig.arm_right, qr))):
            base = _arm_base(self.rig, q0, side)
            out.append([(base @ f).translation.tolist()
                        for f in _chain_frames(arm, qa)])
        return out

    def loads(self, q, world_forces):
        from .dualarm import _arm_base
        q0, ql, qr = self.rig.split(q)
        loads = np.zeros(17)
        total = np.zeros(3)
        nl = len(self.rig.arm_left)
        for side, (arm, qa, f) in enumerate(
                ((self.rig.arm_left, ql, world_forces[0]),
                 (self.rig.arm_right, qr, world_forces[1]))):
            base = _arm_base(self.rig, q0, side)
            _, _, jac = fk_jacobian_raw(arm, qa)
            # Wrench in the arm base frame; the Jacobian lives there.
            f_local = base.rotation.T @ f
            wrench = np.concatenate([f_local, np.zeros(3)])
            loads[1 + nl * side:1 + nl * side + len(arm)] = jac.T @ wrench
            total += f
        loads[0] = float(self.rig.gantry.axis @ total)
        return loads

    def clearance(self, q):
        return float(min_separation(self.rig, q).min_distance)

    def clearance_info(self, q):
        report = min_separation(self.rig, q)
        return (float(report.min_distance),
                [int(report.witness_pair[0]), int(report.witness_pair[1])])

    def ik(self, target: Pose, arm: int, seed):
        """Move one arm's tip; the other arm and the gantry hold still."""
        from .dualarm import _arm_base
        q0, ql, qr = self.rig.split(seed)
        side = 0 if arm == 0 else 1
        chain = self.rig.arm_left if side == 0 else self.rig.arm_right
        base = _arm_base(self.rig, q0, side)
        inv = base.inverse()
        local = Pose(inv.apply(target.position),
                     (inv @ target.to_transform()).to_pose().orientation)
        q_arm = solve_ik(chain, local, ql if side == 0 else qr, IKOptions())
        out = np.asarray(seed, dtype=float).copy()
        nl = len(self.rig.arm_left)
        out[1 + nl * side:1 + nl * side + len(chain)] = q_arm
        return out

    def dual_ik(self, target_left, target_right, seed, margin):
        return solve_dual_ik(self.rig, target_left, target_right, seed,
                             DualIKOptions(clearance_margin=margin))


# ---------------------------------------------------------------------------


@dataclass
class SweepDefinition:
    """Scenario sweep: single path or dual lanes."""

    path: SweepPath | None = None
    path_left: SweepPath | None = None
    path_right: SweepPath | None = None
    grade: bool = False
    margin: float = 0.02

    @property
    def dual(self) -> bool:
        return self.path_left is not None


@dataclass
class SimConfig:
    plant_name: str = "ifind-v2"
    mesh_path: str | None = None
    dt: float = 0.02
    seed: int = 0
    stiffness: float = 2000.0
    friction: float = 0.3
    sensor: SensorModel = field(default_factory=SensorModel)
    views_path: str | None = None


class Simulator:
    """Owns the live state; single writer, many telemetry readers."""

    def __init__(self, config: SimConfig):
        self.config = config
        name = config.plant_name
        if name == "ifind-v3" or name.endswith("rig"):
            rig = assemble_rig(name)
            raw = yaml.safe_load(
                bundled_config_path("rigs", f"{name}.yaml").read_text()) \
                if name in ("ifind-v3",) else {}
            self.plant = _DualArmPlant(rig, raw.get("velocity_caps", {}))
            safety_node = raw.get("safety")
        else:
            chain = load_chain(name)
            raw = load_chain_config(name)
            self.plant = _SingleArmPlant(chain, raw.get("velocity_caps", {}))
            safety_node = raw.get("safety")
        self.limits = SafetyLimits.from_config(safety_node)
        mesh_path = config.mesh_path or bundled_config_path(
            "meshes", "phantom-abdomen.off")
        self.mesh: SurfaceMesh = load_mesh(mesh_path)
        self.views: dict[str, StandardView] = load_views(config.views_path)
        self.rng = np.random.default_rng(config.seed)
        self.log = SessionLog()
        self.tick = 0
        self.q = self.plant.home()
        self.mode = SimMode.IDLE
        self.safety = SafetyStatus()
        self.clutch = ClutchState.for_joints(self.plant.joint_ids)
        self.target_q: np.ndarray | None = None
        self.sweep: SweepDefinition | None = None
        self.sweep_name = ""
        self.waypoint_index = 0
        self._leg_queue: list = []
        self._target_is_waypoint = False
        self._descend_pending = False
        self.indentation_override: float | None = None
        self.sweeps: dict[str, SweepDefinition] = {}
        self._queue: list[Command] = []
        self._subscribers: list[list] = []
        self._request_counter = itertools.count(1)
        self._prev_tips = [p.position.copy() for p in self.plant.tips(self.q)]
        self._pending_supervisor: str | None = None

    # -- command side -------------------------------------------------------

    def submit(self, command: Command) -> str:
        """Queue a command; returns its request id (FIFO, one per tick)."""
        if not command.request_id:
            command = replace(command,
                              request_id=f"r{next(self._request_counter)}")
        self._queue.append(command)
        return command.request_id

    def telemetry_stream(self) -> "Subscription":
        sub = Subscription()
        self._subscribers.append(sub._frames)
        return sub

    # -- helpers ------------------------------------------------------------

    def _fault(self) -> bool:
        return self.safety.state in FAULT_STATES

    def _event(self, kind: str, payload: dict):
        append_event(self.log, SessionEvent(self.tick, kind, payload))

    def _sweep_contact(self, contact: ContactPose) -> ContactPose:
        if self.indentation_override is None:
            return contact
        return ContactPose(contact.surface_point, contact.normal,
                           self.indentation_override, contact.axial_roll)

    APPROACH_HOVER = 0.03   # m above the first waypoint before descending
    TRAVERSE_STEP = 0.01    # tip substep while relocating above the surface
    TRACK_STEP = 0.005      # tip substep while pressed on the surface

    def _waypoint_poses(self, index: int, lift: float = 0.0) -> list[Pose]:
        """Tip pose(s) for a waypoint, optionally lifted along the normal."""
        assert self.sweep is not None
        contacts = ([self.sweep.path_left.waypoints[index],
                     self.sweep.path_right.waypoints[index]]
                    if self.sweep.dual
                    else [self.sweep.path.waypoints[index]])
        poses = []
        for c in contacts:
            pose = pose_from_contact(self._sweep_contact(c))
            if lift > 0.0:
                poses.append(Pose(pose.position
                                  + (lift + c.indentation) * c.normal,
                                  pose.orientation))
            else:
                poses.append(pose)
        return poses

    def _lerp_leg(self, tips_to: list[Pose], step: float,
                  waypoint_leg: bool) -> list[tuple]:
        """Cartesian substeps from the current tips to the given poses.

        FOLLOWING tracks straight tip-space chords (position lerp +
        orientation slerp) so the probe cannot dig into the surface
        between IK solutions the way a long joint-space interpolation
        can. Entries are (poses, is_waypoint).
        """
        tips_from = self.plant.tips(self.q)
        travel = max(float(np.linalg.norm(t.position - f.position))
                     for f, t in zip(tips_from, tips_to))
        swing = max(quat_angle(f.orientation, t.orientation)
                    for f, t in zip(tips_from, tips_to))
        n = max(1, int(np.ceil(travel / step)),
                int(np.ceil(swing / 0.05)))
        entries = []
        for i in range(1, n + 1):
            frac = i / n
            poses = [Pose(f.position + frac * (t.position - f.position),
                          quat_slerp(f.orientation, t.orientation, frac))
                     for f, t in zip(tips_from, tips_to)]
            entries.append((poses, waypoint_leg and i == n))
        return entries

    def _solve_following(self, poses: list[Pose]) -> np.ndarray:
        if self.sweep.dual:
            return self.plant.dual_ik(poses[0], poses[1], self.q,
                                      self.sweep.margin)
        return self.plant.ik(poses[0], 0, self.q)

    def _pop_following(self):
        poses, is_waypoint = self._leg_queue.pop(0)
        self.target_q = self._solve_following(poses)
        self._target_is_waypoint = is_waypoint

    def _sweep_length(self) -> int:
        return len(self.sweep.path_left.waypoints) if self.sweep.dual \
            else len(self.sweep.path.waypoints)

    def _apply_command(self, cmd: Command) -> CommandResponse:
        kind = cmd.kind
        p = cmd.params
        if kind in ("estop", "reset"):
            self._pending_supervisor = kind
            if kind == "reset":
                self.clutch = self.clutch.reset()
                self.mode = SimMode.IDLE
                self.target_q = None
                self.sweep = None
            return CommandResponse(cmd.request_id, True)
        if self._fault() and kind in MOTION_COMMANDS:
            return CommandResponse(cmd.request_id, False, "RejectedInFault")
        try:
            if kind == "jog":
                idx = self.plant.joint_ids.index(str(p["joint"]))
                target = self.q.copy()
                target[idx] = float(
                    np.clip(target[idx] + float(p["delta"]),
                            self.plant.lo[idx], self.plant.hi[idx]))
                self.target_q = target
                self.mode = SimMode.JOGGING
            elif kind == "move_to":
                pose = Pose(np.array(p["position"], dtype=float),
                            np.array(p["quaternion"], dtype=float))
                self.target_q = self.plant.ik(pose, int(p.get("arm", 0)),
                                              self.q)
                self.mode = SimMode.MOVE_TO
            elif kind == "home":
                self.target_q = self.plant.home()
                self.mode = SimMode.MOVE_TO
            elif kind == "follow_sweep":
                sweep = self.sweeps[str(p["path"])]
                self.sweep = sweep
                self.sweep_name = str(p["path"])
                self.waypoint_index = 0
                # Relocate to a hover above the first waypoint first; the
                # descent leg is built on arrival (it interpolates from
                # wherever the tips actually are).
                self._leg_queue = self._lerp_leg(
                    self._waypoint_poses(0, lift=self.APPROACH_HOVER),
                    self.TRAVERSE_STEP, False)
                self._descend_pending = True
                self._pop_following()
                self.mode = SimMode.FOLLOWING
            elif kind == "set_indentation":
                value = float(p["value"])
                if value < 0:
                    raise ValueError("indentation must be >= 0")
                self.indentation_override = value
                if self.mode == SimMode.FOLLOWING and self.sweep is not None \
                        and not self._descend_pending:
                    self._leg_queue = self._lerp_leg(
                        self._waypoint_poses(self.waypoint_index),
                        self.TRACK_STEP, True)
                    self._pop_following()
            elif kind == "grade":
                view = self.views[str(p["view"])]
                tips = self.plant.tips(self.q)
                force = self._contact_forces(tips, None)[0]
                record = grade_acquisition(
                    view, tips[0], force.normal,
                    operator=str(p.get("operator", "robot")), tick=self.tick)
                self._event("grade", {
                    "view": record.view, "operator": record.operator,
                    "grade": record.grade,
                    "position_error": record.position_error,
                    "orientation_error": record.orientation_error,
                    "normal_force": record.normal_force})
            elif kind == "questionnaire":
                answers = [int(a) for a in p["answers"]]
                if len(answers) != 7 or any(a < 0 or a > 4 for a in answers):
                    raise ValueError("answers must be seven integers in 0..4")
                self._event("questionnaire", {
                    "volunteer_id": str(p.get("volunteer_id", "anon")),
                    "robot_version": str(p.get("robot_version", "v2")),
                    "answers": answers})
        except NotConverged as exc:
            return CommandResponse(cmd.request_id, False, "NotConverged",
                                   {"position_residual": exc.position_residual,
                                    "orientation_residual":
                                        exc.orientation_residual})
        except (KeyError, ValueError, IndexError, IfindError) as exc:
            return CommandResponse(cmd.request_id, False,
                                   type(exc).__name__, {"message": str(exc)})
        return CommandResponse(cmd.request_id, True)

    def _contact_forces(self, tips, velocities) -> list[ContactForce]:
        forces = []
        for i, tip in enumerate(tips):
            v = None if velocities is None else velocities[i]
            forces.append(contact_force(self.mesh, tip, self.config.stiffness,
                                        self.config.friction, v))
        return forces

    def _world_forces(self, tips, forces) -> list[np.ndarray]:
        out = []
        for tip, f in zip(tips, forces):
            if f.normal <= 0.0:
                out.append(np.zeros(3))
                continue
            cp, n, _ = closest_point(self.mesh, tip.position)
            t1, t2 = _tangent_basis(n)
            out.append(n * f.normal + t1 * f.lateral[0] + t2 * f.lateral[1])
        return out

    def _retract_target(self) -> np.ndarray:
        target = self.q.copy()
        pose = self.limits.retract_pose or {}
        for jid, value in pose.items():
            if jid in self.plant.joint_ids:
                target[self.plant.joint_ids.index(jid)] = float(value)
        return target

    def _integrate(self) -> np.ndarray:
        """One tick of rate-capped motion toward the current target."""
        if self.safety.state == SafetyState.RETRACTED:
            target = self._retract_target()
        elif self._fault() or self.target_q is None:
            return self.q
        else:
            target = self.target_q
        caps = self.plant.velocity_caps * self.config.dt
        raw = target - self.q
        if self.safety.state != SafetyState.RETRACTED:
            # Disengaged joints are decoupled from their drives; only the
            # gas-spring retract moves them.
            engaged = np.array(self.clutch.engaged)
            raw = np.where(engaged, raw, 0.0)
        # Synchronized profile: every joint arrives on the same tick, so
        # the configuration tracks the straight joint-space line between
        # targets (no per-joint racing) while respecting each cap.
        ticks_needed = float(np.max(np.abs(raw) / caps))
        if ticks_needed <= 1.0:
            # Lands exactly on the target so arrival checks compare
            # bit-for-bit.
            q_new = np.where(raw != 0.0, target, self.q)
        else:
            q_new = self.q + raw / ticks_needed
        if self.safety.state == SafetyState.FORCE_LIMIT:
            # Motion toward the surface is inhibited above the soft limit.
            old_tips = self.plant.tips(self.q)
            new_tips = self.plant.tips(q_new)
            for old, new in zip(old_tips, new_tips):
                _, n, _ = closest_point(self.mesh, old.position)
                if float((new.position - old.position) @ n) < -1e-12:
                    return self.q
        return q_new

    # -- the loop -----------------------------------------------------------

    def step(self) -> tuple[dict, list[CommandResponse]]:
        """Advance one tick; returns (telemetry frame, command responses)."""
        self.tick += 1
        responses = []
        self._pending_supervisor = None
        if self._queue:
            cmd = self._queue.pop(0)
            resp = self._apply_command(cmd)
            responses.append(resp)
            self._event("command", {
                "request_id": cmd.request_id, "kind": cmd.kind,
                "params": _jsonable(cmd.params),
                "status": "applied" if resp.ok else f"rejected:{resp.error}"})

        self.q = self._integrate()

        tips = self.plant.tips(self.q)
        velocities = [(tip.position - prev) / self.config.dt
                      for tip, prev in zip(tips, self._prev_tips)]
        forces = self._contact_forces(tips, velocities)
        world_forces = self._world_forces(tips, forces)
        readings = [sense(f, self.config.sensor, self.rng, self.tick)
                    for f in forces]
        worst = max(readings, key=lambda r: r.max_abs)
        loads = self.plant.loads(self.q, world_forces)
        self.clutch = update_clutch(self.clutch, loads,
                                    self.plant.thresholds, self.tick)
        old_state = self.safety.state
        self.safety = supervisor_step(self.safety, worst, self.clutch,
                                      self.limits,
                                      command=self._pending_supervisor)
        if self.safety.state != old_state:
            self._event("safety", {"state": self.safety.state.value,
                                   "cause": self.safety.cause})

        if self._fault():
            self.mode = SimMode.FAULT
        elif self.mode == SimMode.FAULT:
            self.mode = SimMode.IDLE
        self._advance_mode(tips, forces)

        self._prev_tips = [t.position.copy() for t in tips]
        frame = self._frame(tips, forces, readings, responses)
        self._event("telemetry", {k: v for k, v in frame.items()
                                  if k != "tick"})
        for sub in self._subscribers:
            sub.append(frame)
        return frame, responses

    def _advance_mode(self, tips, forces):
        if self.mode in (SimMode.JOGGING, SimMode.MOVE_TO):
            if self.target_q is not None and np.array_equal(self.q,
                                                            self.target_q):
                self.mode = SimMode.IDLE
                self.target_q = None
        elif self.mode == SimMode.FOLLOWING and self.target_q is not None \
                and np.array_equal(self.q, self.target_q):
            try:
                self._advance_following(tips, forces)
            except IfindError as exc:
                self._event("command", {
                    "request_id": "", "kind": "follow_sweep",
                    "params": {"path": self.sweep_name},
                    "status": f"follow_failed:{type(exc).__name__}"
                              f"@{self.waypoint_index}"})
                self.mode = SimMode.IDLE
                self.sweep = None
                self.target_q = None

    def _advance_following(self, tips, forces):
        if self._target_is_waypoint:
            if self.sweep.grade:
                contact = (self.sweep.path_left if self.sweep.dual
                           else self.sweep.path).waypoints[self.waypoint_index]
                target = pose_from_contact(self._sweep_contact(contact))
                pos_err = float(np.linalg.norm(tips[0].position
                                               - target.position))
                self._event("grade", {
                    "view": f"sweep:{self.sweep_name}[{self.waypoint_index}]",
                    "operator": "robot",
                    "grade": "good" if pos_err < 0.005 else "acceptable",
                    "position_error": pos_err, "orientation_error": 0.0,
                    "normal_force": forces[0].normal})
            self.waypoint_index += 1
            self._target_is_waypoint = False
            if self.waypoint_index >= self._sweep_length():
                self.mode = SimMode.IDLE
                self.sweep = None
                self.target_q = None
                return
            self._leg_queue = self._lerp_leg(
                self._waypoint_poses(self.waypoint_index), self.TRACK_STEP,
                True)
            self._pop_following()
        elif self._leg_queue:
            self._pop_following()
        elif self._descend_pending:
            self._descend_pending = False
            self._leg_queue = self._lerp_leg(
                self._waypoint_poses(self.waypoint_index), self.TRACK_STEP,
                True)
            self._pop_following()

    def _frame(self, tips, forces, readings, responses) -> dict:
        clearance, witness = self.plant.clearance_info(self.q)
        return {
            "tick": self.tick,
            "mode": self.mode.value,
            "safety": {"state": self.safety.state.value,
                       "cause": self.safety.cause},
            "joints": [float(v) for v in self.q],
            "tips": [{"position": [float(x) for x in t.position],
                      "quaternion": [float(x) for x in t.orientation]}
                     for t in tips],
            "forces": [{"normal": float(f.normal),
                        "lateral": [float(x) for x in f.lateral],
                        "sensed": [float(x) for x in r.values]}
                       for f, r in zip(forces, readings)],
            "clearance": clearance,
            "clearance_witness": witness,
            "frames": self.plant.frames(self.q),
            "responses": [{"request_id": r.request_id, "ok": r.ok,
                           "error": r.error} for r in responses],
        }

    def run(self, ticks: int):
        for _ in range(ticks):
            self.step()
        return self.log


class Subscription:
    """In-order view of every frame emitted after subscribing."""

    def __init__(self):
        self._frames: list = []
        self._cursor = 0

    def drain(self) -> list:
        out = self._frames[self._cursor:]
        self._cursor = len(self._frames)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# Scenarios


def _build_sweeps(mesh: SurfaceMesh, node: dict) -> dict[str, SweepDefinition]:
    sweeps = {}
    for name, s in (node or {}).items():
        grade = bool(s.get("grade", False))
        indentation = float(s.get("indentation", 0.0))
        spacing = float(s.get("spacing", 0.03))
        if "left" in s:
            count = int(s.get("count", 10))
            left = generate_sweep(mesh, s["left"]["start"], s["left"]["end"],
                                  spacing, indentation)
            right = generate_sweep(mesh, s["right"]["start"],
                                   s["right"]["end"], spacing, indentation)
            sweeps[name] = SweepDefinition(
                path_left=resample_sweep(mesh, left, count),
                path_right=resample_sweep(mesh, right, count),
                grade=grade, margin=float(s.get("margin", 0.02)))
        else:
            sweeps[name] = SweepDefinition(
                path=generate_sweep(mesh, s["start"], s["end"], spacing,
                                    indentation),
                grade=grade)
    return sweeps


def load_scenario(path) -> dict:
    try:
        node = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot parse scenario {path}: {exc}") from exc
    if not isinstance(node, dict) or "preset" not in node:
        raise ParseError(f"scenario {path} must name a preset")
    return node


def simulator_from_scenario(node: dict) -> tuple[Simulator, list, int]:
    preset = str(node["preset"])
    known = ("ifind-v1", "ifind-v2", "ifind-v3-arm", "ifind-v3")
    if preset not in known:
        raise UnknownPreset(f"scenario preset {preset!r}; known: {known}")
    mesh_name = node.get("mesh", "phantom-abdomen")
    if mesh_name and not str(mesh_name).endswith(".off"):
        mesh_path = bundled_config_path("meshes", f"{mesh_name}.off")
    else:
        mesh_path = mesh_name
    sensor_node = node.get("sensor", {})
    config = SimConfig(
        plant_name=preset,
        mesh_path=mesh_path,
        dt=float(node.get("dt", 0.02)),
        seed=int(node.get("seed", 0)),
        stiffness=float(node.get("stiffness", 2000.0)),
        friction=float(node.get("friction", 0.3)),
        sensor=SensorModel(
            quantization_step=float(sensor_node.get("quantization_step",
                                                    0.1)),
            noise_sigma=float(sensor_node.get("noise_sigma", 0.0))))
    sim = Simulator(config)
    sim.sweeps = _build_sweeps(sim.mesh, node.get("sweeps"))
    commands = sorted((node.get("commands") or []),
                      key=lambda c: int(c.get("tick", 0)))
    ticks = int(node.get("ticks", 100))
    return sim, commands, ticks


def run_scenario(path) -> SessionLog:
    """Run a scenario file to completion; deterministic for a given seed."""
    node = load_scenario(path)
    sim, commands, ticks = simulator_from_scenario(node)
    pending = list(commands)
    while sim.tick < ticks:
        while pending and int(pending[0].get("tick", 0)) <= sim.tick + 1:
            spec = pending.pop(0)
            params = {k: v for k, v in spec.items()
                      if k not in ("tick", "kind")}
            sim.submit(Command(str(spec["kind"]), params))
        sim.step()
    return sim.log
