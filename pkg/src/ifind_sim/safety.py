"""Contact forces, sensing, clutches and the safety supervisor.

The safety chain mirrors the hardware layering: a spring contact model
produces probe forces, an optoelectronic-style sensor quantizes them,
joint loads follow from the Jacobian transpose, per-joint ball-spring
clutches disengage above their preset thresholds, and a supervisor state
machine turns all of that into NOMINAL / FORCE_LIMIT / CLUTCH_TRIPPED /
RETRACTED / ESTOP.

Supervisor transition graph (anything not listed is forbidden):

    NOMINAL        -> FORCE_LIMIT     sensed force above the soft limit
    FORCE_LIMIT    -> NOMINAL         force back below the soft limit
    NOMINAL/FORCE_LIMIT -> CLUTCH_TRIPPED   any clutch disengaged
    CLUTCH_TRIPPED -> RETRACTED       tripped joint is a back-arm joint
                                      (gas-spring lift), next tick
    any            -> ESTOP           operator command
    ESTOP          -> NOMINAL         reset only
    RETRACTED      -> NOMINAL         reset only
    CLUTCH_TRIPPED -> NOMINAL         reset only (re-engages clutches)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .chain import KinematicChain, check_limits, jacobian
from .errors import InvalidConfig
from .surface import SurfaceMesh, closest_point, raycast
from .transforms import Pose


@dataclass(frozen=True)
class ContactForce:
    """Normal force plus in-plane friction force at the probe tip."""

    normal: float
    lateral: np.ndarray  # 2-vector in the contact tangent basis

    def __post_init__(self):
        object.__setattr__(self, "lateral",
                           np.asarray(self.lateral, dtype=float))
        if self.normal < 0.0:
            raise ValueError("normal contact force must be >= 0")

    def as_vector(self) -> np.ndarray:
        return np.array([self.normal, self.lateral[0], self.lateral[1]])


ZERO_FORCE = ContactForce(0.0, np.zeros(2))


def contact_force(mesh: SurfaceMesh, probe: Pose, stiffness: float,
                  friction_coeff: float,
                  motion_direction=None) -> ContactForce:
    """Spring contact: normal force = stiffness x penetration depth.

    Penetration is measured from the probe tip along the inward normal of
    the closest surface point. Friction opposes the commanded motion's
    tangential component and vanishes when stationary.
    """
    if stiffness <= 0.0:
        raise ValueError("stiffness must be positive")
    tip = probe.position
    cp, normal, _ = closest_point(mesh, tip)
    depth = float((cp - tip) @ normal)
    if depth <= 0.0:
        return ZERO_FORCE
    fn = stiffness * depth
    lateral = np.zeros(2)
    if motion_direction is not None:
        v = np.asarray(motion_direction, dtype=float)
        v_t = v - (v @ normal) * normal
        speed = np.linalg.norm(v_t)
        if speed > 1e-12:
            t_hat = v_t / speed
            from .surface import _tangent_basis
            t1, t2 = _tangent_basis(normal)
            # Friction opposes motion in the tangent plane.
            lateral = -friction_coeff * fn * np.array([t_hat @ t1,
                                                       t_hat @ t2])
    return ContactForce(fn, lateral)


@dataclass(frozen=True)
class SensorModel:
    """Quantization + gaussian noise standing in for the real sensor."""

    quantization_step: float = 0.1
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.quantization_step <= 0.0:
            raise InvalidConfig("sensor quantization step must be > 0")
        if self.noise_sigma < 0.0:
            raise InvalidConfig("sensor noise sigma must be >= 0")


@dataclass(frozen=True)
class SensorReading:
    """Per-axis forces after noise + quantization, stamped with the tick."""

    values: np.ndarray  # (normal, lateral_1, lateral_2) in N
    quantization_step: float
    noise_sigma: float
    tick: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=float))

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


def sense(force: ContactForce, model: SensorModel,
          rng: np.random.Generator, tick: int = 0) -> SensorReading:
    """Sample the sensor: add seeded gaussian noise, quantize to the step."""
    raw = force.as_vector()
    if model.noise_sigma > 0.0:
        raw = raw + rng.normal(0.0, model.noise_sigma, size=3)
    step = model.quantization_step
    quantized = np.round(raw / step) * step
    return SensorReading(quantized, step, model.noise_sigma, tick)


def joint_torques(chain: KinematicChain, q: np.ndarray,
                  wrench: np.ndarray) -> np.ndarray:
    """Joint loads for a tip wrench (force N; moment N.m): tau = J^T w.

    Revolute entries come out in N.m, prismatic entries in N.
    """
    q = check_limits(chain, q)
    wrench = np.asarray(wrench, dtype=float)
    if wrench.shape != (6,):
        raise ValueError("wrench must be a 6-vector (force, moment)")
    return jacobian(chain, q).T @ wrench


@dataclass(frozen=True)
class ClutchState:
    """Per-joint engagement; disengagement is latched until reset."""

    joint_ids: tuple[str, ...]
    engaged: tuple[bool, ...]
    trip_tick: tuple[int | None, ...]

    @staticmethod
    def for_joints(joint_ids) -> "ClutchState":
        ids = tuple(joint_ids)
        return ClutchState(ids, (True,) * len(ids), (None,) * len(ids))

    @property
    def any_tripped(self) -> bool:
        return not all(self.engaged)

    def tripped_ids(self) -> tuple[str, ...]:
        return tuple(jid for jid, e in zip(self.joint_ids, self.engaged)
                     if not e)

    def reset(self) -> "ClutchState":
        return ClutchState.for_joints(self.joint_ids)


def update_clutch(state: ClutchState, loads: np.ndarray,
                  thresholds, tick: int = 0) -> ClutchState:
    """Disengage every joint whose |load| strictly exceeds its threshold.

    ``thresholds`` holds one entry per joint (None for clutchless joints).
    Already-disengaged joints stay disengaged; there is no re-engagement
    without an explicit reset.
    """
    loads = np.asarray(loads, dtype=float)
    if len(loads) != len(state.joint_ids):
        raise ValueError("loads length must match the clutch joint count")
    engaged = list(state.engaged)
    trip = list(state.trip_tick)
    for i, thr in enumerate(thresholds):
        if thr is None or not engaged[i]:
            continue
        if abs(loads[i]) > thr:
            engaged[i] = False
            trip[i] = tick
    return ClutchState(state.joint_ids, tuple(engaged), tuple(trip))


class SafetyState(str, enum.Enum):
    NOMINAL = "NOMINAL"
    FORCE_LIMIT = "FORCE_LIMIT"
    CLUTCH_TRIPPED = "CLUTCH_TRIPPED"
    RETRACTED = "RETRACTED"
    ESTOP = "ESTOP"


@dataclass(frozen=True)
class SafetyStatus:
    state: SafetyState = SafetyState.NOMINAL
    cause: str = ""


@dataclass(frozen=True)
class SafetyLimits:
    """Safety block of the chain/rig config."""

    soft_force_limit: float = 15.0
    back_arm_joints: tuple[str, ...] = ("J2", "J3")
    retract_pose: dict | None = None

    @staticmethod
    def from_config(node: dict | None) -> "SafetyLimits":
        node = node or {}
        return SafetyLimits(
            soft_force_limit=float(node.get("soft_force_limit", 15.0)),
            back_arm_joints=tuple(node.get("back_arm_joints", ("J2", "J3"))),
            retract_pose=node.get("retract_pose"),
        )


ESTOP_COMMAND = "estop"
RESET_COMMAND = "reset"


def supervisor_step(status: SafetyStatus, reading: SensorReading | None,
                    clutch: ClutchState, limits: SafetyLimits,
                    command: str | None = None) -> SafetyStatus:
    """Advance the supervisor one tick (transition graph in module docs)."""
    state = status.state
    if command == ESTOP_COMMAND:
        return SafetyStatus(SafetyState.ESTOP, "operator emergency stop")
    if state == SafetyState.ESTOP:
        if command == RESET_COMMAND:
            return SafetyStatus(SafetyState.NOMINAL, "reset from ESTOP")
        return status
    if state == SafetyState.RETRACTED:
        if command == RESET_COMMAND:
            return SafetyStatus(SafetyState.NOMINAL, "reset from RETRACTED")
        return status
    if command == RESET_COMMAND:
        return SafetyStatus(SafetyState.NOMINAL, "reset")
    if state == SafetyState.CLUTCH_TRIPPED:
        tripped_back_arm = [jid for jid in clutch.tripped_ids()
                            if jid in limits.back_arm_joints]
        if tripped_back_arm:
            return SafetyStatus(
                SafetyState.RETRACTED,
                f"gas-spring retract after {tripped_back_arm[0]} clutch trip")
        return status
    if clutch.any_tripped:
        return SafetyStatus(
            SafetyState.CLUTCH_TRIPPED,
            f"clutch disengaged on {', '.join(clutch.tripped_ids())}")
    if reading is not None and reading.max_abs > limits.soft_force_limit:
        return SafetyStatus(
            SafetyState.FORCE_LIMIT,
            f"sensed force {reading.max_abs:.2f} N above soft limit")
    if state == SafetyState.FORCE_LIMIT:
        return SafetyStatus(SafetyState.NOMINAL, "force back below soft limit")
    return status


@dataclass(frozen=True)
class Proximity:
    """Probe-axis distance to the surface, or contact when penetrating."""

    distance: float | None
    contact: bool


def proximity(mesh: SurfaceMesh, probe: Pose) -> Proximity:
    """Raycast from the probe tip along the probe axis.

    Reports contact when the tip is already below the surface (negative
    distances are penetration depths).
    """
    tip = probe.position
    cp, normal, _ = closest_point(mesh, tip)
    depth = float((cp - tip) @ normal)
    if depth > 0.0:
        return Proximity(-depth, True)
    hit = raycast(mesh, tip, probe.z_axis())
    if hit is None:
        return Proximity(None, False)
    return Proximity(hit, False)
