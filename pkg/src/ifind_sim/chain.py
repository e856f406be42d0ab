"""Serial-chain kinematics: presets, forward kinematics, Jacobian, homing.

A chain is an ordered list of joints. Each joint contributes a fixed
rigid transform (``fixed_pre_transform``, from the parent joint frame)
followed by a single-variable transform about/along its axis. Tool
geometry hangs off the last joint via ``tool_transform``.

Parallel-link (two-bar parallelogram) arms are encoded with
``parallelogram_pairs``: for a pair ``(driver, compensated)`` a counter
rotation of ``-q_driver`` about the driver's axis is inserted at the
compensated joint, immediately after its fixed pre-transform. With the
pairs used by the bundled presets this makes the wrist-mount orientation
independent of the arm joints, which is exactly how the physical
parallelogram linkage behaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidConfig, LimitViolation, UnknownPreset
from .transforms import Pose, RigidTransform, rotation_about_axis

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

_AXIS_TOL = 1e-9
_LIMIT_TOL = 1e-9
_FULL_CIRCLE = 2.0 * math.pi - 1e-9

PRESET_NAMES = ("ifind-v1", "ifind-v2", "ifind-v3-arm")
_PRESET_JOINT_COUNTS = {"ifind-v1": 7, "ifind-v2": 8, "ifind-v3-arm": 8}


@dataclass(frozen=True)
class JointSpec:
    """One joint: axis, limits, home value and an optional clutch threshold."""

    id: str
    kind: str
    axis: np.ndarray
    limits: tuple[float, float]
    home: float = 0.0
    clutch_threshold: float | None = None
    fixed_pre_transform: RigidTransform = field(
        default_factory=RigidTransform.identity)

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float))
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise InvalidConfig(f"joint {self.id}: unknown kind {self.kind!r}")
        if abs(np.linalg.norm(self.axis) - 1.0) > _AXIS_TOL:
            raise InvalidConfig(f"joint {self.id}: axis is not unit norm")
        lo, hi = self.limits
        if lo > hi:
            raise InvalidConfig(f"joint {self.id}: limit min {lo} > max {hi}")
        if not (lo - _LIMIT_TOL <= self.home <= hi + _LIMIT_TOL):
            raise InvalidConfig(f"joint {self.id}: home outside limits")
        if self.clutch_threshold is not None and self.clutch_threshold <= 0:
            raise InvalidConfig(f"joint {self.id}: clutch threshold must be > 0")

    @property
    def full_circle(self) -> bool:
        """True for joints spanning a full turn; these wrap instead of clamping."""
        return (self.kind == REVOLUTE
                and self.limits[1] - self.limits[0] >= _FULL_CIRCLE)


@dataclass(frozen=True)
class KinematicChain:
    """Ordered joints + tool transform + parallelogram bookkeeping."""

    name: str
    joints: tuple[JointSpec, ...]
    tool_transform: RigidTransform = field(
        default_factory=RigidTransform.identity)
    parallelogram_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "parallelogram_pairs",
                           tuple((str(a), str(b))
                                 for a, b in self.parallelogram_pairs))
        ids = [j.id for j in self.joints]
        if len(set(ids)) != len(ids):
            raise InvalidConfig(f"chain {self.name}: duplicate joint ids")
        for driver, comp in self.parallelogram_pairs:
            if driver not in ids or comp not in ids:
                raise InvalidConfig(
                    f"chain {self.name}: parallelogram pair ({driver}, {comp}) "
                    "names an unknown joint")
            if ids.index(driver) >= ids.index(comp):
                raise InvalidConfig(
                    f"chain {self.name}: parallelogram driver {driver} must "
                    f"precede compensated joint {comp}")

    def __len__(self) -> int:
        return len(self.joints)

    def joint_index(self, joint_id: str) -> int:
        for i, j in enumerate(self.joints):
            if j.id == joint_id:
                return i
        raise KeyError(joint_id)

    def joint_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.joints)

    def compensation_map(self) -> dict[int, int]:
        """compensated joint index -> driver joint index."""
        return {self.joint_index(c): self.joint_index(d)
                for d, c in self.parallelogram_pairs}


def home(chain: KinematicChain) -> np.ndarray:
    """Joint vector with every joint at its home value."""
    return np.array([j.home for j in chain.joints])


def wrap_angles(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Wrap full-circle joints into (-pi, pi]; other values pass through."""
    q = np.array(q, dtype=float)
    for i, j in enumerate(chain.joints):
        if j.full_circle:
            q[i] = math.remainder(q[i], 2.0 * math.pi)
    return q


def check_limits(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Validate a joint vector against limits; returns it as an array."""
    q = np.asarray(q, dtype=float)
    if q.shape != (len(chain),):
        raise LimitViolation(
            f"joint vector length {q.shape} does not match chain "
            f"{chain.name} ({len(chain)} joints)")
    for i, j in enumerate(chain.joints):
        if j.full_circle:
            continue
        lo, hi = j.limits
        if q[i] < lo - _LIMIT_TOL or q[i] > hi + _LIMIT_TOL:
            raise LimitViolation(
                f"joint {j.id} value {q[i]:.6f} outside limits [{lo}, {hi}]")
    return q


def clamp_to_limits(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Clamp to limits (full-circle joints wrap instead)."""
    q = wrap_angles(chain, q)
    for i, j in enumerate(chain.joints):
        if j.full_circle:
            continue
        q[i] = min(max(q[i], j.limits[0]), j.limits[1])
    return q


def _joint_transform(joint: JointSpec, value: float) -> RigidTransform:
    if joint.kind == REVOLUTE:
        return RigidTransform(rotation_about_axis(joint.axis, value))
    return RigidTransform(np.eye(3), joint.axis * value)


class _CompiledChain:
    """Flattened per-joint arrays for the hot FK/Jacobian path."""

    def __init__(self, chain: KinematicChain):
        comp = chain.compensation_map()
        self.n = len(chain)
        self.revolute = np.array([j.kind == REVOLUTE for j in chain.joints])
        self.axes = np.array([j.axis for j in chain.joints])
        self.pre_r = np.array([j.fixed_pre_transform.rotation
                               for j in chain.joints])
        self.pre_t = np.array([j.fixed_pre_transform.translation
                               for j in chain.joints])
        self.comp_driver = np.array(
            [comp.get(i, -1) for i in range(self.n)], dtype=np.int64)
        self.tool_r = np.ascontiguousarray(chain.tool_transform.rotation)
        self.tool_t = np.ascontiguousarray(chain.tool_transform.translation)
        self.lo = np.array([j.limits[0] for j in chain.joints])
        self.hi = np.array([j.limits[1] for j in chain.joints])
        self.full_circle = np.array([j.full_circle for j in chain.joints])


def _compiled(chain: KinematicChain) -> _CompiledChain:
    # Cached on the chain instance itself so the lifetime (and identity)
    # can never drift apart from the chain it was built from.
    cached = getattr(chain, "_compiled_cache", None)
    if cached is None:
        cached = _CompiledChain(chain)
        object.__setattr__(chain, "_compiled_cache", cached)
    return cached


def _fast_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    c = math.cos(angle)
    s = math.sin(angle)
    x, y, z = axis
    C = 1.0 - c
    out = np.empty((3, 3))
    out[0, 0] = c + x * x * C
    out[0, 1] = x * y * C - z * s
    out[0, 2] = x * z * C + y * s
    out[1, 0] = y * x * C + z * s
    out[1, 1] = c + y * y * C
    out[1, 2] = y * z * C - x * s
    out[2, 0] = z * x * C - y * s
    out[2, 1] = z * y * C + x * s
    out[2, 2] = c + z * z * C
    return out


def _fk_jac_python(cc: _CompiledChain, q: np.ndarray):
    r = np.eye(3)
    t = np.zeros(3)
    axes_w = np.empty((cc.n, 3))
    origins = np.empty((cc.n, 3))
    comp_axes = {}
    for i in range(cc.n):
        t = r @ cc.pre_t[i] + t
        r = r @ cc.pre_r[i]
        d = cc.comp_driver[i]
        if d >= 0:
            comp_axes.setdefault(d, []).append((r @ cc.axes[d], t.copy()))
            r = r @ _fast_rotation(cc.axes[d], -q[d])
        axes_w[i] = r @ cc.axes[i]
        origins[i] = t
        if cc.revolute[i]:
            r = r @ _fast_rotation(cc.axes[i], q[i])
        else:
            t = t + axes_w[i] * q[i]
    t = r @ cc.tool_t + t
    r = r @ cc.tool_r
    jac = np.zeros((6, cc.n))
    rel = t - origins
    lin = np.cross(axes_w, rel)
    for i in range(cc.n):
        if cc.revolute[i]:
            jac[:3, i] = lin[i]
            jac[3:, i] = axes_w[i]
        else:
            jac[:3, i] = axes_w[i]
    for d, entries in comp_axes.items():
        for axis, origin in entries:
            jac[:3, d] -= np.cross(axis, t - origin)
            jac[3:, d] -= axis
    return r, t, jac


_KERNEL = None
_KERNEL_FAILED = False


def _build_kernel():
    """JIT-compile the chain walk; returns None when numba is unavailable."""
    global _KERNEL, _KERNEL_FAILED
    if _KERNEL is not None or _KERNEL_FAILED:
        return _KERNEL
    try:
        from numba import njit
    except ImportError:
        _KERNEL_FAILED = True
        return None

    @njit(cache=True)
    def kernel(pre_r, pre_t, axes, revolute, comp_driver, tool_r, tool_t, q):
        n = q.shape[0]
        r = np.eye(3)
        t = np.zeros(3)
        axes_w = np.empty((n, 3))
        origins = np.empty((n, 3))
        comp_axis = np.zeros((n, 3))
        comp_origin = np.zeros((n, 3))
        has_comp = np.zeros(n, dtype=np.bool_)
        for i in range(n):
            t = r @ pre_t[i] + t
            r = r @ pre_r[i]
            d = comp_driver[i]
            if d >= 0:
                comp_axis[i] = r @ axes[d]
                comp_origin[i] = t
                has_comp[i] = True
                x, y, z = axes[d, 0], axes[d, 1], axes[d, 2]
                c = math.cos(-q[d])
                s = math.sin(-q[d])
                C = 1.0 - c
                rot = np.empty((3, 3))
                rot[0, 0] = c + x * x * C
                rot[0, 1] = x * y * C - z * s
                rot[0, 2] = x * z * C + y * s
                rot[1, 0] = y * x * C + z * s
                rot[1, 1] = c + y * y * C
                rot[1, 2] = y * z * C - x * s
                rot[2, 0] = z * x * C - y * s
                rot[2, 1] = z * y * C + x * s
                rot[2, 2] = z * z * C + c
                r = r @ rot
            axes_w[i] = r @ axes[i]
            origins[i] = t
            if revolute[i]:
                x, y, z = axes[i, 0], axes[i, 1], axes[i, 2]
                c = math.cos(q[i])
                s = math.sin(q[i])
                C = 1.0 - c
                rot = np.empty((3, 3))
                rot[0, 0] = c + x * x * C
                rot[0, 1] = x * y * C - z * s
                rot[0, 2] = x * z * C + y * s
                rot[1, 0] = y * x * C + z * s
                rot[1, 1] = c + y * y * C
                rot[1, 2] = y * z * C - x * s
                rot[2, 0] = z * x * C - y * s
                rot[2, 1] = z * y * C + x * s
                rot[2, 2] = z * z * C + c
                r = r @ rot
            else:
                t = t + axes_w[i] * q[i]
        t = r @ tool_t + t
        r = r @ tool_r
        jac = np.zeros((6, n))
        for i in range(n):
            if revolute[i]:
                rx = t[0] - origins[i, 0]
                ry = t[1] - origins[i, 1]
                rz = t[2] - origins[i, 2]
                ax, ay, az = axes_w[i, 0], axes_w[i, 1], axes_w[i, 2]
                jac[0, i] = ay * rz - az * ry
                jac[1, i] = az * rx - ax * rz
                jac[2, i] = ax * ry - ay * rx
                jac[3, i] = ax
                jac[4, i] = ay
                jac[5, i] = az
            else:
                jac[0, i] = axes_w[i, 0]
                jac[1, i] = axes_w[i, 1]
                jac[2, i] = axes_w[i, 2]
        for i in range(n):
            if has_comp[i]:
                d = comp_driver[i]
                rx = t[0] - comp_origin[i, 0]
                ry = t[1] - comp_origin[i, 1]
                rz = t[2] - comp_origin[i, 2]
                ax, ay, az = comp_axis[i, 0], comp_axis[i, 1], comp_axis[i, 2]
                jac[0, d] -= ay * rz - az * ry
                jac[1, d] -= az * rx - ax * rz
                jac[2, d] -= ax * ry - ay * rx
                jac[3, d] -= ax
                jac[4, d] -= ay
                jac[5, d] -= az
        return r, t, jac

    _KERNEL = kernel
    return _KERNEL


def fk_jacobian_raw(chain: KinematicChain, q: np.ndarray):
    """Tip rotation, tip position and 6xn Jacobian in one chain walk.

    Skips limit checking; callers own that. Used by the IK hot loop; runs
    through a numba kernel when available, an equivalent numpy walk
    otherwise.
    """
    cc = _compiled(chain)
    kernel = _build_kernel()
    if kernel is not None:
        return kernel(cc.pre_r, cc.pre_t, cc.axes, cc.revolute,
                      cc.comp_driver, cc.tool_r, cc.tool_t,
                      np.asarray(q, dtype=float))
    return _fk_jac_python(cc, np.asarray(q, dtype=float))


def _chain_frames(chain: KinematicChain, q: np.ndarray,
                  collect_jacobian_data: bool = False):
    """Walk the chain once, returning world frames (and Jacobian anchors)."""
    comp = chain.compensation_map()
    frames: list[RigidTransform] = []
    anchors = []      # (kind, world axis, world origin) per joint
    comp_anchors = {}  # driver index -> list of (world axis, world origin)
    t = RigidTransform.identity()
    for i, joint in enumerate(chain.joints):
        t = t @ joint.fixed_pre_transform
        if i in comp:
            driver = chain.joints[comp[i]]
            if collect_jacobian_data:
                comp_anchors.setdefault(comp[i], []).append(
                    (t.rotation @ driver.axis, t.translation.copy()))
            t = t @ RigidTransform(
                rotation_about_axis(driver.axis, -q[comp[i]]))
        if collect_jacobian_data:
            anchors.append((joint.kind, t.rotation @ joint.axis,
                            t.translation.copy()))
        t = t @ _joint_transform(joint, q[i])
        frames.append(t)
    frames.append(t @ chain.tool_transform)
    if collect_jacobian_data:
        return frames, anchors, comp_anchors
    return frames


def link_frames(chain: KinematicChain, q: np.ndarray) -> list[Pose]:
    """World pose of every joint frame plus the tool frame (last element)."""
    q = check_limits(chain, q)
    return [f.to_pose() for f in _chain_frames(chain, q)]


def forward_kinematics(chain: KinematicChain, q: np.ndarray) -> Pose:
    """Probe-tip pose for a joint vector."""
    q = check_limits(chain, q)
    return _chain_frames(chain, q)[-1].to_pose()


def jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x n) in the base frame.

    Rows 0..2 map joint rates to tip linear velocity (m/s), rows 3..5 to
    angular velocity (rad/s). Parallelogram drivers include the counter
    rotation's contribution, so columns match finite differences of the
    forward kinematics exactly.
    """
    q = check_limits(chain, q)
    frames, anchors, comp_anchors = _chain_frames(
        chain, q, collect_jacobian_data=True)
    p_tip = frames[-1].translation
    n = len(chain)
    jac = np.zeros((6, n))
    for i, (kind, axis, origin) in enumerate(anchors):
        if kind == PRISMATIC:
            jac[:3, i] = axis
        else:
            jac[:3, i] = np.cross(axis, p_tip - origin)
            jac[3:, i] = axis
    for driver_idx, entries in comp_anchors.items():
        for axis, origin in entries:
            jac[:3, driver_idx] -= np.cross(axis, p_tip - origin)
            jac[3:, driver_idx] -= axis
    return jac


# ---------------------------------------------------------------------------
# Config loading


def _parse_transform(node) -> RigidTransform:
    if node is None:
        return RigidTransform.identity()
    t = node.get("translation", (0.0, 0.0, 0.0))
    rpy = node.get("rpy", (0.0, 0.0, 0.0))
    if len(t) != 3 or len(rpy) != 3:
        raise InvalidConfig("transform needs 3-element translation/rpy")
    return RigidTransform.from_rpy([float(v) for v in rpy],
                                   [float(v) for v in t])


def _parse_joint(node) -> JointSpec:
    try:
        return JointSpec(
            id=str(node["id"]),
            kind=str(node["kind"]),
            axis=np.asarray(node["axis"], dtype=float),
            limits=(float(node["limits"][0]), float(node["limits"][1])),
            home=float(node.get("home", 0.0)),
            clutch_threshold=(float(node["clutch_threshold"])
                              if node.get("clutch_threshold") is not None
                              else None),
            fixed_pre_transform=_parse_transform(node.get("pre_transform")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"malformed joint spec: {exc}") from exc


def chain_from_config(config: dict) -> KinematicChain:
    """Build and validate a chain from a parsed config mapping."""
    if not isinstance(config, dict) or "joints" not in config:
        raise InvalidConfig("chain config must be a mapping with a joint list")
    joints = tuple(_parse_joint(j) for j in config["joints"])
    name = str(config.get("name", "custom"))
    chain = KinematicChain(
        name=name,
        joints=joints,
        tool_transform=_parse_transform(config.get("tool_transform")),
        parallelogram_pairs=tuple(
            (str(a), str(b)) for a, b in config.get("parallelogram_pairs", [])),
    )
    expected = _PRESET_JOINT_COUNTS.get(name)
    if expected is not None and len(chain) != expected:
        raise InvalidConfig(
            f"preset {name} requires {expected} joints, config has {len(chain)}")
    return chain


def bundled_config_path(kind: str, name: str) -> Path:
    """Path of a bundled data file (chains/rigs/meshes/...)."""
    root = resources.files("ifind_sim").joinpath("data", kind)
    return Path(str(root.joinpath(name)))


def load_chain(preset_or_config) -> KinematicChain:
    """Load a chain from a preset name, a config file path, or a mapping."""
    if isinstance(preset_or_config, dict):
        return chain_from_config(preset_or_config)
    text = str(preset_or_config)
    if text in PRESET_NAMES:
        path = bundled_config_path("chains", f"{text}.yaml")
    else:
        path = Path(text)
        if not path.exists():
            if text.endswith((".yaml", ".yml")) or "/" in text:
                raise InvalidConfig(f"chain config file not found: {text}")
            raise UnknownPreset(
                f"unknown preset {text!r}; bundled presets: {PRESET_NAMES}")
    try:
        config = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"cannot parse chain config {path}: {exc}") from exc
    return chain_from_config(config)


def load_chain_config(preset_or_path) -> dict:
    """Raw config mapping for a preset/path (includes the safety block)."""
    text = str(preset_or_path)
    if text in PRESET_NAMES:
        path = bundled_config_path("chains", f"{text}.yaml")
    else:
        path = Path(text)
        if not path.exists():
            raise UnknownPreset(f"unknown preset or missing file: {text}")
    return yaml.safe_load(path.read_text())
