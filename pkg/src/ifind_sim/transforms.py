"""Rigid-body transforms, rotations and poses.

Conventions used throughout the simulator:

* quaternions are ``(w, x, y, z)``, unit norm;
* a :class:`RigidTransform` maps a point ``p`` to ``R @ p + t``;
* rotation vectors (axis * angle) use the right-hand rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-9


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix about a unit axis (Rodrigues formula)."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation from roll/pitch/yaw (applied as Rz(yaw) @ Ry(pitch) @ Rx(roll))."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix (Shepperd's method)."""
    t = np.trace(r)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    q /= np.linalg.norm(q)
    # Canonical sign keeps serialized poses reproducible.
    if q[0] < 0.0:
        q = -q
    return q


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the relative rotation between two unit quaternions (rad)."""
    d = abs(float(np.dot(a, b)))
    d = min(1.0, d)
    return 2.0 * math.acos(d)


def quat_slerp(a: np.ndarray, b: np.ndarray, frac: float) -> np.ndarray:
    """Spherical interpolation from ``a`` to ``b`` along the short arc."""
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if d > 1.0 - 1e-12:
        out = a + frac * (b - a)
        return out / np.linalg.norm(out)
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    out = (math.sin((1.0 - frac) * theta) * a
           + math.sin(frac * theta) * b) / s
    return out / np.linalg.norm(out)


def rotvec_from_matrix(r: np.ndarray) -> np.ndarray:
    """Logarithm map: rotation vector (axis * angle) of a rotation matrix."""
    t = np.trace(r)
    cos_angle = max(-1.0, min(1.0, (t - 1.0) / 2.0))
    angle = math.acos(cos_angle)
    if angle < 1e-10:
        # First-order approximation near identity.
        return 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0],
                               r[1, 0] - r[0, 1]])
    if angle > math.pi - 1e-6:
        # Near pi the skew part vanishes; recover the axis from the
        # symmetric part instead.
        a = np.sqrt(np.maximum(0.0, (np.diag(r) + 1.0) / 2.0))
        # Fix signs using the largest component.
        i = int(np.argmax(a))
        if a[i] < 1e-12:
            return np.zeros(3)
        signs = np.ones(3)
        for j in range(3):
            if j != i:
                signs[j] = np.sign(r[i, j] + r[j, i]) or 1.0
        axis = a * signs
        if a[i] > 0:
            axis *= np.sign(r[(i + 2) % 3, (i + 1) % 3]
                            - r[(i + 1) % 3, (i + 2) % 3]) or 1.0
        axis /= np.linalg.norm(axis)
        return axis * angle
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    axis /= (2.0 * math.sin(angle))
    return axis * angle


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; composes with ``@`` and applies with ``apply``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_translation(t) -> "RigidTransform":
        return RigidTransform(np.eye(3), np.asarray(t, dtype=float))

    @staticmethod
    def from_rpy(rpy, t=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(rpy_matrix(*rpy), np.asarray(t, dtype=float))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def to_pose(self) -> "Pose":
        return Pose(self.translation.copy(), quat_from_matrix(self.rotation))


@dataclass(frozen=True)
class Pose:
    """Position (m) plus unit quaternion orientation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > _UNIT_TOL:
            raise ValueError("pose orientation is not a unit quaternion")
        object.__setattr__(self, "orientation", q)

    def rotation_matrix(self) -> np.ndarray:
        return matrix_from_quat(self.orientation)

    def to_transform(self) -> RigidTransform:
        return RigidTransform(self.rotation_matrix(), self.position.copy())

    def z_axis(self) -> np.ndarray:
        """Third column of the rotation matrix (the probe axis by convention)."""
        return self.rotation_matrix()[:, 2]
