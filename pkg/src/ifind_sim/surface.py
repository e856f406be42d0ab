"""Scanned-surface model: mesh ingestion, contact poses, sweeps, raycasts.

Meshes arrive as ASCII OFF files (the scanner pipeline is out of scope;
a scanned abdominal surface is represented by the bundled half-ellipsoid
phantom). All queries are read-only and vectorized over triangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMesh, EmptyPath, OffSurface, ParseError
from .transforms import Pose, quat_from_matrix, rotation_about_axis

_MIN_TRIANGLE_AREA = 1e-12
_ON_SURFACE_TOL = 1e-6
_ENDPOINT_TOL = 0.05  # sweep endpoints must project within 5 cm


@dataclass(frozen=True)
class SurfaceMesh:
    """Immutable triangle mesh with outward unit vertex normals."""

    vertices: np.ndarray       # (n, 3) float
    triangles: np.ndarray      # (m, 3) int
    vertex_normals: np.ndarray  # (n, 3) float, unit, outward

    # Cached per-triangle data for the vectorized queries.
    _tri_normals: np.ndarray = field(repr=False, default=None)
    _tri_vertices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise DegenerateMesh("triangle index out of range")
        tv = v[t]                                   # (m, 3, 3)
        cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        if (areas < _MIN_TRIANGLE_AREA).any():
            raise DegenerateMesh("zero-area triangle")
        object.__setattr__(self, "_tri_vertices", tv)
        object.__setattr__(self, "_tri_normals",
                           cross / np.linalg.norm(cross, axis=1)[:, None])
        object.__setattr__(self, "vertex_normals",
                           np.asarray(self.vertex_normals, dtype=float))

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class ContactPose:
    """Probe-on-surface contact: point, outward normal, indentation, roll."""

    surface_point: np.ndarray
    normal: np.ndarray
    indentation: float = 0.0
    axial_roll: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "surface_point",
                           np.asarray(self.surface_point, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("contact normal must be unit length")
        object.__setattr__(self, "normal", n)
        if self.indentation < 0.0:
            raise ValueError("indentation must be >= 0")


@dataclass(frozen=True)
class SweepPath:
    """Ordered contact waypoints with a max arc-length spacing bound."""

    waypoints: tuple[ContactPose, ...]
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise EmptyPath("sweep needs at least two waypoints")
        pts = np.array([w.surface_point for w in self.waypoints])
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if (gaps > self.spacing + 1e-12).any():
            raise ValueError("waypoint spacing bound violated")

    def surface_points(self) -> np.ndarray:
        return np.array([w.surface_point for w in self.waypoints])


# ---------------------------------------------------------------------------
# OFF file I/O


def _recompute_normals(vertices: np.ndarray,
                       triangles: np.ndarray) -> np.ndarray:
    tv = vertices[triangles]
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    # `cross` is 2*area times the unit normal: summing is area weighting.
    flat = triangles.reshape(-1)
    normals = np.empty_like(vertices)
    for c in range(3):
        normals[:, c] = np.bincount(flat,
                                    weights=np.repeat(cross[:, c], 3),
                                    minlength=len(vertices))
    lengths = np.linalg.norm(normals, axis=1)
    lengths[lengths == 0.0] = 1.0
    return normals / lengths[:, None]


def mesh_from_arrays(vertices, triangles) -> SurfaceMesh:
    """Validate arrays and build a mesh with recomputed outward normals."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if triangles.size and (triangles.min() < 0
                           or triangles.max() >= len(vertices)):
        raise DegenerateMesh("triangle index out of range")
    normals = _recompute_normals(vertices, triangles)
    # Orient outward: flip everything when the winding points at the centroid.
    centroid = vertices.mean(axis=0)
    votes = np.einsum("ij,ij->i", normals, vertices - centroid)
    if votes.sum() < 0.0:
        triangles = triangles[:, ::-1].copy()
        normals = -normals
    return SurfaceMesh(vertices, triangles, normals)


def load_mesh(path) -> SurfaceMesh:
    """Parse an ASCII OFF file into a validated mesh."""
    try:
        text = open(path).read()
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    try:
        nv, nf, _ = (int(x) for x in lines[1].split())
        rows = lines[2:2 + nv + nf]
        vertices = np.array([[float(x) for x in row.split()]
                             for row in rows[:nv]])
        faces = []
        for row in rows[nv:nv + nf]:
            parts = row.split()
            if int(parts[0]) != 3:
                raise ParseError(f"{path}: only triangle faces supported")
            faces.append([int(parts[1]), int(parts[2]), int(parts[3])])
        if len(faces) != nf or len(vertices) != nv:
            raise ParseError(f"{path}: truncated OFF file")
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed OFF file: {exc}") from exc
    return mesh_from_arrays(vertices, np.array(faces, dtype=np.int64))


def save_mesh(mesh: SurfaceMesh, path) -> None:
    """Write ASCII OFF. `repr` floats round-trip bit-identically."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"3 {int(t[0])} {int(t[1])} {int(t[2])}\n")


# ---------------------------------------------------------------------------
# Geometry queries


def _closest_points_all_triangles(mesh: SurfaceMesh,
                                  p: np.ndarray) -> np.ndarray:
    """Closest point to ``p`` on every triangle (vectorized Ericson)."""
    tv = mesh._tri_vertices
    a, b, c = tv[:, 0], tv[:, 1], tv[:, 2]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    def assign(mask, value):
        todo = mask & ~done
        out[todo] = value[todo] if value.ndim == 2 else value
        done[todo] = True

    assign((d1 <= 0) & (d2 <= 0), a)                        # vertex A
    assign((d3 >= 0) & (d4 <= d3), b)                       # vertex B
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v_ab[:, None] * ab)
        assign((d6 >= 0) & (d5 <= d6), c)                   # vertex C
        w_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w_ac[:, None] * ac)
        denom_bc = (d4 - d3) + (d5 - d6)
        w_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
        assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
               b + w_bc[:, None] * (c - b))
        denom = va + vb + vc
        denom[denom == 0.0] = 1.0
        v = vb / denom
        w = vc / denom
        assign(np.ones(len(a), dtype=bool),
               a + v[:, None] * ab + w[:, None] * ac)       # face interior
    return out


def closest_point(mesh: SurfaceMesh,
                  p) -> tuple[np.ndarray, np.ndarray, int]:
    """Closest surface point to ``p``: (point, outward normal, triangle id).

    Exact over all triangles; ties break to the lowest triangle id.
    """
    p = np.asarray(p, dtype=float)
    candidates = _closest_points_all_triangles(mesh, p)
    d = np.sqrt(np.einsum("ij,ij->i", candidates - p, candidates - p))
    # Shared-edge/vertex minima differ only in roundoff across adjacent
    # triangles; treat anything within 1e-15 m as a tie and take the
    # lowest id.
    tid = int(np.nonzero(d <= d.min() + 1e-15)[0][0])
    return candidates[tid].copy(), mesh._tri_normals[tid].copy(), tid


def raycast(mesh: SurfaceMesh, origin, direction) -> float | None:
    """Distance to the nearest triangle hit along ``direction``, or None.

    Watertight enough for probe-axis proximity checks: vectorized
    Moller-Trumbore over every triangle, nearest strictly-positive t.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("raycast direction must be a unit vector")
    tv = mesh._tri_vertices
    v0 = tv[:, 0]
    e1 = tv[:, 1] - v0
    e2 = tv[:, 2] - v0
    h = np.cross(np.broadcast_to(direction, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(np.abs(det) > 1e-14, 1.0 / det, 0.0)
        s = origin - v0
        u = inv * np.einsum("ij,ij->i", s, h)
        qv = np.cross(s, e1)
        v = inv * (qv @ direction)
        t = inv * np.einsum("ij,ij->i", e2, qv)
    hit = ((np.abs(det) > 1e-14) & (u >= -1e-12) & (v >= -1e-12)
           & (u + v <= 1.0 + 1e-12) & (t > 1e-12))
    if not hit.any():
        return None
    return float(t[hit].min())


def _tangent_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal tangent pair for a unit normal."""
    ref = np.array([1.0, 0.0, 0.0])
    if abs(normal @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    t1 = ref - (ref @ normal) * normal
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return t1, t2


def pose_from_contact(contact: ContactPose) -> Pose:
    """Probe pose implied by a contact: axis anti-parallel to the normal.

    The pose's local +z axis (the probe axis) points into the surface and
    the tip sits ``indentation`` below the surface point.
    """
    n = contact.normal
    z = -n
    t1, t2 = _tangent_basis(n)
    rot = np.column_stack([t1, np.cross(z, t1), z])
    if contact.axial_roll:
        rot = rot @ rotation_about_axis(np.array([0.0, 0.0, 1.0]),
                                        contact.axial_roll)
    tip = contact.surface_point - contact.indentation * n
    return Pose(tip, quat_from_matrix(rot))


def probe_pose_at(mesh: SurfaceMesh, contact: ContactPose) -> Pose:
    """Pose for a contact after checking it actually lies on the mesh."""
    cp, _, _ = closest_point(mesh, contact.surface_point)
    if np.linalg.norm(cp - contact.surface_point) > _ON_SURFACE_TOL:
        raise OffSurface("contact point is not on the mesh surface")
    return pose_from_contact(contact)


def generate_sweep(mesh: SurfaceMesh, start, end, spacing: float,
                   indentation: float = 0.0,
                   axial_roll: float = 0.0) -> SweepPath:
    """Project the start->end segment onto the mesh and bound the spacing.

    Uniform samples of the segment are pulled to their closest surface
    points; gaps wider than ``spacing`` are subdivided (in segment
    parameter space) until the bound holds. Waypoint normals come from
    the containing triangle. Roll is held constant along the path.
    """
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    if np.linalg.norm(end - start) < 1e-12:
        raise EmptyPath("sweep start and end coincide")
    for name, p in (("start", start), ("end", end)):
        cp, _, _ = closest_point(mesh, p)
        if np.linalg.norm(cp - p) > _ENDPOINT_TOL:
            raise OffSurface(f"sweep {name} point is too far from the mesh "
                             "(> 5 cm)")
    length = float(np.linalg.norm(end - start))
    n0 = max(2, math.ceil(length / spacing) + 1)
    params = list(np.linspace(0.0, 1.0, n0))

    def project(t):
        p = start + t * (end - start)
        cp, normal, _tid = closest_point(mesh, p)
        return cp, normal

    projected = [project(t) for t in params]
    for _ in range(32):
        gaps = [np.linalg.norm(projected[i + 1][0] - projected[i][0])
                for i in range(len(projected) - 1)]
        if max(gaps) <= spacing + 1e-12:
            break
        new_params: list[float] = []
        new_projected = []
        for i, gap in enumerate(gaps):
            new_params.append(params[i])
            new_projected.append(projected[i])
            if gap > spacing + 1e-12:
                mid = 0.5 * (params[i] + params[i + 1])
                new_params.append(mid)
                new_projected.append(project(mid))
        new_params.append(params[-1])
        new_projected.append(projected[-1])
        params, projected = new_params, new_projected
    else:
        raise EmptyPath("sweep subdivision failed to satisfy spacing bound")

    waypoints = [ContactPose(cp, normal, indentation, axial_roll)
                 for cp, normal in projected]
    return SweepPath(tuple(waypoints), spacing)


def resample_sweep(mesh: SurfaceMesh, path: SweepPath,
                   count: int) -> SweepPath:
    """Resample a sweep to exactly ``count`` waypoints by arc length."""
    if count < 2:
        raise EmptyPath("resample needs at least two waypoints")
    pts = path.surface_points()
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cum[-1], count)
    waypoints = []
    ref = path.waypoints[0]
    for s in targets:
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(seg) - 1)
        frac = 0.0 if seg[i] == 0 else (s - cum[i]) / seg[i]
        p = pts[i] + frac * (pts[i + 1] - pts[i])
        cp, normal, _ = closest_point(mesh, p)
        waypoints.append(ContactPose(cp, normal, ref.indentation,
                                     ref.axial_roll))
    spacing = max(path.spacing,
                  float(np.linalg.norm(
                      np.diff(np.array([w.surface_point for w in waypoints]),
                              axis=0), axis=1).max()) + 1e-12)
    return SweepPath(tuple(waypoints), spacing)
