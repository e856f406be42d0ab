#!/usr/bin/env python3
"""Author the bundled phantom mesh, its manifest and the standard views.

The phantom stands in for a scanned abdominal surface: a closed half
ellipsoid (semi-axes 0.18 / 0.14 / 0.10 m) resting on the bed plane z=0,
centered on the origin. Regenerating is deterministic; the manifest
records vertex/triangle counts, the bounding box and a sha256 of the
mesh file so tests can detect accidental edits.

Run from the repo root:  python scripts/make_phantom_data.py
"""

import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ifind_sim.surface import closest_point, load_mesh, mesh_from_arrays, save_mesh

SEMI_AXES = (0.18, 0.14, 0.10)
N_RINGS = 12    # polar subdivisions apex -> equator
N_SEGMENTS = 48  # azimuthal subdivisions

DATA = Path(__file__).resolve().parents[1] / "src" / "ifind_sim" / "data"

# Seed points (x, y) for the seven standard views; pushed onto the mesh
# below. Liver/pancreas/aorta targets sit central/cranial where the
# robots reach well; gallbladder/kidney sit on the flank/caudal side.
VIEW_SEEDS = {
    "pancreas TS": (0.03, 0.00),
    "left lobe liver TS": (0.06, 0.05),
    "right lobe liver TS": (0.06, -0.06),
    "right lobe liver with right kidney": (0.02, -0.10),
    "gallbladder LS": (-0.03, -0.08),
    "aorta at coeliac axis": (0.05, 0.01),
    "aorta mid-abdominal": (-0.03, 0.01),
}


def build_half_ellipsoid():
    a, b, c = SEMI_AXES
    vertices = [(0.0, 0.0, c)]  # apex
    for i in range(1, N_RINGS + 1):
        theta = (math.pi / 2.0) * i / N_RINGS
        for j in range(N_SEGMENTS):
            phi = 2.0 * math.pi * j / N_SEGMENTS
            vertices.append((a * math.sin(theta) * math.cos(phi),
                             b * math.sin(theta) * math.sin(phi),
                             c * math.cos(theta)))
    base_center = len(vertices)
    vertices.append((0.0, 0.0, 0.0))

    def ring(i, j):
        return 1 + (i - 1) * N_SEGMENTS + (j % N_SEGMENTS)

    faces = []
    for j in range(N_SEGMENTS):  # apex fan
        faces.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, N_RINGS):  # quad strips
        for j in range(N_SEGMENTS):
            faces.append((ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)))
            faces.append((ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)))
    for j in range(N_SEGMENTS):  # base disk, wound to face -z
        faces.append((base_center, ring(N_RINGS, j + 1), ring(N_RINGS, j)))
    return np.array(vertices), np.array(faces, dtype=np.int64)


def main():
    vertices, faces = build_half_ellipsoid()
    mesh = mesh_from_arrays(vertices, faces)
    mesh_path = DATA / "meshes" / "phantom-abdomen.off"
    save_mesh(mesh, mesh_path)

    digest = hashlib.sha256(mesh_path.read_bytes()).hexdigest()
    lo, hi = mesh.bounding_box()
    manifest = {
        "name": "phantom-abdomen",
        "semi_axes_m": list(SEMI_AXES),
        "vertex_count": int(len(mesh.vertices)),
        "triangle_count": int(len(mesh.triangles)),
        "bounding_box_min": [float(x) for x in lo],
        "bounding_box_max": [float(x) for x in hi],
        "sha256": digest,
    }
    manifest_path = DATA / "meshes" / "phantom-abdomen.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True)
                             + "\n")

    views = {}
    for name, (x, y) in VIEW_SEEDS.items():
        point, normal, _ = closest_point(mesh, np.array([x, y, 0.2]))
        views[name] = {
            "surface_point": [float(v) for v in point],
            "normal": [float(v) for v in normal],
            "indentation": 0.004,
            "axial_roll": 0.0,
            "position_tolerance": 0.02,
            "orientation_tolerance": 0.35,
            "force_window": [2.0, 12.0],
        }
    views_path = DATA / "views" / "standard-views.yaml"
    views_path.write_text(yaml.safe_dump({"views": views}, sort_keys=True))

    reloaded = load_mesh(mesh_path)
    assert len(reloaded.vertices) == manifest["vertex_count"]
    print(f"wrote {mesh_path.name}: {manifest['vertex_count']} vertices, "
          f"{manifest['triangle_count']} triangles, sha256={digest[:12]}...")
    print(f"wrote {views_path.name}: {len(views)} views")


if __name__ == "__main__":
    main()
