"""Procedural test meshes: planes, icospheres, subdivided boxes.

These are desk-scale assets used by the test suite, the synthetic fitting
scenarios, and the annotation-service demo sessions.
"""

from __future__ import annotations

import numpy as np

from .mesh import SurfaceMesh, build_mesh


def unit_square() -> SurfaceMesh:
    """Two triangles forming the unit square in the z=0 plane, normal +z."""
    vertices = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
    ])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return build_mesh(vertices, faces)


def plane_grid(nx: int = 10, ny: int = 10, size: float = 1.0,
               center: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Regular triangulated grid in the z-plane with normals facing +z.

    Spans `size` in both x and y around `center`.
    """
    cx, cy, cz = center
    xs = np.linspace(cx - size / 2.0, cx + size / 2.0, nx + 1)
    ys = np.linspace(cy - size / 2.0, cy + size / 2.0, ny + 1)
    verts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            verts.append([xs[i], ys[j], cz])

    def vid(i, j):
        return j * (nx + 1) + i

    faces = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return build_mesh(np.array(verts), np.array(faces))


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=np.float64)

_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def icosphere(subdivisions: int = 2, radius: float = 1.0,
              center: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Geodesic sphere from a subdivided icosahedron.

    Face count is 20 * 4**subdivisions (0 -> 20, 2 -> 320, 3 -> 1280).
    """
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint_cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        next_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = next_faces

    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return build_mesh(v, np.array(faces))


# Per box side: fixed axis, sign, and the two in-plane axes (u, v) chosen so
# that cross(u_dir, v_dir) points outward.
_BOX_SIDES = [
    (0, +1, 1, 2),
    (0, -1, 2, 1),
    (1, +1, 2, 0),
    (1, -1, 0, 2),
    (2, +1, 0, 1),
    (2, -1, 1, 0),
]


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), divisions: int = 1) -> SurfaceMesh:
    """Closed axis-aligned box with each side split into divisions^2 quads.

    Shared edges are welded, so the result is a single closed manifold
    component with outward-facing normals.
    """
    size = np.asarray(size, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    lo = center - size / 2.0
    hi = center + size / 2.0
    n = divisions

    verts: list[np.ndarray] = []
    index_of: dict[tuple[float, float, float], int] = {}

    def add_vertex(p: np.ndarray) -> int:
        key = tuple(np.round(p, 9))
        if key not in index_of:
            index_of[key] = len(verts)
            verts.append(p)
        return index_of[key]

    faces = []
    for fixed_axis, sign, u_axis, v_axis in _BOX_SIDES:
        fixed_val = hi[fixed_axis] if sign > 0 else lo[fixed_axis]
        u_vals = np.linspace(lo[u_axis], hi[u_axis], n + 1)
        v_vals = np.linspace(lo[v_axis], hi[v_axis], n + 1)
        grid = np.empty((n + 1, n + 1), dtype=np.int64)
        for i in range(n + 1):
            for j in range(n + 1):
                p = np.empty(3)
                p[fixed_axis] = fixed_val
                p[u_axis] = u_vals[i]
                p[v_axis] = v_vals[j]
                grid[i, j] = add_vertex(p)
        for i in range(n):
            for j in range(n):
                a, b = grid[i, j], grid[i + 1, j]
                c, d = grid[i + 1, j + 1], grid[i, j + 1]
                faces.append([a, b, c])
                faces.append([a, c, d])
    return build_mesh(np.array(verts), np.array(faces))
