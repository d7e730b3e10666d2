"""Manifold triangle meshes with adjacency tables and BVH spatial queries.

A `SurfaceMesh` is immutable after `build_mesh`; all queries are read-only.
Positions are meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFaceError, NonManifoldError
from .geometry import closest_point_on_triangle, triangle_area

_DEGENERATE_AREA = 1e-12
_BVH_LEAF_SIZE = 8


@dataclass
class SurfacePoint:
    """A point on a mesh surface: face index plus barycentric coordinates."""

    face: int
    bary: np.ndarray

    def __post_init__(self):
        self.bary = np.asarray(self.bary, dtype=np.float64)
        if self.bary.shape != (3,):
            raise ValueError("barycentric coordinates must have 3 components")
        if abs(float(self.bary.sum()) - 1.0) > 1e-9:
            raise ValueError("barycentric coordinates must sum to 1")
        if np.any(self.bary < -1e-9):
            raise ValueError("barycentric coordinates must be nonnegative")

    def to_dict(self) -> dict:
        return {"face": int(self.face), "bary": [float(x) for x in self.bary]}

    @staticmethod
    def from_dict(d: dict) -> "SurfacePoint":
        return SurfacePoint(int(d["face"]), np.asarray(d["bary"], dtype=np.float64))


@dataclass
class TangentDirection:
    """A unit direction lying in the plane of a surface point's face."""

    base: SurfacePoint
    direction: np.ndarray

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64)


class _Bvh:
    """Static median-split AABB tree over faces for closest-point queries."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        tri = vertices[faces]  # (F, 3, 3)
        self.tri = tri
        lo = tri.min(axis=1)
        hi = tri.max(axis=1)
        centers = tri.mean(axis=1)

        order = np.arange(len(faces))
        # node storage: [lo, hi, left, right, start, count]
        self.node_lo: list[np.ndarray] = []
        self.node_hi: list[np.ndarray] = []
        self.node_children: list[tuple[int, int]] = []
        self.node_range: list[tuple[int, int]] = []

        def build(idx: np.ndarray) -> int:
            node = len(self.node_lo)
            self.node_lo.append(lo[idx].min(axis=0))
            self.node_hi.append(hi[idx].max(axis=0))
            self.node_children.append((-1, -1))
            self.node_range.append((0, 0))
            if len(idx) <= _BVH_LEAF_SIZE:
                start = build.cursor
                order[start:start + len(idx)] = idx
                build.cursor += len(idx)
                self.node_range[node] = (start, len(idx))
                return node
            extent = hi[idx].max(axis=0) - lo[idx].min(axis=0)
            axis = int(np.argmax(extent))
            mid = len(idx) // 2
            part = idx[np.argsort(centers[idx, axis], kind="stable")]
            left = build(part[:mid])
            right = build(part[mid:])
            self.node_children[node] = (left, right)
            return node

        build.cursor = 0
        build(order.copy())
        self.order = order
        self.node_lo = np.array(self.node_lo)
        self.node_hi = np.array(self.node_hi)

    def _box_dist2(self, node: int, p: np.ndarray) -> float:
        d = np.maximum(self.node_lo[node] - p, 0.0) + np.maximum(p - self.node_hi[node], 0.0)
        return float(np.dot(d, d))

    def closest_face(self, p: np.ndarray) -> tuple[int, np.ndarray, np.ndarray, float]:
        """Returns (face, point, barycentric, distance) of the surface point nearest `p`."""
        best = (np.inf, -1, None, None)
        stack = [0]
        while stack:
            node = stack.pop()
            if self._box_dist2(node, p) >= best[0]:
                continue
            left, right = self.node_children[node]
            if left < 0:
                start, count = self.node_range[node]
                for f in self.order[start:start + count]:
                    q, bary = closest_point_on_triangle(self.tri[f], p)
                    d2 = float(np.dot(q - p, q - p))
                    if d2 < best[0] or (d2 == best[0] and f < best[1]):
                        best = (d2, int(f), q, bary)
            else:
                dl = self._box_dist2(left, p)
                dr = self._box_dist2(right, p)
                # visit the nearer child first for tighter pruning
                if dl <= dr:
                    stack.extend((right, left))
                else:
                    stack.extend((left, right))
        d2, f, q, bary = best
        return f, q, bary, float(np.sqrt(d2))


@dataclass
class SurfaceMesh:
    """Triangle mesh with precomputed adjacency; see `build_mesh`."""

    vertices: np.ndarray          # (V, 3) float64
    faces: np.ndarray             # (F, 3) int64
    face_normals: np.ndarray      # (F, 3) unit
    face_areas: np.ndarray        # (F,)
    edges: np.ndarray             # (E, 2) sorted vertex pairs
    edge_faces: np.ndarray        # (E, 2) adjacent faces, -1 for boundary slots
    face_edges: np.ndarray        # (F, 3) edge ids; entry k is edge (v_k, v_{k+1})
    vertex_faces: list            # per vertex: np.ndarray of incident faces
    vertex_component: np.ndarray  # (V,) connected-component label
    _bvh: _Bvh = field(default=None, repr=False)
    _geodesic_graph: object = field(default=None, repr=False)

    @property
    def bvh(self) -> _Bvh:
        if self._bvh is None:
            self._bvh = _Bvh(self.vertices, self.faces)
        return self._bvh

    def with_vertices(self, vertices: np.ndarray) -> "SurfaceMesh":
        """Same topology with new vertex positions (no re-validation).

        Used by posing, where the joint transforms preserve face integrity;
        normals and areas are recomputed, spatial structures rebuilt lazily.
        """
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise ValueError("vertex array shape changed")
        tri = vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        normals = cross / np.maximum(norms, 1e-300)[:, None]
        out = SurfaceMesh(
            vertices=vertices,
            faces=self.faces,
            face_normals=normals,
            face_areas=areas,
            edges=self.edges,
            edge_faces=self.edge_faces,
            face_edges=self.face_edges,
            vertex_faces=self.vertex_faces,
            vertex_component=self.vertex_component,
        )
        out._edge_index = self._edge_index
        return out

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def mean_edge_length(self) -> float:
        e = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.linalg.norm(e, axis=1).mean())

    def is_closed(self) -> bool:
        return bool(np.all(self.edge_faces >= 0))

    def position(self, sp: SurfacePoint) -> np.ndarray:
        """Embed a surface point into 3D."""
        tri = self.vertices[self.faces[sp.face]]
        return tri.T @ sp.bary

    def vertex_point(self, vertex: int) -> SurfacePoint:
        """The surface point at a mesh vertex, hosted on its lowest-index face."""
        face = int(self.vertex_faces[vertex][0])
        bary = np.zeros(3)
        bary[list(self.faces[face]).index(vertex)] = 1.0
        return SurfacePoint(face, bary)

    def faces_containing(self, sp: SurfacePoint, tol: float = 1e-9) -> list[int]:
        """All faces geometrically containing `sp` (its face, plus neighbors
        across any edge/vertex the point sits on)."""
        zero = sp.bary <= tol
        corners = self.faces[sp.face]
        if not zero.any():
            return [sp.face]
        if zero.sum() == 2:
            v = int(corners[np.argmax(~zero)])
            return [int(f) for f in self.vertex_faces[v]]
        k = int(np.argmax(zero))
        # bary k is zero: the point lies on the edge opposite corner k
        a, b = corners[(k + 1) % 3], corners[(k + 2) % 3]
        eid = self._edge_id(int(a), int(b))
        return [int(f) for f in self.edge_faces[eid] if f >= 0]

    def _edge_id(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        return self._edge_index[key]

    def other_face(self, edge_id: int, face: int) -> int:
        """The face across `edge_id` from `face`, or -1 at a boundary."""
        f0, f1 = self.edge_faces[edge_id]
        return int(f1 if f0 == face else f0)

    def same_component(self, a: SurfacePoint, b: SurfacePoint) -> bool:
        va = self.faces[a.face][0]
        vb = self.faces[b.face][0]
        return self.vertex_component[va] == self.vertex_component[vb]


def build_mesh(vertices, faces) -> SurfaceMesh:
    """Validate and index a triangle mesh.

    Raises NonManifoldError for edges with more than two faces, duplicated
    faces, or inconsistent winding; DegenerateFaceError for (near-)zero-area
    faces. Vertex indices must be in range and distinct within each face.
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    if faces.ndim != 2 or faces.shape[1] != 3 or len(faces) < 1:
        raise ValueError("faces must be a non-empty (F, 3) index array")
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError("vertices must be an (V, 3) position array")
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise ValueError("face index out of range")

    seen_faces: set[tuple[int, int, int]] = set()
    directed: set[tuple[int, int]] = set()
    edge_index: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int]] = []
    edge_face_list: list[list[int]] = []
    face_edges = np.empty_like(faces)

    areas = np.empty(len(faces))
    normals = np.empty((len(faces), 3))
    for fi, (a, b, c) in enumerate(faces):
        a, b, c = int(a), int(b), int(c)
        if a == b or b == c or a == c:
            raise DegenerateFaceError(f"face {fi} repeats a vertex")
        key = tuple(sorted((a, b, c)))
        if key in seen_faces:
            raise NonManifoldError(f"face {fi} duplicates another face")
        seen_faces.add(key)
        pa, pb, pc = vertices[a], vertices[b], vertices[c]
        area = triangle_area(pa, pb, pc)
        if area < _DEGENERATE_AREA:
            raise DegenerateFaceError(f"face {fi} has area {area:.3e}")
        areas[fi] = area
        n = np.cross(pb - pa, pc - pa)
        normals[fi] = n / np.linalg.norm(n)
        for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
            if (u, v) in directed:
                raise NonManifoldError(
                    f"directed edge {u}->{v} appears twice (inconsistent winding)")
            directed.add((u, v))
            ekey = (u, v) if u < v else (v, u)
            if ekey not in edge_index:
                edge_index[ekey] = len(edge_list)
                edge_list.append(ekey)
                edge_face_list.append([])
            eid = edge_index[ekey]
            if len(edge_face_list[eid]) >= 2:
                raise NonManifoldError(f"edge {ekey} shared by more than two faces")
            edge_face_list[eid].append(fi)
            face_edges[fi, k] = eid

    edges = np.array(edge_list, dtype=np.int64)
    edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
    for eid, fl in enumerate(edge_face_list):
        edge_faces[eid, :len(fl)] = fl

    vertex_faces: list[list[int]] = [[] for _ in range(len(vertices))]
    for fi, f in enumerate(faces):
        for v in f:
            vertex_faces[int(v)].append(fi)
    vertex_faces = [np.array(sorted(fl), dtype=np.int64) for fl in vertex_faces]

    # connected components over the edge graph
    component = np.full(len(vertices), -1, dtype=np.int64)
    label = 0
    adjacency: list[list[int]] = [[] for _ in range(len(vertices))]
    for (u, v) in edge_list:
        adjacency[u].append(v)
        adjacency[v].append(u)
    for seed in range(len(vertices)):
        if component[seed] >= 0 or len(vertex_faces[seed]) == 0:
            continue
        stack = [seed]
        component[seed] = label
        while stack:
            u = stack.pop()
            for w in adjacency[u]:
                if component[w] < 0:
                    component[w] = label
                    stack.append(w)
        label += 1

    mesh = SurfaceMesh(
        vertices=vertices,
        faces=faces,
        face_normals=normals,
        face_areas=areas,
        edges=edges,
        edge_faces=edge_faces,
        face_edges=face_edges,
        vertex_faces=vertex_faces,
        vertex_component=component,
    )
    mesh._edge_index = edge_index
    return mesh


def closest_surface_point(mesh: SurfaceMesh, query) -> tuple[SurfacePoint, float]:
    """Closest point on the surface to an arbitrary 3D query point.

    BVH-accelerated; exact (matches exhaustive per-face minimization).
    """
    p = np.asarray(query, dtype=np.float64)
    face, _, bary, dist = mesh.bvh.closest_face(p)
    bary = np.clip(bary, 0.0, 1.0)
    bary = bary / bary.sum()
    return SurfacePoint(face, bary), dist
