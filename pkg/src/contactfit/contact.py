"""Contact patches, their geodesic axes, and two-click transfer.

A patch is an edge-connected set of contact vertices. Its axis is a geodesic
polyline spanning the patch along the first principal component of the member
positions; every member vertex is then encoded as (t, d, alpha): arclength of
its closest axis point, geodesic distance, and tangent-plane angle. Unpacking
the axis on another mesh from a start point and a click direction transfers
the whole patch and yields bijective vertex-to-point correspondences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateDirectionError, DegeneratePatchError, TracingStuckError
from .geodesics import (
    GeodesicPath,
    exp_map,
    geodesic_graph,
    initial_direction,
    log_map,
    shortest_geodesic_path,
    trace_straightest_geodesic,
)
from .geometry import normalize, project_to_plane
from .mesh import SurfaceMesh, SurfacePoint, TangentDirection, closest_surface_point


@dataclass
class ContactPatch:
    mesh: SurfaceMesh
    vertices: tuple
    patch_id: int


@dataclass
class ContactAxis:
    """Open geodesic polyline with an arclength table and a start tangent."""

    path: GeodesicPath
    start_tangent: np.ndarray
    arclengths: np.ndarray

    @property
    def length(self) -> float:
        return float(self.arclengths[-1])

    def point_at(self, mesh: SurfaceMesh, t: float):
        """Surface point and unit tangent of the axis at arclength `t`."""
        t = min(max(float(t), 0.0), self.length)
        cum = self.arclengths
        i = int(np.searchsorted(cum, t, side="right")) - 1
        i = min(max(i, 0), len(cum) - 2)
        # skip zero-length segments
        while cum[i + 1] - cum[i] < 1e-15 and i + 2 < len(cum):
            i += 1
        seg = cum[i + 1] - cum[i]
        frac = 0.0 if seg < 1e-15 else (t - cum[i]) / seg
        p = self.path.points[i] + frac * (self.path.points[i + 1] - self.path.points[i])
        face = self.path.segment_faces[i]
        from .geodesics import _bary_in_face

        sp = SurfacePoint(face, _bary_in_face(mesh, face, p))
        tangent = normalize(self.path.points[i + 1] - self.path.points[i])
        return sp, tangent


@dataclass
class ParamPatch:
    """Per-vertex (t, d, alpha) records of a patch relative to its axis."""

    patch_id: int
    axis_length: float
    records: list  # (vertex, t, d, alpha)


@dataclass
class CorrespondenceSet:
    """Bijective body-vertex to object-surface-point pairs."""

    pairs: list  # (vertex index, SurfacePoint)
    patch_ids: tuple = ()
    dropped: tuple = ()

    def __post_init__(self):
        seen = set()
        for v, _ in self.pairs:
            if v in seen:
                raise ValueError(f"body vertex {v} appears twice in correspondence set")
            seen.add(v)

    @property
    def vertices(self) -> list:
        return [v for v, _ in self.pairs]

    def object_points(self, mesh: SurfaceMesh) -> np.ndarray:
        return np.array([mesh.position(p) for _, p in self.pairs])


def extract_patches(mesh: SurfaceMesh, contact_vertices) -> list[ContactPatch]:
    """Partition contact vertices into edge-connected components.

    Components are ordered by their smallest member index; empty input yields
    an empty list.
    """
    members = {int(v) for v in contact_vertices}
    if not members:
        return []
    for v in members:
        if v < 0 or v >= mesh.n_vertices:
            raise ValueError(f"contact vertex {v} out of range")
    adj: dict[int, list[int]] = {v: [] for v in members}
    for a, b in mesh.edges:
        a, b = int(a), int(b)
        if a in members and b in members:
            adj[a].append(b)
            adj[b].append(a)
    seen: set[int] = set()
    comps = []
    for seed in sorted(members):
        if seed in seen:
            continue
        comp = {seed}
        stack = [seed]
        seen.add(seed)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.add(w)
                    stack.append(w)
        comps.append(tuple(sorted(comp)))
    comps.sort(key=lambda c: c[0])
    return [ContactPatch(mesh, c, i) for i, c in enumerate(comps)]


def synthesize_axis(mesh: SurfaceMesh, patch: ContactPatch) -> ContactAxis:
    """Axis from PCA of the member positions.

    Endpoints are the extreme projections onto the first principal component,
    projected back to the surface; the axis is the shortest geodesic between
    them. The component sign is fixed so the smallest member index projects
    nonpositively.
    """
    if len(patch.vertices) < 2:
        raise DegeneratePatchError("patch needs at least two vertices")
    P = mesh.vertices[list(patch.vertices)]
    mean = P.mean(axis=0)
    Q = P - mean
    if float(np.linalg.norm(Q, axis=1).max()) < 1e-9:
        raise DegeneratePatchError("patch vertices coincide")
    cov = Q.T @ Q
    _, eigvecs = np.linalg.eigh(cov)
    pc = eigvecs[:, -1]
    anchor = mesh.vertices[min(patch.vertices)] - mean
    if float(np.dot(anchor, pc)) > 0.0:
        pc = -pc
    proj = Q @ pc
    p_start = mean + float(proj.min()) * pc
    p_end = mean + float(proj.max()) * pc
    sp_start, _ = closest_surface_point(mesh, p_start)
    sp_end, _ = closest_surface_point(mesh, p_end)
    path = shortest_geodesic_path(mesh, sp_start, sp_end)
    if path.length < 1e-9:
        raise DegeneratePatchError("axis collapsed to a point")
    tangent = initial_direction(mesh, path, sp_start.face)
    tangent = normalize(project_to_plane(tangent, mesh.face_normals[sp_start.face]))
    return ContactAxis(path, tangent, path.cumulative_lengths())


def _axis_samples(mesh: SurfaceMesh, axis: ContactAxis):
    spacing = mesh.mean_edge_length / 2.0
    n = max(int(np.ceil(axis.length / spacing)) + 1, 2)
    ts = np.linspace(0.0, axis.length, n)
    return ts, [axis.point_at(mesh, t)[0] for t in ts], spacing


def parameterize_patch(mesh: SurfaceMesh, patch: ContactPatch,
                       axis: ContactAxis) -> ParamPatch:
    """Encode every patch vertex as (t, d, alpha) against the axis.

    The closest axis point is found over a dense arclength sampling (spacing
    = half the mean edge length) by graph distance, then refined with a
    parabolic fit; (d, alpha) come from the log map at that point.
    """
    graph = geodesic_graph(mesh)
    ts, samples, spacing = _axis_samples(mesh, axis)
    groups = []
    for sp in samples:
        pos = mesh.position(sp)
        g: dict[int, float] = {}
        for f in mesh.faces_containing(sp):
            for n in graph.face_nodes[f]:
                n = int(n)
                w = float(np.linalg.norm(pos - graph.positions[n]))
                if w < g.get(n, np.inf):
                    g[n] = w
        groups.append(g)
    margin = 4.0 * spacing

    records = []
    for v in sorted(patch.vertices):
        totals = graph.distances_to_groups([(int(v), 0.0)], groups, margin)
        j = int(np.argmin(totals))
        t_hat = _refine_parameter(ts, totals, j)
        base_sp, base_tan = axis.point_at(mesh, t_hat)
        d, alpha = log_map(mesh, base_sp, base_tan, mesh.vertex_point(int(v)))
        records.append((int(v), float(t_hat), float(d), float(alpha)))
    return ParamPatch(patch.patch_id, axis.length, records)


def _refine_parameter(ts, totals, j) -> float:
    if j == 0 or j == len(ts) - 1:
        return float(ts[j])
    y0, y1, y2 = totals[j - 1] ** 2, totals[j] ** 2, totals[j + 1] ** 2
    if not np.isfinite(y0) or not np.isfinite(y2):
        return float(ts[j])
    denom = y0 - 2.0 * y1 + y2
    if denom <= 1e-18:
        return float(ts[j])
    h = ts[j] - ts[j - 1]
    t = ts[j] + 0.5 * h * (y0 - y2) / denom
    return float(min(max(t, ts[j - 1]), ts[j + 1]))


def unpack_axis(target_mesh: SurfaceMesh, source_axis: ContactAxis,
                start: SurfacePoint, click_direction) -> ContactAxis:
    """Re-trace the source axis on a target mesh from a two-click placement.

    The initial tangent is the click direction projected into the start face
    plane; the traced arclength equals the source axis length.
    """
    n = target_mesh.face_normals[start.face]
    raw = np.asarray(click_direction, dtype=np.float64) - target_mesh.position(start)
    d = project_to_plane(raw, n)
    nrm = float(np.linalg.norm(d))
    if nrm < 1e-9:
        raise DegenerateDirectionError("click direction projects to zero length")
    d = d / nrm
    path = trace_straightest_geodesic(target_mesh, TangentDirection(start, d),
                                      source_axis.length)
    return ContactAxis(path, d, path.cumulative_lengths())


def transfer_patch(target_mesh: SurfaceMesh, param: ParamPatch,
                   target_axis: ContactAxis):
    """Map every (t, d, alpha) record onto the target axis via the exp map.

    Returns (points, correspondences); vertices whose trace gets stuck are
    dropped from the set and recorded in `dropped`.
    """
    if abs(target_axis.length - param.axis_length) > 1e-6:
        raise ValueError("target axis length does not match the parameterization")
    points = []
    pairs = []
    dropped = []
    for (v, t, d, alpha) in param.records:
        base_sp, base_tan = target_axis.point_at(target_mesh, t)
        try:
            p = exp_map(target_mesh, base_sp, base_tan, d, alpha)
        except TracingStuckError:
            dropped.append(int(v))
            continue
        points.append(p)
        pairs.append((int(v), p))
    cs = CorrespondenceSet(pairs, (param.patch_id,), tuple(dropped))
    return points, cs


def merge_correspondences(sets: list[CorrespondenceSet]) -> CorrespondenceSet:
    """Union of per-patch correspondence sets; a vertex keeps its first pair."""
    pairs = []
    seen = set()
    dropped: list[int] = []
    ids: list[int] = []
    for cs in sets:
        ids.extend(cs.patch_ids)
        dropped.extend(cs.dropped)
        for v, p in cs.pairs:
            if v not in seen:
                seen.add(v)
                pairs.append((v, p))
    return CorrespondenceSet(pairs, tuple(ids), tuple(dropped))


def project_contacts(source_mesh: SurfaceMesh, target_mesh: SurfaceMesh,
                     contact_vertices) -> set[int]:
    """Map contact vertices to the nearest target-mesh vertices (deduplicated)."""
    members = sorted({int(v) for v in contact_vertices})
    if not members:
        return set()
    tree = cKDTree(target_mesh.vertices)
    _, idx = tree.query(source_mesh.vertices[members])
    return {int(i) for i in idx}
