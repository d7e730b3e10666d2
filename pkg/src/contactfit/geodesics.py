"""Discrete geodesics on triangle meshes.

Two primitives back everything else here:

* straightest-geodesic tracing: walk inside a face and unfold across each
  crossed edge, so the path is straight in every local unfolding;
* locally shortest paths: Dijkstra over the mesh graph augmented with Steiner
  points on edges, then exact shortening of the crossed face strip with a
  funnel pass, rerouting around vertices whose unfolded corner angle admits a
  shortcut.

The surface log/exp maps are thin wrappers over those primitives.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedError, TracingStuckError
from .geometry import (
    barycentric_coordinates,
    normalize,
    project_to_plane,
    rotate_about_axis,
    signed_angle,
)
from .mesh import SurfaceMesh, SurfacePoint, TangentDirection

_STEINER_FRACS = (0.25, 0.5, 0.75)
_COINCIDENT = 1e-12
_VERTEX_HIT = 1e-9


@dataclass
class GeodesicPath:
    """Polyline on a mesh: endpoints plus every triangle-edge crossing.

    `segment_faces[i]` is the face containing the segment from `waypoints[i]`
    to `waypoints[i+1]`.
    """

    waypoints: list
    points: np.ndarray
    length: float
    segment_faces: list = field(default_factory=list)

    def cumulative_lengths(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


# ---------------------------------------------------------------------------
# face-local helpers


def _edges_at_vertex(mesh: SurfaceMesh, face: int, v: int) -> list[int]:
    return [int(e) for e in mesh.face_edges[face] if v in mesh.edges[int(e)]]


def _edge_dir_from(mesh: SurfaceMesh, v: int, eid: int):
    a, b = mesh.edges[eid]
    other = int(b if a == v else a)
    vec = mesh.vertices[other] - mesh.vertices[v]
    length = float(np.linalg.norm(vec))
    return vec / length, length, other


def _wedge_angle(mesh: SurfaceMesh, face: int, v: int) -> float:
    e1, e2 = _edges_at_vertex(mesh, face, v)
    g1 = _edge_dir_from(mesh, v, e1)[0]
    g2 = _edge_dir_from(mesh, v, e2)[0]
    return float(np.arccos(np.clip(np.dot(g1, g2), -1.0, 1.0)))


def _angle_between(u: np.ndarray, w: np.ndarray) -> float:
    return float(np.arccos(np.clip(np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w)),
                                   -1.0, 1.0)))


def _rotate_across_edge(mesh: SurfaceMesh, eid: int, f_from: int, f_to: int,
                        vec: np.ndarray) -> np.ndarray:
    """Transport an in-plane vector across a hinge edge (unfolding map)."""
    a, b = mesh.edges[eid]
    e_hat = normalize(mesh.vertices[int(b)] - mesh.vertices[int(a)])
    n1 = mesh.face_normals[f_from]
    n2 = mesh.face_normals[f_to]
    u = float(np.dot(vec, e_hat))
    w = float(np.dot(vec, np.cross(n1, e_hat)))
    return u * e_hat + w * np.cross(n2, e_hat)


def _shared_edge(mesh: SurfaceMesh, fa: int, fb: int) -> int:
    ea = {int(e) for e in mesh.face_edges[fa]}
    for e in mesh.face_edges[fb]:
        if int(e) in ea:
            return int(e)
    return -1


def _shared_vertex(mesh: SurfaceMesh, fa: int, fb: int) -> int:
    va = {int(v) for v in mesh.faces[fa]}
    for v in mesh.faces[fb]:
        if int(v) in va:
            return int(v)
    return -1


def _walk_fan(mesh: SurfaceMesh, v: int, f_start: int, first_edge: int, f_stop: int):
    """Faces around vertex `v` starting at `f_start`, crossing `first_edge`
    first, until reaching `f_stop`. Returns (faces, crossed_edges) or None
    when a boundary interrupts the walk."""
    faces = [f_start]
    edges = []
    f, e = f_start, first_edge
    for _ in range(len(mesh.vertex_faces[v]) + 2):
        nf = mesh.other_face(e, f)
        if nf < 0:
            return None
        edges.append(e)
        faces.append(nf)
        if nf == f_stop:
            return faces, edges
        e1, e2 = _edges_at_vertex(mesh, nf, v)
        e = e2 if e1 == e else e1
        f = nf
    return None


def _transport_direction(mesh: SurfaceMesh, f_from: int, f_to: int,
                         vec: np.ndarray) -> np.ndarray:
    """Transport `vec` from f_from's plane into f_to's plane by unfolding.

    Faces must share an edge, or at least a vertex (then the fan with the
    smaller total unfolded angle is used).
    """
    if f_from == f_to:
        return vec
    e = _shared_edge(mesh, f_from, f_to)
    if e >= 0:
        return _rotate_across_edge(mesh, e, f_from, f_to, vec)
    v = _shared_vertex(mesh, f_from, f_to)
    if v < 0:
        raise ValueError("faces share no edge or vertex")
    best = None
    for first_edge in _edges_at_vertex(mesh, f_from, v):
        fan = _walk_fan(mesh, v, f_from, first_edge, f_to)
        if fan is None:
            continue
        angle = sum(_wedge_angle(mesh, f, v) for f in fan[0][1:-1])
        if best is None or angle < best[0]:
            best = (angle, fan)
    if best is None:
        raise ValueError("no face fan connects the two faces")
    faces, edges = best[1]
    out = vec
    for k, e in enumerate(edges):
        out = _rotate_across_edge(mesh, e, faces[k], faces[k + 1], out)
    return out


def _face_frame(mesh: SurfaceMesh, face: int):
    n = mesh.face_normals[face]
    a = mesh.vertices[mesh.faces[face][0]]
    b = mesh.vertices[mesh.faces[face][1]]
    e1 = normalize(b - a)
    return a, e1, np.cross(n, e1)


def _bary_in_face(mesh: SurfaceMesh, face: int, p: np.ndarray) -> np.ndarray:
    bary = barycentric_coordinates(mesh.vertices[mesh.faces[face]], p)
    bary = np.clip(bary, 0.0, None)
    return bary / bary.sum()


def _vertex_point_on_face(mesh: SurfaceMesh, face: int, v: int) -> SurfacePoint:
    bary = np.zeros(3)
    bary[list(mesh.faces[face]).index(v)] = 1.0
    return SurfacePoint(face, bary)


def _min_edge_length(mesh: SurfaceMesh) -> float:
    cached = getattr(mesh, "_min_edge_length", None)
    if cached is None:
        d = mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]]
        cached = float(np.linalg.norm(d, axis=1).min())
        mesh._min_edge_length = cached
    return cached


# ---------------------------------------------------------------------------
# straightest-geodesic tracing


def _host_face_for_direction(mesh: SurfaceMesh, sp: SurfacePoint, direction: np.ndarray):
    """Pick the face among those containing `sp` whose interior the ray
    enters; transports `direction` into that face's plane."""
    pos = mesh.position(sp)
    h = 1e-7 * max(1.0, float(np.linalg.norm(pos)))
    best = None
    for f in mesh.faces_containing(sp):
        try:
            d_f = _transport_direction(mesh, sp.face, f, direction)
        except ValueError:
            continue
        d_f = project_to_plane(d_f, mesh.face_normals[f])
        nrm = float(np.linalg.norm(d_f))
        if nrm < 1e-15:
            continue
        d_f = d_f / nrm
        probe = barycentric_coordinates(mesh.vertices[mesh.faces[f]], pos + h * d_f)
        worst = float(probe.min())
        if best is None or worst > best[0]:
            best = (worst, f, d_f)
    if best is None:
        raise TracingStuckError("no face admits the starting direction")
    return best[1], best[2]


def _face_exit(mesh: SurfaceMesh, face: int, pos: np.ndarray, d: np.ndarray,
               entry_edge: int):
    """First forward edge crossing of the in-face ray (pos, d).

    Returns (t, edge_id, hit_point, vertex_or_None), or None when the ray has
    no forward crossing (degenerate direction).
    """
    origin, e1, e2 = _face_frame(mesh, face)
    p2 = np.array([np.dot(pos - origin, e1), np.dot(pos - origin, e2)])
    d2 = np.array([np.dot(d, e1), np.dot(d, e2)])
    corners = mesh.faces[face]
    best = None
    for k in range(3):
        eid = int(mesh.face_edges[face][k])
        if eid == entry_edge:
            continue
        va = mesh.vertices[corners[k]]
        vb = mesh.vertices[corners[(k + 1) % 3]]
        a2 = np.array([np.dot(va - origin, e1), np.dot(va - origin, e2)])
        w2 = np.array([np.dot(vb - origin, e1), np.dot(vb - origin, e2)]) - a2
        denom = d2[1] * w2[0] - d2[0] * w2[1]
        if abs(denom) < 1e-12 * float(np.linalg.norm(w2)):
            continue  # ray (near-)parallel to this edge; exits via a vertex hit
        rel = a2 - p2
        t = (rel[1] * w2[0] - rel[0] * w2[1]) / denom
        s = (d2[0] * rel[1] - d2[1] * rel[0]) / denom
        if t <= 1e-12 or s < -1e-9 or s > 1.0 + 1e-9:
            continue
        if best is None or t < best[0]:
            edge_len = float(np.linalg.norm(vb - va))
            vertex = None
            if s * edge_len < _VERTEX_HIT:
                vertex = int(corners[k])
            elif (1.0 - s) * edge_len < _VERTEX_HIT:
                vertex = int(corners[(k + 1) % 3])
            hit = va + np.clip(s, 0.0, 1.0) * (vb - va)
            best = (float(t), eid, hit, vertex)
    return best


def _continue_through_vertex(mesh: SurfaceMesh, v: int, f_from: int, d_in: np.ndarray):
    """Continue a trace through vertex `v`, splitting the total vertex angle
    evenly between the two sides of the path. Deterministic; raises
    TracingStuck at boundary vertices."""
    ring = [int(f) for f in mesh.vertex_faces[v]]
    for f in ring:
        for e in _edges_at_vertex(mesh, f, v):
            if mesh.other_face(e, f) < 0:
                raise TracingStuckError(f"trace reached boundary vertex {v}")
    half = sum(_wedge_angle(mesh, f, v) for f in ring) / 2.0

    u = -d_in  # unit, points back along the incoming segment, inside f_from
    e_walk, e_other_from = _edges_at_vertex(mesh, f_from, v)
    g_walk = _edge_dir_from(mesh, v, e_walk)[0]
    a_walk = _angle_between(u, g_walk)

    if half <= a_walk:
        # continuation falls back inside the entry face (very sharp cone)
        n = mesh.face_normals[f_from]
        cand = rotate_about_axis(u, n, half)
        if _angle_between(cand, g_walk) > abs(a_walk - half) + 1e-9:
            cand = rotate_about_axis(u, n, -half)
        return f_from, normalize(project_to_plane(cand, n))

    cum = a_walk
    f, e = f_from, e_walk
    for _ in range(len(ring) + 2):
        nf = mesh.other_face(e, f)
        theta = _wedge_angle(mesh, nf, v)
        if cum + theta >= half - 1e-12:
            residual = min(max(half - cum, 0.0), theta)
            g_entry = _edge_dir_from(mesh, v, e)[0]
            e_exit = [x for x in _edges_at_vertex(mesh, nf, v) if x != e][0]
            g_exit = _edge_dir_from(mesh, v, e_exit)[0]
            n = mesh.face_normals[nf]
            cand = rotate_about_axis(g_entry, n, residual)
            # pick the rotation sense that sweeps toward the face's other edge
            if np.dot(rotate_about_axis(g_entry, n, theta), g_exit) < \
               np.dot(rotate_about_axis(g_entry, n, -theta), g_exit):
                cand = rotate_about_axis(g_entry, n, -residual)
            return nf, normalize(project_to_plane(cand, n))
        cum += theta
        e = [x for x in _edges_at_vertex(mesh, nf, v) if x != e][0]
        f = nf
    raise TracingStuckError("vertex continuation failed to locate a face")


def trace_straightest_geodesic(mesh: SurfaceMesh, start: TangentDirection,
                               length: float) -> GeodesicPath:
    """Walk a straightest geodesic of the given arclength.

    The path is straight in the unfolding of every crossed edge; vertex hits
    continue by even splitting of the vertex angle. Raises TracingStuck at
    open boundaries.
    """
    if length <= 0.0:
        raise ValueError("trace length must be positive")
    sp = start.base
    d = project_to_plane(np.asarray(start.direction, dtype=np.float64),
                         mesh.face_normals[sp.face])
    nrm = float(np.linalg.norm(d))
    if nrm < 1e-12:
        raise ValueError("start direction degenerate in the tangent plane")
    face, d = _host_face_for_direction(mesh, sp, d / nrm)
    pos = mesh.position(sp)

    waypoints = [sp]
    points = [pos.copy()]
    seg_faces = []
    remaining = float(length)
    entry_edge = -1
    max_hops = int(remaining / max(_min_edge_length(mesh), 1e-12) * 8) + 256
    for _ in range(max_hops):
        exit_ = _face_exit(mesh, face, pos, d, entry_edge)
        if exit_ is None:
            raise TracingStuckError("ray found no forward crossing")
        t, eid, hit, vert = exit_
        if remaining <= t:
            end = pos + remaining * d
            waypoints.append(SurfacePoint(face, _bary_in_face(mesh, face, end)))
            points.append(end)
            seg_faces.append(face)
            pts = np.array(points)
            total = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
            return GeodesicPath(waypoints, pts, total, seg_faces)
        seg_faces.append(face)
        if vert is not None:
            vpos = mesh.vertices[vert].astype(np.float64)
            remaining -= float(np.linalg.norm(vpos - pos))
            face, d = _continue_through_vertex(mesh, vert, face, d)
            waypoints.append(_vertex_point_on_face(mesh, face, vert))
            points.append(vpos)
            pos = vpos
            entry_edge = -1
        else:
            nf = mesh.other_face(eid, face)
            if nf < 0:
                raise TracingStuckError("trace reached an open boundary edge")
            remaining -= float(np.linalg.norm(hit - pos))
            d = normalize(project_to_plane(
                _rotate_across_edge(mesh, eid, face, nf, d), mesh.face_normals[nf]))
            waypoints.append(SurfacePoint(nf, _bary_in_face(mesh, nf, hit)))
            points.append(hit.copy())
            pos, face = hit, nf
            entry_edge = eid
    raise TracingStuckError("trace exceeded the hop limit")


# ---------------------------------------------------------------------------
# Steiner-point Dijkstra graph


class _GeodesicGraph:
    """Mesh vertices plus 3 Steiner points per edge, joined inside each face."""

    def __init__(self, mesh: SurfaceMesh):
        V, E = mesh.n_vertices, len(mesh.edges)
        k = len(_STEINER_FRACS)
        self.V, self.k = V, k
        pos = np.empty((V + k * E, 3))
        pos[:V] = mesh.vertices
        ea = mesh.vertices[mesh.edges[:, 0]]
        eb = mesh.vertices[mesh.edges[:, 1]]
        for ei in range(E):
            for j, f in enumerate(_STEINER_FRACS):
                pos[V + k * ei + j] = ea[ei] + f * (eb[ei] - ea[ei])
        self.positions = pos

        face_nodes = np.empty((mesh.n_faces, 3 + 3 * k), dtype=np.int64)
        for fi in range(mesh.n_faces):
            nodes = [int(v) for v in mesh.faces[fi]]
            for e in mesh.face_edges[fi]:
                base = V + k * int(e)
                nodes.extend(range(base, base + k))
            face_nodes[fi] = nodes
        self.face_nodes = face_nodes

        pairs = set()
        for fi in range(mesh.n_faces):
            nd = face_nodes[fi]
            for i in range(len(nd)):
                for j in range(i + 1, len(nd)):
                    a, b = int(nd[i]), int(nd[j])
                    pairs.add((a, b) if a < b else (b, a))
        adj: list[list] = [[] for _ in range(len(pos))]
        for (a, b) in pairs:
            w = float(np.linalg.norm(pos[a] - pos[b]))
            adj[a].append((b, w))
            adj[b].append((a, w))
        self.adj = adj

    def node_location(self, node: int):
        if node < self.V:
            return ("vertex", node)
        r = node - self.V
        return ("edge", r // self.k, _STEINER_FRACS[r % self.k])

    def shortest_nodes(self, sources, targets):
        """Single shortest route from virtual source to virtual target.

        `sources`: iterable of (node, offset); `targets`: dict node -> extra.
        Returns (total, node_path) or None if unreachable.
        """
        n_nodes = len(self.positions)
        dist = np.full(n_nodes, np.inf)
        prev = np.full(n_nodes, -1, dtype=np.int64)
        done = np.zeros(n_nodes, dtype=bool)
        heap = []
        for n, w in sources:
            if w < dist[n]:
                dist[n] = w
                heapq.heappush(heap, (w, n))
        best = (np.inf, -1)
        while heap:
            d, n = heapq.heappop(heap)
            if done[n]:
                continue
            if d >= best[0]:
                break
            done[n] = True
            extra = targets.get(n)
            if extra is not None and d + extra < best[0]:
                best = (d + extra, n)
            for (m, w) in self.adj[n]:
                nd = d + w
                if nd < dist[m]:
                    dist[m] = nd
                    prev[m] = n
                    heapq.heappush(heap, (nd, m))
        if best[1] < 0:
            return None
        path = []
        n = best[1]
        while n >= 0:
            path.append(int(n))
            n = int(prev[n])
        path.reverse()
        return best[0], path

    def distances_to_groups(self, sources, groups, margin):
        """Approximate geodesic distance from the source to each target group.

        Each group is a dict node -> extra hop weight. The search stops once
        every remaining node is farther than the best group total plus
        `margin`; unreached groups report +inf.
        """
        n_nodes = len(self.positions)
        node_groups: dict[int, list] = {}
        for gi, g in enumerate(groups):
            for n, extra in g.items():
                node_groups.setdefault(n, []).append((gi, extra))
        dist = np.full(n_nodes, np.inf)
        done = np.zeros(n_nodes, dtype=bool)
        heap = []
        for n, w in sources:
            if w < dist[n]:
                dist[n] = w
                heapq.heappush(heap, (w, n))
        totals = np.full(len(groups), np.inf)
        best = np.inf
        while heap:
            d, n = heapq.heappop(heap)
            if done[n]:
                continue
            if d > best + margin:
                break
            done[n] = True
            for (gi, extra) in node_groups.get(n, ()):
                t = d + extra
                if t < totals[gi]:
                    totals[gi] = t
                    best = min(best, t)
            for (m, w) in self.adj[n]:
                nd = d + w
                if nd < dist[m]:
                    dist[m] = nd
                    heapq.heappush(heap, (nd, m))
        return totals


def geodesic_graph(mesh: SurfaceMesh) -> _GeodesicGraph:
    if mesh._geodesic_graph is None:
        mesh._geodesic_graph = _GeodesicGraph(mesh)
    return mesh._geodesic_graph


# ---------------------------------------------------------------------------
# path straightening: exact funnel inside the face strip + vertex reroutes


@dataclass
class _Item:
    pos: np.ndarray
    kind: str                 # 'end' | 'vertex' | 'cross'
    sp: SurfacePoint = None
    vertex: int = -1
    edge: int = -1
    u: float = 0.0            # param along mesh.edges[edge][0] -> [1]


def _candidate_faces(mesh: SurfaceMesh, item: _Item) -> list[int]:
    if item.kind == "end":
        return mesh.faces_containing(item.sp)
    if item.kind == "vertex":
        return [int(f) for f in mesh.vertex_faces[item.vertex]]
    return [int(f) for f in mesh.edge_faces[item.edge] if f >= 0]


def _common_face(mesh: SurfaceMesh, a: _Item, b: _Item) -> int:
    common = set(_candidate_faces(mesh, a)) & set(_candidate_faces(mesh, b))
    if not common:
        raise ValueError("consecutive path items share no face")
    return min(common)


def _initial_state(mesh: SurfaceMesh, a: SurfacePoint, b: SurfacePoint, node_path,
                   graph: _GeodesicGraph):
    items = [_Item(mesh.position(a), "end", sp=a)]
    for n in node_path:
        loc = graph.node_location(n)
        pos = graph.positions[n].copy()
        if np.linalg.norm(pos - items[-1].pos) < _COINCIDENT:
            continue
        if loc[0] == "vertex":
            items.append(_Item(pos, "vertex", vertex=loc[1]))
        else:
            items.append(_Item(pos, "cross", edge=int(loc[1]), u=float(loc[2])))
    pb = mesh.position(b)
    while len(items) > 1 and np.linalg.norm(pb - items[-1].pos) < _COINCIDENT:
        items.pop()
    items.append(_Item(pb, "end", sp=b))
    faces = [_common_face(mesh, items[i], items[i + 1]) for i in range(len(items) - 1)]
    return items, faces


def _hinge_transform(mesh: SurfaceMesh, eid: int, f_src: int, f_dst: int):
    """Affine (R, t) mapping f_src's plane onto f_dst's plane about the edge."""
    a, b = mesh.edges[eid]
    pivot = mesh.vertices[int(a)]
    e_hat = normalize(mesh.vertices[int(b)] - pivot)
    n_s = mesh.face_normals[f_src]
    n_d = mesh.face_normals[f_dst]
    theta = float(np.arctan2(np.dot(e_hat, np.cross(n_s, n_d)), np.dot(n_s, n_d)))
    from .geometry import rodrigues

    R = rodrigues(e_hat * theta)
    t = pivot - R @ pivot
    return R, t


def _area2(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _run_funnel(portals, b2):
    """Funnel over oriented 2D portals from the origin to `b2`.

    Returns the bend list [(endpoint_id, pos2, portal_index), ...]; ids are
    ('v', vertex) labels, so apex identity is exact.
    """
    sentinel = {"l2": b2, "r2": b2, "lid": ("B",), "rid": ("B",)}
    ext = list(portals) + [sentinel]
    apex = np.zeros(2)
    apex_id = ("A",)
    ai = 0
    left, left_id, li = apex, apex_id, 0
    right, right_id, ri = apex, apex_id, 0
    bends = []
    i = 1
    guard = 0
    limit = 40 * len(ext) + 400
    while i <= len(ext):
        guard += 1
        if guard > limit:
            break
        p = ext[i - 1]
        # right side
        if _area2(apex, right, p["r2"]) >= 0.0:
            if apex_id == right_id or _area2(apex, left, p["r2"]) <= 0.0:
                right, right_id, ri = p["r2"], p["rid"], i
            else:
                bends.append((left_id, left, li))
                apex, apex_id, ai = left, left_id, li
                right, right_id, ri = apex, apex_id, ai
                i = ai + 1
                continue
        # left side
        if _area2(apex, left, p["l2"]) <= 0.0:
            if apex_id == left_id or _area2(apex, right, p["l2"]) >= 0.0:
                left, left_id, li = p["l2"], p["lid"], i
            else:
                bends.append((right_id, right, ri))
                apex, apex_id, ai = right, right_id, ri
                left, left_id, li = apex, apex_id, ai
                i = ai + 1
                continue
        i += 1
    return bends


def _seg_portal_u(s, t, l2, r2) -> float:
    d = t - s
    w = r2 - l2
    denom = d[0] * w[1] - d[1] * w[0]
    if abs(denom) < 1e-18:
        ww = float(np.dot(w, w))
        if ww < 1e-30:
            return 0.0
        return float(np.dot(s - l2, w) / ww)
    u = (d[0] * (s[1] - l2[1]) - d[1] * (s[0] - l2[0])) / denom
    return float(u)


def _funnel_section(mesh: SurfaceMesh, start: _Item, end: _Item, face_seq):
    """Exact shortest polyline from `start` to `end` through the face strip.

    Returns (interior_items, gap_faces) with len(gap_faces) == len(interior)+1.
    """
    fs = [face_seq[0]]
    for f in face_seq[1:]:
        if f != fs[-1]:
            fs.append(f)
    if len(fs) == 1:
        return [], [fs[0]]

    portal_edges = []
    for j in range(1, len(fs)):
        e = _shared_edge(mesh, fs[j - 1], fs[j])
        if e < 0:
            raise ValueError("face strip broken: consecutive faces not adjacent")
        portal_edges.append(e)

    # unfold every face into the plane of fs[0]
    transforms = [(np.eye(3), np.zeros(3))]
    for j in range(1, len(fs)):
        Rp, tp = transforms[-1]
        Rh, th = _hinge_transform(mesh, portal_edges[j - 1], fs[j], fs[j - 1])
        transforms.append((Rp @ Rh, Rp @ th + tp))

    a3 = start.pos
    n0 = mesh.face_normals[fs[0]]
    ref = mesh.vertices[mesh.faces[fs[0]][1]] - mesh.vertices[mesh.faces[fs[0]][0]]
    e1 = normalize(ref)
    e2 = np.cross(n0, e1)

    def to2(x):
        return np.array([np.dot(x - a3, e1), np.dot(x - a3, e2)])

    portals = []
    for j, eid in enumerate(portal_edges, start=1):
        va, vb = int(mesh.edges[eid][0]), int(mesh.edges[eid][1])
        R, t = transforms[j]
        a2 = to2(R @ mesh.vertices[va] + t)
        b2 = to2(R @ mesh.vertices[vb] + t)
        face_v = [int(x) for x in mesh.faces[fs[j]]]
        x = [w for w in face_v if w != va and w != vb][0]
        x2 = to2(R @ mesh.vertices[x] + t)
        m2 = (a2 + b2) / 2.0
        d = x2 - m2
        if d[0] * (a2[1] - m2[1]) - d[1] * (a2[0] - m2[0]) > 0.0:
            p = {"l2": a2, "r2": b2, "lid": ("v", va), "rid": ("v", vb),
                 "lv": va, "rv": vb}
        else:
            p = {"l2": b2, "r2": a2, "lid": ("v", vb), "rid": ("v", va),
                 "lv": vb, "rv": va}
        p["edge"] = eid
        p["entered"] = fs[j]
        portals.append(p)

    Rl, tl = transforms[-1]
    b2 = to2(Rl @ end.pos + tl)
    bends = _run_funnel(portals, b2)

    apexes = [(("A",), np.zeros(2), 0)] + bends + [(("B",), b2, len(portals) + 1)]
    raw = []
    m = 0
    for j, p in enumerate(portals, start=1):
        while m + 1 < len(apexes) - 1 and apexes[m + 1][2] < j:
            m += 1
        s2 = apexes[m][1]
        t2 = apexes[m + 1][1]
        u = min(max(_seg_portal_u(s2, t2, p["l2"], p["r2"]), 0.0), 1.0)
        edge_len = float(np.linalg.norm(mesh.vertices[p["rv"]] - mesh.vertices[p["lv"]]))
        if u * edge_len < _VERTEX_HIT:
            raw.append(("vertex", p["lv"], p))
        elif (1.0 - u) * edge_len < _VERTEX_HIT:
            raw.append(("vertex", p["rv"], p))
        else:
            pos3 = mesh.vertices[p["lv"]] + u * (mesh.vertices[p["rv"]] - mesh.vertices[p["lv"]])
            va, vb = int(mesh.edges[p["edge"]][0]), int(mesh.edges[p["edge"]][1])
            t_edge = u if p["lv"] == va else 1.0 - u
            raw.append(("cross", (p["edge"], t_edge, pos3), p))

    interior = []
    gap_faces = [fs[0]]
    for kind, data, p in raw:
        if kind == "vertex":
            if interior and interior[-1].kind == "vertex" and interior[-1].vertex == data:
                gap_faces[-1] = p["entered"]
                continue
            interior.append(_Item(mesh.vertices[data].astype(np.float64).copy(),
                                  "vertex", vertex=data))
        else:
            eid, t_edge, pos3 = data
            interior.append(_Item(pos3.copy(), "cross", edge=eid, u=t_edge))
        gap_faces.append(p["entered"])
    return interior, gap_faces


def _pull_sections(mesh: SurfaceMesh, items, faces):
    out_items = [items[0]]
    out_faces = []
    sec_start = 0
    for idx in range(1, len(items)):
        if items[idx].kind == "cross":
            continue
        interior, gaps = _funnel_section(mesh, items[sec_start], items[idx],
                                         faces[sec_start:idx])
        out_items.extend(interior)
        out_items.append(items[idx])
        out_faces.extend(gaps)
        sec_start = idx
    return _drop_degenerate(mesh, out_items, out_faces)


def _drop_degenerate(mesh: SurfaceMesh, items, faces):
    """Remove interior waypoints coincident with a neighbor, keeping a gap
    face that still contains both remaining endpoints."""
    changed = True
    while changed:
        changed = False
        for i in range(1, len(items) - 1):
            if np.linalg.norm(items[i].pos - items[i - 1].pos) < _COINCIDENT:
                del items[i]
                del faces[i - 1]  # keep the following segment's face
                changed = True
                break
            if np.linalg.norm(items[i].pos - items[i + 1].pos) < _COINCIDENT:
                del items[i]
                del faces[i]  # keep the preceding segment's face
                changed = True
                break
    return items, faces


def _find_reroute(mesh: SurfaceMesh, items, faces):
    """First vertex waypoint whose unfolded corner admits a shortcut.

    Returns the rewritten (items, faces) or None when every vertex is locally
    geodesic.
    """
    for i in range(1, len(items) - 1):
        it = items[i]
        if it.kind != "vertex":
            continue
        v = it.vertex
        vpos = mesh.vertices[v]
        A = items[i - 1].pos
        B = items[i + 1].pos
        rA = float(np.linalg.norm(A - vpos))
        rB = float(np.linalg.norm(B - vpos))
        if rA < 1e-12 or rB < 1e-12:
            continue
        f_prev, f_next = faces[i - 1], faces[i]
        sides = []
        if f_prev == f_next:
            corner = _angle_between(A - vpos, B - vpos)
            sides.append((corner, [f_prev], []))
        for first_edge in _edges_at_vertex(mesh, f_prev, v):
            fan = _walk_fan(mesh, v, f_prev, first_edge, f_next)
            if fan is None:
                continue
            fan_faces, fan_edges = fan
            g0 = _edge_dir_from(mesh, v, fan_edges[0])[0]
            corner = _angle_between(A - vpos, g0)
            for f in fan_faces[1:-1]:
                corner += _wedge_angle(mesh, f, v)
            g_last = _edge_dir_from(mesh, v, fan_edges[-1])[0]
            corner += _angle_between(B - vpos, g_last)
            sides.append((corner, fan_faces, fan_edges))
        feasible = []
        for corner, fan_faces, fan_edges in sides:
            if corner < np.pi - 1e-9:
                chord = np.sqrt(max(rA * rA + rB * rB - 2 * rA * rB * np.cos(corner), 0.0))
                feasible.append((chord, fan_faces, fan_edges))
        if not feasible:
            continue
        _, fan_faces, fan_edges = min(feasible, key=lambda x: x[0])
        placeholders = []
        for e in fan_edges:
            a, b = int(mesh.edges[e][0]), int(mesh.edges[e][1])
            mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
            placeholders.append(_Item(mid, "cross", edge=e, u=0.5))
        new_items = items[:i] + placeholders + items[i + 1:]
        new_faces = faces[:i - 1] + fan_faces + faces[i + 1:]
        return new_items, new_faces
    return None


def _straighten(mesh: SurfaceMesh, items, faces, max_outer: int = 80):
    items, faces = _pull_sections(mesh, items, faces)
    for _ in range(max_outer):
        res = _find_reroute(mesh, items, faces)
        if res is None:
            break
        items, faces = _pull_sections(mesh, res[0], res[1])
    return items, faces


def _path_from_state(mesh: SurfaceMesh, items, faces) -> GeodesicPath:
    waypoints = []
    pts = []
    for i, it in enumerate(items):
        if it.kind == "end":
            sp = it.sp
        elif it.kind == "vertex":
            host = faces[i] if i < len(faces) else faces[-1]
            sp = _vertex_point_on_face(mesh, host, it.vertex)
        else:
            host = faces[i] if i < len(faces) else faces[-1]
            sp = SurfacePoint(host, _bary_in_face(mesh, host, it.pos))
        waypoints.append(sp)
        pts.append(it.pos)
    pts = np.array(pts)
    total = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    return GeodesicPath(waypoints, pts, total, list(faces))


def shortest_geodesic_path(mesh: SurfaceMesh, a: SurfacePoint,
                           b: SurfacePoint) -> GeodesicPath:
    """Locally shortest geodesic between two surface points.

    Within 2% of the true geodesic distance on well-tessellated meshes;
    raises Disconnected when the points lie in different components.
    """
    pa = mesh.position(a)
    pb = mesh.position(b)
    if float(np.linalg.norm(pb - pa)) < _COINCIDENT:
        return GeodesicPath([a, b], np.array([pa, pb]), 0.0, [a.face])
    if not mesh.same_component(a, b):
        raise DisconnectedError("surface points lie in different components")
    shared = sorted(set(mesh.faces_containing(a)) & set(mesh.faces_containing(b)))
    if shared:
        return GeodesicPath([a, b], np.array([pa, pb]),
                            float(np.linalg.norm(pb - pa)), [shared[0]])
    graph = geodesic_graph(mesh)
    sources: dict[int, float] = {}
    for f in mesh.faces_containing(a):
        for n in graph.face_nodes[f]:
            w = float(np.linalg.norm(pa - graph.positions[n]))
            n = int(n)
            if w < sources.get(n, np.inf):
                sources[n] = w
    targets: dict[int, float] = {}
    for f in mesh.faces_containing(b):
        for n in graph.face_nodes[f]:
            w = float(np.linalg.norm(pb - graph.positions[n]))
            n = int(n)
            if w < targets.get(n, np.inf):
                targets[n] = w
    res = graph.shortest_nodes(sorted(sources.items()), targets)
    if res is None:
        raise DisconnectedError("no graph route between the surface points")
    _, node_path = res
    items, faces = _initial_state(mesh, a, b, node_path, graph)
    items, faces = _straighten(mesh, items, faces)
    return _path_from_state(mesh, items, faces)


# ---------------------------------------------------------------------------
# log / exp maps


def initial_direction(mesh: SurfaceMesh, path: GeodesicPath,
                      in_face: int = None) -> np.ndarray:
    """Unit direction of the path's first segment, optionally transported into
    the plane of `in_face`."""
    k = 1
    while k < len(path.points) - 1 and \
            np.linalg.norm(path.points[k] - path.points[0]) < _COINCIDENT:
        k += 1
    u = normalize(path.points[k] - path.points[0])
    f0 = path.segment_faces[min(k - 1, len(path.segment_faces) - 1)]
    if in_face is not None and in_face != f0:
        u = _transport_direction(mesh, f0, in_face, u)
    return u


def log_map(mesh: SurfaceMesh, base: SurfacePoint, base_tangent,
            target: SurfacePoint) -> tuple[float, float]:
    """Geodesic polar coordinates of `target` around `base`.

    Returns (distance, angle); the angle is measured counterclockwise around
    the base face's normal, from `base_tangent` to the path's initial
    direction, in (-pi, pi].
    """
    bpos = mesh.position(base)
    tpos = mesh.position(target)
    if float(np.linalg.norm(tpos - bpos)) < _COINCIDENT:
        return 0.0, 0.0
    path = shortest_geodesic_path(mesh, base, target)
    n = mesh.face_normals[base.face]
    u = normalize(project_to_plane(initial_direction(mesh, path, base.face), n))
    t = normalize(project_to_plane(np.asarray(base_tangent, dtype=np.float64), n))
    return float(path.length), signed_angle(t, u, n)


def exp_map(mesh: SurfaceMesh, base: SurfacePoint, base_tangent,
            distance: float, angle: float) -> SurfacePoint:
    """Inverse of log_map: rotate the base tangent by `angle` and trace a
    straightest geodesic of length `distance`."""
    if distance < 0.0:
        raise ValueError("exp_map distance must be nonnegative")
    if distance < _COINCIDENT:
        return SurfacePoint(base.face, base.bary.copy())
    n = mesh.face_normals[base.face]
    t = normalize(project_to_plane(np.asarray(base_tangent, dtype=np.float64), n))
    d = rotate_about_axis(t, n, angle)
    path = trace_straightest_geodesic(mesh, TangentDirection(base, d), float(distance))
    return path.waypoints[-1]
