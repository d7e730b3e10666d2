"""Low-level geometric primitives: triangles, rotations, plane projections.

Everything here is plain numpy on float64 arrays; no mesh state.
"""

from __future__ import annotations

import numpy as np


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def project_to_plane(v: np.ndarray, unit_normal: np.ndarray) -> np.ndarray:
    """Remove the component of `v` along `unit_normal`."""
    return v - np.dot(v, unit_normal) * unit_normal


def signed_angle(u: np.ndarray, v: np.ndarray, unit_normal: np.ndarray) -> float:
    """Angle rotating `u` onto `v` counterclockwise around `unit_normal`, in (-pi, pi]."""
    s = float(np.dot(unit_normal, np.cross(u, v)))
    c = float(np.dot(u, v))
    a = float(np.arctan2(s, c))
    if a <= -np.pi:
        a = np.pi
    return a


def rotate_about_axis(v: np.ndarray, unit_axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of `v` by `angle` around `unit_axis`."""
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(unit_axis, v) * s + unit_axis * np.dot(unit_axis, v) * (1.0 - c)


def rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix from an axis-angle vector."""
    r = np.asarray(axis_angle, dtype=np.float64)
    theta = np.linalg.norm(r)
    if theta < 1e-12:
        # second-order small-angle expansion keeps gradients smooth near zero
        K = _skew(r)
        return np.eye(3) + K + 0.5 * (K @ K)
    k = r / theta
    K = _skew(k)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotated_point_jacobian(axis_angle: np.ndarray, p: np.ndarray) -> np.ndarray:
    """d(R(r) @ p)/dr as a 3x3 matrix (rows: output coords, cols: r components).

    Exact formula from the axis-angle parameterization; falls back to the
    -[p]x limit at r = 0.
    """
    r = np.asarray(axis_angle, dtype=np.float64)
    theta = np.linalg.norm(r)
    R = rodrigues(r)
    if theta < 1e-8:
        return -_skew(R @ p)
    Rp = R @ p
    eye = np.eye(3)
    out = np.empty((3, 3))
    for i in range(3):
        e_i = eye[i]
        w = r[i] * r + np.cross(r, (eye - R) @ e_i) * 1.0
        out[:, i] = (_skew(w) @ Rp) / (theta * theta)
    return out


def triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


def triangle_normal(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Unit normal of triangle (a, b, c), right-handed with the winding order."""
    n = np.cross(b - a, c - a)
    return normalize(n)


def barycentric_coordinates(tri: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of `p` w.r.t. triangle rows of `tri`.

    `p` is projected onto the triangle plane first, so the result is exact for
    in-plane points and sensible for nearly-in-plane ones.
    """
    a, b, c = tri[0], tri[1], tri[2]
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = np.dot(v0, v0)
    d01 = np.dot(v0, v1)
    d11 = np.dot(v1, v1)
    d20 = np.dot(v2, v0)
    d21 = np.dot(v2, v1)
    denom = d00 * d11 - d01 * d01
    if denom <= 0.0:
        raise ValueError("degenerate triangle in barycentric computation")
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    return np.array([1.0 - v - w, v, w])


def closest_point_on_triangle(tri: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest point to `p` on triangle `tri` (3x3, one vertex per row).

    Returns (point, barycentric). Region-based algorithm from Ericson,
    "Real-Time Collision Detection".
    """
    a, b, c = tri[0], tri[1], tri[2]
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.dot(ab, ap)
    d2 = np.dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        return a, np.array([1.0, 0.0, 0.0])

    bp = p - b
    d3 = np.dot(ab, bp)
    d4 = np.dot(ac, bp)
    if d3 >= 0.0 and d4 <= d3:
        return b, np.array([0.0, 1.0, 0.0])

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, np.array([1.0 - v, v, 0.0])

    cp = p - c
    d5 = np.dot(ab, cp)
    d6 = np.dot(ac, cp)
    if d6 >= 0.0 and d5 <= d6:
        return c, np.array([0.0, 0.0, 1.0])

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, np.array([1.0 - w, 0.0, w])

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), np.array([0.0, 1.0 - w, w])

    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w, np.array([1.0 - v - w, v, w])


def ray_triangle_intersect(orig: np.ndarray, direction: np.ndarray, tri: np.ndarray,
                           eps: float = 1e-12):
    """Moeller-Trumbore ray/triangle test.

    Returns (t, barycentric) with t > eps, or None when the ray misses or is
    parallel to the triangle plane.
    """
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    pvec = np.cross(direction, e2)
    det = np.dot(e1, pvec)
    if abs(det) < eps:
        return None
    inv_det = 1.0 / det
    tvec = orig - tri[0]
    u = np.dot(tvec, pvec) * inv_det
    if u < -eps or u > 1.0 + eps:
        return None
    qvec = np.cross(tvec, e1)
    v = np.dot(direction, qvec) * inv_det
    if v < -eps or u + v > 1.0 + eps:
        return None
    t = np.dot(e2, qvec) * inv_det
    if t <= eps:
        return None
    return t, np.array([1.0 - u - v, u, v])
