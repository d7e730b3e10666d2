"""Binary silhouette rasterization (no depth buffer, pixel-center coverage)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera, _MIN_DEPTH
from .errors import BehindCameraError, DimensionMismatchError
from .mesh import SurfaceMesh
from .rigid import RigidPose


@dataclass
class SilhouetteMask:
    width: int
    height: int
    bits: np.ndarray  # (height, width) bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.height, self.width):
            raise DimensionMismatchError("mask bits do not match declared dimensions")

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    @staticmethod
    def empty(width: int, height: int) -> "SilhouetteMask":
        return SilhouetteMask(width, height, np.zeros((height, width), dtype=bool))


def rasterize_vertices(vertices: np.ndarray, faces: np.ndarray,
                       camera: Camera) -> SilhouetteMask:
    """Rasterize already-posed geometry into a silhouette mask.

    Triangles with any vertex at or behind the near plane are skipped; if all
    vertices are behind, BehindCamera is raised.
    """
    z = vertices[:, 2]
    if np.all(z <= _MIN_DEPTH):
        raise BehindCameraError("mesh entirely behind the camera")
    u = camera.fx * vertices[:, 0] / np.maximum(z, _MIN_DEPTH) + camera.cx
    v = camera.fy * vertices[:, 1] / np.maximum(z, _MIN_DEPTH) + camera.cy
    in_front = z > _MIN_DEPTH

    bits = np.zeros((camera.height, camera.width), dtype=bool)
    w, h = camera.width, camera.height
    for f in faces:
        if not (in_front[f[0]] and in_front[f[1]] and in_front[f[2]]):
            continue
        ua, ub, uc = u[f[0]], u[f[1]], u[f[2]]
        va, vb, vc = v[f[0]], v[f[1]], v[f[2]]
        area = (ub - ua) * (vc - va) - (vb - va) * (uc - ua)
        if abs(area) < 1e-12:
            continue
        x0 = max(int(np.floor(min(ua, ub, uc) - 0.5)), 0)
        x1 = min(int(np.ceil(max(ua, ub, uc) - 0.5)), w - 1)
        y0 = max(int(np.floor(min(va, vb, vc) - 0.5)), 0)
        y1 = min(int(np.ceil(max(va, vb, vc) - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = (np.arange(y0, y1 + 1) + 0.5)[:, None]
        sign = 1.0 if area > 0 else -1.0
        e0 = ((ub - ua) * (py - va) - (vb - va) * (px - ua)) * sign
        e1 = ((uc - ub) * (py - vb) - (vc - vb) * (px - ub)) * sign
        e2 = ((ua - uc) * (py - vc) - (va - vc) * (px - uc)) * sign
        inside = (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
        bits[y0:y1 + 1, x0:x1 + 1] |= inside
    return SilhouetteMask(camera.width, camera.height, bits)


def rasterize_silhouette(mesh: SurfaceMesh, pose: RigidPose,
                         camera: Camera) -> SilhouetteMask:
    """Render a posed mesh as a binary silhouette."""
    verts = pose.apply(mesh.vertices) if pose is not None else mesh.vertices
    return rasterize_vertices(np.asarray(verts), mesh.faces, camera)
