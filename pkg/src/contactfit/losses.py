"""Fitting loss terms (contact, mask IoU, penetration, scale, pose prior).

Contact and penetration also expose analytic gradients w.r.t. the 7 object
pose parameters (axis-angle rotation, translation, scale); the optimizer uses
finite differences, and the analytic forms serve as an independent cross-check
of those probes.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, EmptyCorrespondencesError
from .geometry import rotated_point_jacobian
from .mesh import SurfaceMesh
from .raster import SilhouetteMask
from .rigid import RigidPose
from .sdf import SdfGrid, query_sdf, query_sdf_gradient


def correspondence_arrays(body_vertices: np.ndarray, object_mesh: SurfaceMesh,
                          correspondences) -> tuple[np.ndarray, np.ndarray]:
    """(v_i positions, p_i object-local positions) as dense arrays."""
    if not correspondences.pairs:
        raise EmptyCorrespondencesError("correspondence set is empty")
    v = body_vertices[[i for i, _ in correspondences.pairs]]
    p = np.array([object_mesh.position(sp) for _, sp in correspondences.pairs])
    return v, p


def loss_contact(body_mesh: SurfaceMesh, object_mesh: SurfaceMesh, pose: RigidPose,
                 correspondences) -> float:
    """Mean Euclidean distance between paired body vertices and posed object points."""
    v, p = correspondence_arrays(body_mesh.vertices, object_mesh, correspondences)
    return contact_from_arrays(v, p, pose)


def contact_from_arrays(v: np.ndarray, p: np.ndarray, pose: RigidPose) -> float:
    d = pose.apply(p) - v
    return float(np.linalg.norm(d, axis=1).mean())


def grad_contact_pose(v: np.ndarray, p: np.ndarray, pose: RigidPose) -> np.ndarray:
    """Analytic d(loss_contact)/d[rotation(3), translation(3), scale(1)]."""
    R = pose.matrix()
    moved = pose.scale * (p @ R.T) + pose.translation
    u = moved - v
    norms = np.linalg.norm(u, axis=1)
    active = norms > 1e-12
    unit = np.zeros_like(u)
    unit[active] = u[active] / norms[active, None]
    n = len(v)
    g = np.zeros(7)
    g[3:6] = unit.sum(axis=0) / n
    g[6] = float(np.einsum("ij,ij->", unit, p @ R.T)) / n
    gr = np.zeros(3)
    for i in np.nonzero(active)[0]:
        J = rotated_point_jacobian(pose.rotation, p[i])
        gr += pose.scale * (J.T @ unit[i])
    g[:3] = gr / n
    return g


def loss_mask(predicted: SilhouetteMask, observed: SilhouetteMask) -> float:
    """1 - IoU of the two masks; two empty masks score 1 (nothing predicted,
    nothing matched)."""
    if (predicted.width, predicted.height) != (observed.width, observed.height):
        raise DimensionMismatchError("mask dimensions differ")
    inter = int(np.logical_and(predicted.bits, observed.bits).sum())
    union = int(np.logical_or(predicted.bits, observed.bits).sum())
    if union == 0:
        return 1.0
    return 1.0 - inter / union


def loss_penetration(sdf: SdfGrid, object_mesh: SurfaceMesh, pose: RigidPose) -> float:
    """Sum of penetration depths of posed object vertices inside the body."""
    return penetration_from_vertices(sdf, pose.apply(object_mesh.vertices))


def penetration_from_vertices(sdf: SdfGrid, posed_vertices: np.ndarray) -> float:
    vals = query_sdf(sdf, posed_vertices)
    return float(np.maximum(-vals, 0.0).sum())


def grad_penetration_pose(sdf: SdfGrid, p: np.ndarray, pose: RigidPose) -> np.ndarray:
    """Analytic d(loss_penetration)/d[rotation(3), translation(3), scale(1)]."""
    R = pose.matrix()
    moved = pose.scale * (p @ R.T) + pose.translation
    vals = query_sdf(sdf, moved)
    active = vals < 0.0
    g = np.zeros(7)
    if not np.any(active):
        return g
    grads = -query_sdf_gradient(sdf, moved[active])
    g[3:6] = grads.sum(axis=0)
    g[6] = float(np.einsum("ij,ij->", grads, p[active] @ R.T))
    gr = np.zeros(3)
    for k, i in enumerate(np.nonzero(active)[0]):
        J = rotated_point_jacobian(pose.rotation, p[i])
        gr += pose.scale * (J.T @ grads[k])
    g[:3] = gr
    return g


def loss_scale(scale: float, scale_init: float) -> float:
    return abs(float(scale) - float(scale_init))


def loss_pose_reg(theta_c: np.ndarray, theta_star_c: np.ndarray) -> float:
    """Euclidean norm of the chain-parameter deviation from the initial pose."""
    return float(np.linalg.norm(np.asarray(theta_c) - np.asarray(theta_star_c)))
