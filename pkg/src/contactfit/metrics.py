"""Evaluation: Procrustes alignment, Chamfer distances, ICP, contact F1.

Chamfer here is the symmetric mean of unsquared nearest-neighbor distances,
reported in centimeters. PA-CD fits one similarity transform on the combined
human+object samples, then scores each entity separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateConfigurationError
from .mesh import SurfaceMesh

_M_TO_CM = 100.0


@dataclass
class SimilarityTransform:
    rotation: np.ndarray     # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,)
    scale: float = 1.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if np.linalg.norm(self.rotation @ self.rotation.T - np.eye(3)) > 1e-6:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation determinant must be +1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @staticmethod
    def identity() -> "SimilarityTransform":
        return SimilarityTransform(np.eye(3), np.zeros(3), 1.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * (np.atleast_2d(points) @ self.rotation.T) + self.translation


def procrustes_align(source: np.ndarray, target: np.ndarray,
                     with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity transform mapping source points onto targets.

    Umeyama's closed form; requires >= 3 non-collinear corresponding points.
    """
    X = np.asarray(source, dtype=np.float64)
    Y = np.asarray(target, dtype=np.float64)
    if X.shape != Y.shape or len(X) < 3:
        raise DegenerateConfigurationError("need matching point sets of >= 3 points")
    mx = X.mean(axis=0)
    my = Y.mean(axis=0)
    Xc = X - mx
    Yc = Y - my
    sv = np.linalg.svd(Xc, compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1e-12):
        raise DegenerateConfigurationError("source points are collinear")
    cov = Yc.T @ Xc / len(X)
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var_x = (Xc ** 2).sum() / len(X)
        scale = float(np.trace(np.diag(D) @ S) / var_x)
    else:
        scale = 1.0
    t = my - scale * R @ mx
    return SimilarityTransform(R, t, scale)


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-neighbor distance, in centimeters."""
    A = np.asarray(a, dtype=np.float64)
    B = np.asarray(b, dtype=np.float64)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("chamfer needs non-empty point sets")
    da = cKDTree(B).query(A)[0]
    db = cKDTree(A).query(B)[0]
    return 0.5 * (float(da.mean()) + float(db.mean())) * _M_TO_CM


def sample_surface(mesh: SurfaceMesh, n: int, seed: int = 0):
    """Uniform-by-area surface samples; returns (points, face indices, barys)."""
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas
    probs = areas / areas.sum()
    faces = rng.choice(len(areas), size=n, p=probs)
    r1 = np.sqrt(rng.uniform(size=n))
    r2 = rng.uniform(size=n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    tri = mesh.vertices[mesh.faces[faces]]
    points = np.einsum("nij,ni->nj", tri, bary)
    return points, faces, bary


def _resample_on(mesh: SurfaceMesh, faces, bary) -> np.ndarray:
    tri = mesh.vertices[mesh.faces[faces]]
    return np.einsum("nij,ni->nj", tri, bary)


class _SampledSurface:
    """Face/area view over a face subset; duck-types what sampling needs."""

    def __init__(self, mesh: SurfaceMesh, keep: np.ndarray):
        self.vertices = mesh.vertices
        self.faces = mesh.faces[keep]
        self.face_areas = mesh.face_areas[keep]
        self.n_vertices = mesh.n_vertices


def _submesh(mesh: SurfaceMesh, keep: np.ndarray):
    return _SampledSurface(mesh, keep)


def pa_cd(pred_human: SurfaceMesh, pred_object: SurfaceMesh,
          gt_human: SurfaceMesh, gt_object: SurfaceMesh,
          n_samples: int = 8192, seed: int = 0, exclude_human_vertices=None):
    """Procrustes-aligned Chamfer distances (cm): (CD_h, CD_o, CD_combined).

    One similarity transform aligns the combined human+object samples; the
    prediction meshes must share topology with their ground truths so sample
    correspondence is well-defined. `exclude_human_vertices` drops human faces
    touching those vertices from the sampling (for cross-topology comparisons
    where some region does not correspond).
    """
    if pred_human.faces.shape != gt_human.faces.shape or \
       pred_object.faces.shape != gt_object.faces.shape:
        raise ValueError("prediction and ground truth topologies differ")
    if exclude_human_vertices:
        excluded = np.zeros(pred_human.n_vertices, dtype=bool)
        excluded[list(exclude_human_vertices)] = True
        keep = ~excluded[pred_human.faces].any(axis=1)
        pred_human = _submesh(pred_human, keep)
        gt_human = _submesh(gt_human, keep)
    ph, fh, bh = sample_surface(pred_human, n_samples, seed)
    po, fo, bo = sample_surface(pred_object, n_samples, seed + 1)
    gh = _resample_on(gt_human, fh, bh)
    go = _resample_on(gt_object, fo, bo)
    transform = procrustes_align(np.vstack([ph, po]), np.vstack([gh, go]))
    ph_al = transform.apply(ph)
    po_al = transform.apply(po)
    cd_h = chamfer(ph_al, gh)
    cd_o = chamfer(po_al, go)
    cd_combined = chamfer(np.vstack([ph_al, po_al]), np.vstack([gh, go]))
    return cd_h, cd_o, cd_combined


def icp_align(source: np.ndarray, target: np.ndarray, max_iters: int = 50,
              tol: float = 1e-6) -> SimilarityTransform:
    """Rigid ICP (no scale): alternate nearest-neighbor matching and
    least-squares alignment until the mean match distance stops improving."""
    X = np.asarray(source, dtype=np.float64)
    Y = np.asarray(target, dtype=np.float64)
    tree = cKDTree(Y)
    current = SimilarityTransform.identity()
    moved = X.copy()
    best = (np.inf, current)
    prev = np.inf
    for _ in range(max_iters):
        dists, idx = tree.query(moved)
        mean_d = float(dists.mean())
        if mean_d < best[0]:
            best = (mean_d, current)
        if prev - mean_d < tol:
            break
        prev = mean_d
        matched = Y[idx]
        step = procrustes_align(X, matched, with_scale=False)
        current = step
        moved = step.apply(X)
    dists, _ = tree.query(moved)
    if float(dists.mean()) < best[0]:
        best = (float(dists.mean()), current)
    return best[1]


def gt_contact_extract(human_mesh: SurfaceMesh, object_mesh: SurfaceMesh,
                       threshold: float = 0.05):
    """Vertex sets within `threshold` of the other surface (both directions)."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    from .sdf import surface_distances

    hd = surface_distances(human_mesh.vertices, object_mesh)
    od = surface_distances(object_mesh.vertices, human_mesh)
    body = {int(i) for i in np.nonzero(hd <= threshold)[0]}
    obj = {int(i) for i in np.nonzero(od <= threshold)[0]}
    return body, obj


def contact_f1(pred: set, gt: set):
    """Set precision, recall, and F1; empty-vs-nonempty scores zero."""
    pred = set(pred)
    gt = set(gt)
    if not pred and not gt:
        return 1.0, 1.0, 1.0
    inter = len(pred & gt)
    precision = inter / len(pred) if pred else 0.0
    recall = inter / len(gt) if gt else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)
