"""Three-stage contact-guided fitting.

Stage 1 registers the object to the body from contact correspondences alone
(closed-form least squares, then Adam on the unsquared contact loss). Stage 2
refines object rotation, translation and scale against the observed object
mask, the penetration field, and the scale prior. Stage 3 refines only the
kinematic chains of the contacting limbs against the human mask, contacts,
penetration, and a pose prior.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .body import BodyModel, ChainSpec, PoseVector, kinematic_chain, pose_vertices
from .camera import Camera
from .contact import CorrespondenceSet
from .errors import (
    DegenerateCorrespondencesError,
    EmptyCorrespondencesError,
    FitStageError,
)
from .losses import (
    contact_from_arrays,
    correspondence_arrays,
    loss_mask,
    loss_pose_reg,
    loss_scale,
    penetration_from_vertices,
)
from .mesh import SurfaceMesh
from .optimize import ParamGroup, adam_minimize
from .raster import SilhouetteMask, rasterize_vertices
from .rigid import RigidPose
from .sdf import build_sdf


@dataclass
class FitConfig:
    stage2_weights: dict = field(default_factory=lambda: {
        "contact": 4.0, "penetration": 100.0, "mask": 0.4, "scale": 4.0})
    stage3_weights: dict = field(default_factory=lambda: {
        "contact": 4.0, "penetration": 50.0, "mask": 0.1, "pose_reg": 0.05})
    learning_rates: dict = field(default_factory=lambda: {
        "rotation": 0.04, "translation": 0.02, "scale": 0.01, "joints": 0.02})
    fd_steps: dict = field(default_factory=lambda: {
        "rotation": 0.01, "translation": 0.005, "scale": 0.01, "joints": 0.01})
    max_iterations: int = 300
    rel_improvement_tol: float = 1e-5
    patience: int = 20
    min_iterations: int = 40
    sdf_rebuild_interval: int = 25
    sdf_voxel_size: float = 0.02
    sdf_padding: float = 0.1

    def __post_init__(self):
        for w in list(self.stage2_weights.values()) + list(self.stage3_weights.values()):
            if w < 0:
                raise ValueError("loss weights must be nonnegative")
        for lr in self.learning_rates.values():
            if not (0.0 < lr < 1.0):
                raise ValueError("learning rates must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "stage2_weights": dict(self.stage2_weights),
            "stage3_weights": dict(self.stage3_weights),
            "learning_rates": dict(self.learning_rates),
            "fd_steps": dict(self.fd_steps),
            "max_iterations": self.max_iterations,
            "rel_improvement_tol": self.rel_improvement_tol,
            "patience": self.patience,
            "sdf_rebuild_interval": self.sdf_rebuild_interval,
            "sdf_voxel_size": self.sdf_voxel_size,
            "sdf_padding": self.sdf_padding,
        }

    @staticmethod
    def from_dict(d: dict) -> "FitConfig":
        base = FitConfig()
        kwargs = {}
        for key in ("stage2_weights", "stage3_weights", "learning_rates", "fd_steps"):
            merged = dict(getattr(base, key))
            merged.update(d.get(key, {}))
            kwargs[key] = merged
        for key in ("max_iterations", "patience", "sdf_rebuild_interval", "min_iterations"):
            kwargs[key] = int(d.get(key, getattr(base, key)))
        for key in ("rel_improvement_tol", "sdf_voxel_size", "sdf_padding"):
            kwargs[key] = float(d.get(key, getattr(base, key)))
        return FitConfig(**kwargs)


@dataclass
class FitInputs:
    body_model: BodyModel
    initial_pose: PoseVector            # theta-star
    camera: Camera
    object_mesh: SurfaceMesh            # raw (will be centered about its centroid)
    scale_init: float                   # s-star
    correspondences: CorrespondenceSet  # p_i in raw object coordinates
    object_mask: SilhouetteMask = None
    human_mask: SilhouetteMask = None


@dataclass
class FitResult:
    object_pose: RigidPose
    body_pose: PoseVector
    stage_traces: dict
    dropped_correspondences: int
    empty_chains: bool = False
    object_centroid: np.ndarray = None
    timing_seconds: float = field(default=0.0, compare=False)

    def equivalent(self, other: "FitResult") -> bool:
        """Bit-identical comparison, ignoring wall-clock timing."""
        return (
            np.array_equal(self.object_pose.rotation, other.object_pose.rotation)
            and np.array_equal(self.object_pose.translation, other.object_pose.translation)
            and self.object_pose.scale == other.object_pose.scale
            and np.array_equal(self.body_pose.rotations, other.body_pose.rotations)
            and np.array_equal(self.body_pose.root_translation, other.body_pose.root_translation)
            and self.stage_traces == other.stage_traces
            and self.dropped_correspondences == other.dropped_correspondences
            and self.empty_chains == other.empty_chains
        )


def center_object(mesh: SurfaceMesh) -> tuple[SurfaceMesh, np.ndarray]:
    """Object mesh re-centered at its vertex centroid (decouples scale from
    translation in the pose parameterization)."""
    centroid = mesh.vertices.mean(axis=0)
    return mesh.with_vertices(mesh.vertices - centroid), centroid


def stage1_register(correspondences: CorrespondenceSet, body_mesh: SurfaceMesh,
                    object_mesh: SurfaceMesh, scale: float = 1.0,
                    config: FitConfig = None) -> tuple[RigidPose, list]:
    """Rigid registration of the object to the body from contacts alone.

    Closed-form least-squares alignment initializes; Adam then polishes the
    unsquared contact loss. Scale stays fixed at `scale`.
    """
    config = config or FitConfig()
    v, p = correspondence_arrays(body_mesh.vertices, object_mesh, correspondences)
    if len(v) < 3:
        raise DegenerateCorrespondencesError("need at least 3 correspondences")
    q = scale * p
    q_bar = q.mean(axis=0)
    v_bar = v.mean(axis=0)
    qc = q - q_bar
    vc = v - v_bar
    s_vals = np.linalg.svd(qc, compute_uv=False)
    if s_vals[1] < 1e-9 * max(s_vals[0], 1e-12):
        raise DegenerateCorrespondencesError("correspondence points are collinear")
    H = qc.T @ vc
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(Vt.T @ U.T)))])
    R = Vt.T @ D @ U.T
    t = v_bar - R @ q_bar
    r0 = _axis_angle_from_matrix(R)

    from .geometry import rodrigues as _rodrigues

    def loss(x):
        moved = scale * (p @ _rodrigues(x[:3]).T) + x[3:6]
        return float(np.linalg.norm(moved - v, axis=1).mean())

    groups = [
        ParamGroup("rotation", 0, 3, config.learning_rates["rotation"], 1e-6),
        ParamGroup("translation", 3, 3, config.learning_rates["translation"], 1e-6),
    ]
    # the closed form is already optimal for clean correspondences, so the
    # polish stops as soon as the loss stops improving
    res = adam_minimize(loss, np.concatenate([r0, t]), groups,
                        max_iterations=config.max_iterations,
                        rel_improvement_tol=config.rel_improvement_tol,
                        patience=config.patience, min_iterations=0)
    return RigidPose(res.x[:3], res.x[3:6], scale), res.trace


def _axis_angle_from_matrix(R: np.ndarray) -> np.ndarray:
    cos_t = (np.trace(R) - 1.0) / 2.0
    theta = float(np.arccos(np.clip(cos_t, -1.0, 1.0)))
    if theta < 1e-12:
        return np.zeros(3)
    if np.pi - theta < 1e-6:
        # near-pi: axis from the dominant column of R + I
        M = R + np.eye(3)
        axis = M[:, int(np.argmax(np.linalg.norm(M, axis=0)))]
        axis = axis / np.linalg.norm(axis)
        return axis * theta
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return axis / (2.0 * np.sin(theta)) * theta


@dataclass
class Stage2State:
    body_mesh: SurfaceMesh
    body_sdf: object
    object_mesh: SurfaceMesh        # centered
    correspondences: CorrespondenceSet
    camera: Camera
    object_mask: SilhouetteMask
    pose_init: RigidPose
    scale_init: float


def stage2_refine(state: Stage2State, config: FitConfig = None) -> tuple[RigidPose, list]:
    """Refine object rotation, translation, and scale against image evidence."""
    config = config or FitConfig()
    w = config.stage2_weights
    v, p = correspondence_arrays(state.body_mesh.vertices, state.object_mesh,
                                 state.correspondences)
    obj_vertices = state.object_mesh.vertices

    def loss(x):
        pose = RigidPose(x[:3], x[3:6], max(float(x[6]), 1e-6))
        moved = pose.apply(obj_vertices)
        total = w["contact"] * contact_from_arrays(v, p, pose)
        total += w["penetration"] * penetration_from_vertices(state.body_sdf, moved)
        if w["mask"] > 0 and state.object_mask is not None:
            pred = rasterize_vertices(moved, state.object_mesh.faces, state.camera)
            total += w["mask"] * loss_mask(pred, state.object_mask)
        total += w["scale"] * loss_scale(x[6], state.scale_init)
        return total

    x0 = np.concatenate([state.pose_init.rotation, state.pose_init.translation,
                         [state.pose_init.scale]])
    lr, fd = config.learning_rates, config.fd_steps
    groups = [
        ParamGroup("rotation", 0, 3, lr["rotation"], fd["rotation"]),
        ParamGroup("translation", 3, 3, lr["translation"], fd["translation"]),
        ParamGroup("scale", 6, 1, lr["scale"], fd["scale"]),
    ]
    res = adam_minimize(loss, x0, groups, max_iterations=config.max_iterations,
                        rel_improvement_tol=config.rel_improvement_tol,
                        patience=config.patience, min_iterations=config.min_iterations)
    return RigidPose(res.x[:3], res.x[3:6], float(res.x[6])), res.trace


@dataclass
class Stage3State:
    body_model: BodyModel
    initial_pose: PoseVector
    object_mesh: SurfaceMesh        # centered
    object_pose: RigidPose
    correspondences: CorrespondenceSet
    camera: Camera
    human_mask: SilhouetteMask


def stage3_refine(state: Stage3State, config: FitConfig = None,
                  chains: list = None) -> tuple[PoseVector, list, bool]:
    """Refine the contacting limbs' joint angles against the human mask.

    Only the chain joints move; the body SDF used by the penetration term is
    rebuilt from the reposed body every `sdf_rebuild_interval` iterations.
    Returns (pose, trace, empty_chains_flag).
    """
    config = config or FitConfig()
    w = config.stage3_weights
    joints: list[int] = []
    for chain in chains or []:
        for j in chain.joints:
            if j not in joints:
                joints.append(int(j))
    if not joints:
        return state.initial_pose.copy(), [], True

    model = state.body_model
    theta_star = state.initial_pose
    x_star = theta_star.rotations[joints].reshape(-1)
    posed_object = state.object_pose.apply(state.object_mesh.vertices)
    obj_points_local = np.array([state.object_mesh.position(sp)
                                 for _, sp in state.correspondences.pairs])
    obj_points = state.object_pose.apply(obj_points_local)
    body_idx = [i for i, _ in state.correspondences.pairs]
    faces = model.template.faces

    # only vertices driven by the chain joints (or their descendants) move;
    # the rest of the body silhouette is rasterized once and reused
    moving_joints = set(joints)
    for j in range(model.n_joints):
        if int(model.parents[j]) in moving_joints:
            moving_joints.add(j)
    vertex_moves = (np.isin(model.skin_joints, sorted(moving_joints))
                    & (model.skin_weights > 0)).any(axis=1)
    face_moves = vertex_moves[faces].any(axis=1)
    moving_faces = faces[face_moves]
    static_faces = faces[~face_moves]

    def pose_of(x):
        pose = theta_star.copy()
        pose.rotations[joints] = x.reshape(-1, 3)
        return pose

    static_mask_holder = {}
    if w["mask"] > 0 and state.human_mask is not None and len(static_faces):
        verts0 = pose_vertices(model, theta_star)
        static_mask_holder["bits"] = rasterize_vertices(
            verts0, static_faces, state.camera).bits

    sdf_holder = {}

    def rebuild_sdf(x):
        body = model.template.with_vertices(pose_vertices(model, pose_of(x)))
        sdf = build_sdf(body, config.sdf_voxel_size, config.sdf_padding)
        # the object is frozen in this stage, so the penetration term only
        # changes when the SDF is rebuilt
        sdf_holder["penetration"] = penetration_from_vertices(sdf, posed_object)

    def on_iteration(k, x):
        if (k - 1) % config.sdf_rebuild_interval == 0:
            rebuild_sdf(x)

    def loss(x):
        verts = pose_vertices(model, pose_of(x))
        diffs = verts[body_idx] - obj_points
        total = w["contact"] * float(np.linalg.norm(diffs, axis=1).mean())
        total += w["penetration"] * sdf_holder["penetration"]
        if w["mask"] > 0 and state.human_mask is not None:
            pred = rasterize_vertices(verts, moving_faces, state.camera)
            bits = pred.bits
            if "bits" in static_mask_holder:
                bits = bits | static_mask_holder["bits"]
            total += w["mask"] * loss_mask(
                SilhouetteMask(state.camera.width, state.camera.height, bits),
                state.human_mask)
        total += w["pose_reg"] * loss_pose_reg(x, x_star)
        return total

    rebuild_sdf(x_star)
    lr, fd = config.learning_rates, config.fd_steps
    groups = [ParamGroup("joints", 0, len(joints) * 3, lr["joints"], fd["joints"])]
    res = adam_minimize(loss, x_star.copy(), groups,
                        max_iterations=config.max_iterations,
                        rel_improvement_tol=config.rel_improvement_tol,
                        patience=config.patience, min_iterations=config.min_iterations,
                        on_iteration=on_iteration)
    return pose_of(res.x), res.trace, False


def contacting_chains(model: BodyModel, correspondences: CorrespondenceSet) -> list:
    """Kinematic chains of every part touched by the correspondence set."""
    parts = []
    for v, _ in correspondences.pairs:
        part = model.vertex_parts[v]
        if part not in parts:
            parts.append(part)
    chains = []
    seen = set()
    for part in parts:
        chain = kinematic_chain(model, part)
        if chain.joints and chain.joints not in seen:
            seen.add(chain.joints)
            chains.append(chain)
    return chains


def fit(inputs: FitInputs, config: FitConfig = None, stages=(1, 2, 3)) -> FitResult:
    """Run the registration stages in order and return the best-iterate state.

    Deterministic for identical inputs and config; stage errors propagate
    wrapped with the stage identity.
    """
    config = config or FitConfig()
    t_start = time.perf_counter()
    traces: dict[str, list] = {}
    model = inputs.body_model
    body_mesh = model.template.with_vertices(pose_vertices(model, inputs.initial_pose))
    obj_centered, centroid = center_object(inputs.object_mesh)

    if not inputs.correspondences.pairs:
        raise FitStageError(1, EmptyCorrespondencesError("no contact correspondences"))

    pose = None
    try:
        pose, trace1 = stage1_register(inputs.correspondences, body_mesh, obj_centered,
                                       scale=inputs.scale_init, config=config)
        traces["stage1"] = trace1
    except Exception as e:
        raise FitStageError(1, e) from e

    if 2 in stages:
        try:
            body_sdf = build_sdf(body_mesh, config.sdf_voxel_size, config.sdf_padding)
            state2 = Stage2State(body_mesh, body_sdf, obj_centered,
                                 inputs.correspondences, inputs.camera,
                                 inputs.object_mask, pose, inputs.scale_init)
            pose, trace2 = stage2_refine(state2, config)
            traces["stage2"] = trace2
        except FitStageError:
            raise
        except Exception as e:
            raise FitStageError(2, e) from e

    body_pose = inputs.initial_pose.copy()
    empty_chains = False
    if 3 in stages:
        try:
            chains = contacting_chains(model, inputs.correspondences)
            state3 = Stage3State(model, inputs.initial_pose, obj_centered, pose,
                                 inputs.correspondences, inputs.camera,
                                 inputs.human_mask)
            body_pose, trace3, empty_chains = stage3_refine(state3, config, chains)
            traces["stage3"] = trace3
        except FitStageError:
            raise
        except Exception as e:
            raise FitStageError(3, e) from e

    return FitResult(
        object_pose=pose,
        body_pose=body_pose,
        stage_traces=traces,
        dropped_correspondences=len(inputs.correspondences.dropped),
        empty_chains=empty_chains,
        object_centroid=centroid,
        timing_seconds=time.perf_counter() - t_start,
    )
