"""Articulated linear-blend-skinned body model with named parts.

The model is format-generic: a template mesh, a joint tree with rest
positions, per-vertex skinning weights, and a part label per vertex. A
kinematic chain runs from a torso-adjacent joint down to the joint driving a
contacting part; those are the only pose parameters refined in the last
fitting stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, UnknownPartError
from .geometry import rodrigues
from .mesh import SurfaceMesh

PART_NAMES = (
    "head", "neck", "torso", "hips",
    "leftUpperArm", "rightUpperArm", "leftForeArm", "rightForeArm",
    "leftHand", "rightHand",
    "leftUpperLeg", "rightUpperLeg", "leftLowerLeg", "rightLowerLeg",
    "leftFootSole", "rightFootSole", "topOfLeftFoot", "topOfRightFoot",
)

FOOT_PARTS = ("leftFootSole", "rightFootSole", "topOfLeftFoot", "topOfRightFoot")


@dataclass
class PoseVector:
    """Axis-angle rotation per joint plus a root translation."""

    rotations: np.ndarray        # (J, 3) radians
    root_translation: np.ndarray  # (3,) meters

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64)
        if not np.all(np.isfinite(self.rotations)) or \
           not np.all(np.isfinite(self.root_translation)):
            raise ValueError("pose contains non-finite values")
        if np.any(np.linalg.norm(self.rotations, axis=-1) >= 2.0 * np.pi):
            raise ValueError("joint rotation magnitude must stay below 2*pi")

    def copy(self) -> "PoseVector":
        return PoseVector(self.rotations.copy(), self.root_translation.copy())

    @staticmethod
    def zero(n_joints: int) -> "PoseVector":
        return PoseVector(np.zeros((n_joints, 3)), np.zeros(3))


@dataclass
class ChainSpec:
    """Ordered joint indices from a torso-adjacent root to a contacting joint."""

    joints: tuple

    def __len__(self):
        return len(self.joints)


@dataclass
class BodyModel:
    template: SurfaceMesh
    joint_names: list
    parents: np.ndarray           # (J,) parent index, -1 for the root
    joint_positions: np.ndarray   # (J, 3) rest positions
    skin_joints: np.ndarray       # (V, K) joint index per slot
    skin_weights: np.ndarray      # (V, K) weight per slot, rows sum to 1
    vertex_parts: list            # part name per vertex
    part_joint: dict              # part name -> joint index
    core_joints: frozenset        # joints whose descendants start chains

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=np.int64)
        self.joint_positions = np.asarray(self.joint_positions, dtype=np.float64)
        self.skin_joints = np.asarray(self.skin_joints, dtype=np.int64)
        self.skin_weights = np.asarray(self.skin_weights, dtype=np.float64)
        if self.parents[0] != -1:
            raise ValueError("joint 0 must be the root")
        if np.any(self.parents[1:] >= np.arange(1, len(self.parents))):
            raise ValueError("parent index must precede the child")
        if self.skin_joints.shape[1] > 8:
            raise ValueError("at most 8 skinning influences per vertex")
        if np.any(self.skin_weights < -1e-12):
            raise ValueError("skinning weights must be nonnegative")
        sums = self.skin_weights.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError("skinning weights must sum to 1 per vertex")

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    def part_vertices(self, part: str) -> np.ndarray:
        if part not in PART_NAMES:
            raise UnknownPartError(f"unknown body part {part!r}")
        return np.array([i for i, p in enumerate(self.vertex_parts) if p == part],
                        dtype=np.int64)

    def part_map(self) -> dict:
        out: dict[str, set] = {}
        for i, p in enumerate(self.vertex_parts):
            out.setdefault(p, set()).add(i)
        return out


def joint_world_transforms(model: BodyModel, pose: PoseVector) -> np.ndarray:
    """Forward kinematics: (J, 4, 4) world transform per joint.

    Each joint rotates about its rest position; the root translation is NOT
    folded in here (it is a uniform offset applied after skinning).
    """
    J = model.n_joints
    if pose.rotations.shape != (J, 3):
        raise DimensionMismatchError(
            f"pose has {pose.rotations.shape[0]} joints, model has {J}")
    world = np.empty((J, 4, 4))
    for j in range(J):
        local = np.eye(4)
        local[:3, :3] = rodrigues(pose.rotations[j])
        parent = int(model.parents[j])
        if parent < 0:
            local[:3, 3] = model.joint_positions[j]
            world[j] = local
        else:
            local[:3, 3] = model.joint_positions[j] - model.joint_positions[parent]
            world[j] = world[parent] @ local
    return world


def pose_vertices(model: BodyModel, pose: PoseVector) -> np.ndarray:
    """Skinned vertex positions for a pose; topology untouched."""
    world = joint_world_transforms(model, pose)
    # skinning transform maps rest space: S_j = world_j @ T(-rest_j)
    S = world.copy()
    for j in range(model.n_joints):
        S[j, :3, 3] = world[j, :3, 3] - world[j, :3, :3] @ model.joint_positions[j]
    V = model.template.vertices
    out = np.zeros_like(V)
    K = model.skin_joints.shape[1]
    for k in range(K):
        joints = model.skin_joints[:, k]
        weights = model.skin_weights[:, k]
        active = weights > 0.0
        if not np.any(active):
            continue
        for j in np.unique(joints[active]):
            sel = active & (joints == j)
            out[sel] += weights[sel, None] * (V[sel] @ S[j, :3, :3].T + S[j, :3, 3])
    return out + pose.root_translation


def pose_body(model: BodyModel, pose: PoseVector) -> SurfaceMesh:
    """Posed body mesh via forward kinematics and linear blend skinning."""
    return model.template.with_vertices(pose_vertices(model, pose))


def kinematic_chain(model: BodyModel, contact_part: str) -> ChainSpec:
    """Joints from the torso-adjacent ancestor down to the part's joint.

    Core joints (torso and its spine ancestors) are never refined, so a core
    part yields an empty chain.
    """
    if contact_part not in PART_NAMES:
        raise UnknownPartError(f"unknown body part {contact_part!r}")
    if contact_part not in model.part_joint:
        raise UnknownPartError(f"model declares no joint for part {contact_part!r}")
    j = int(model.part_joint[contact_part])
    if j in model.core_joints:
        return ChainSpec(())
    chain = []
    while j >= 0 and j not in model.core_joints:
        chain.append(j)
        j = int(model.parents[j])
    chain.reverse()
    return ChainSpec(tuple(chain))
