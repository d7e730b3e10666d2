"""Desk-scale articulated test body: 17 joints, box-segment limbs.

Each body segment is a closed subdivided box rigidly skinned to its joint;
segments are separated by small gaps so the union stays closed and parity
tests remain valid. Part labels follow the standard part vocabulary.
"""

from __future__ import annotations

import numpy as np

from .body import BodyModel
from .mesh import build_mesh
from .shapes import box

JOINT_NAMES = [
    "hips", "spine", "torso", "neck", "head",
    "leftShoulder", "leftElbow", "leftWrist",
    "rightShoulder", "rightElbow", "rightWrist",
    "leftHip", "leftKnee", "leftAnkle",
    "rightHip", "rightKnee", "rightAnkle",
]

PARENTS = [-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15]

JOINT_POSITIONS = {
    "hips": (0.0, 1.00, 0.0),
    "spine": (0.0, 1.12, 0.0),
    "torso": (0.0, 1.28, 0.0),
    "neck": (0.0, 1.45, 0.0),
    "head": (0.0, 1.55, 0.0),
    "leftShoulder": (0.18, 1.40, 0.0),
    "leftElbow": (0.46, 1.40, 0.0),
    "leftWrist": (0.72, 1.40, 0.0),
    "rightShoulder": (-0.18, 1.40, 0.0),
    "rightElbow": (-0.46, 1.40, 0.0),
    "rightWrist": (-0.72, 1.40, 0.0),
    "leftHip": (0.09, 0.96, 0.0),
    "leftKnee": (0.09, 0.54, 0.0),
    "leftAnkle": (0.09, 0.12, 0.0),
    "rightHip": (-0.09, 0.96, 0.0),
    "rightKnee": (-0.09, 0.54, 0.0),
    "rightAnkle": (-0.09, 0.12, 0.0),
}

CORE_JOINTS = frozenset({0, 1, 2})

PART_JOINT = {
    "head": "head", "neck": "neck", "torso": "torso", "hips": "hips",
    "leftUpperArm": "leftShoulder", "leftForeArm": "leftElbow", "leftHand": "leftWrist",
    "rightUpperArm": "rightShoulder", "rightForeArm": "rightElbow", "rightHand": "rightWrist",
    "leftUpperLeg": "leftHip", "leftLowerLeg": "leftKnee",
    "leftFootSole": "leftAnkle", "topOfLeftFoot": "leftAnkle",
    "rightUpperLeg": "rightHip", "rightLowerLeg": "rightKnee",
    "rightFootSole": "rightAnkle", "topOfRightFoot": "rightAnkle",
}

# part -> (center, size, joint); mirrored entries derived below
_SEGMENTS = {
    "hips": ((0.0, 1.00, 0.0), (0.24, 0.16, 0.14), "hips"),
    "torso": ((0.0, 1.26, 0.0), (0.26, 0.26, 0.13), "torso"),
    "neck": ((0.0, 1.47, 0.0), (0.07, 0.07, 0.07), "neck"),
    "head": ((0.0, 1.62, 0.0), (0.16, 0.18, 0.16), "head"),
    "leftUpperArm": ((0.32, 1.40, 0.0), (0.25, 0.07, 0.07), "leftShoulder"),
    "leftForeArm": ((0.59, 1.40, 0.0), (0.23, 0.06, 0.06), "leftElbow"),
    "leftHand": ((0.78, 1.40, 0.0), (0.11, 0.05, 0.09), "leftWrist"),
    "leftUpperLeg": ((0.09, 0.73, 0.0), (0.11, 0.34, 0.11), "leftHip"),
    "leftLowerLeg": ((0.09, 0.33, 0.0), (0.09, 0.38, 0.09), "leftKnee"),
    "leftFoot": ((0.09, 0.06, 0.05), (0.09, 0.10, 0.20), "leftAnkle"),
}


def _mirrored(name: str):
    return name.replace("left", "right").replace("Left", "Right")


def _all_segments():
    segs = {}
    for name, (center, size, joint) in _SEGMENTS.items():
        segs[name] = (np.array(center), np.array(size), joint)
        if name.startswith("left"):
            c = np.array(center) * np.array([-1.0, 1.0, 1.0])
            segs[_mirrored(name)] = (c, np.array(size), _mirrored(joint))
    return segs


def toy_humanoid(divisions: int = 2, hand_divisions: int = 3,
                 torso_divisions: int = None) -> BodyModel:
    """Build the 17-joint test body.

    `divisions` subdivides each segment box side; hands get
    `hand_divisions` (and optionally the torso `torso_divisions`) so contact
    patches have enough vertices.
    """
    joint_index = {n: i for i, n in enumerate(JOINT_NAMES)}
    all_verts = []
    all_faces = []
    vertex_parts = []
    vertex_joints = []

    for name, (center, size, joint) in sorted(_all_segments().items()):
        if name.endswith("Hand"):
            div = hand_divisions
        elif name == "torso" and torso_divisions is not None:
            div = torso_divisions
        else:
            div = divisions
        seg = box(size=size, center=center, divisions=div)
        offset = len(all_verts)
        all_verts.extend(seg.vertices)
        all_faces.extend((seg.faces + offset).tolist())
        j = joint_index[joint]
        if name.endswith("Foot"):
            side = "left" if name.startswith("left") else "right"
            sole = f"{side}FootSole"
            top = f"topOf{side.capitalize()}Foot"
            y_min = seg.vertices[:, 1].min()
            for v in seg.vertices:
                vertex_parts.append(sole if v[1] < y_min + 1e-9 else top)
                vertex_joints.append(j)
        else:
            vertex_parts.extend([name] * seg.n_vertices)
            vertex_joints.extend([j] * seg.n_vertices)

    template = build_mesh(np.array(all_verts), np.array(all_faces))
    V = template.n_vertices
    skin_joints = np.array(vertex_joints, dtype=np.int64).reshape(V, 1)
    skin_weights = np.ones((V, 1))
    positions = np.array([JOINT_POSITIONS[n] for n in JOINT_NAMES])
    part_joint = {p: joint_index[j] for p, j in PART_JOINT.items()}
    return BodyModel(
        template=template,
        joint_names=list(JOINT_NAMES),
        parents=np.array(PARENTS),
        joint_positions=positions,
        skin_joints=skin_joints,
        skin_weights=skin_weights,
        vertex_parts=vertex_parts,
        part_joint=part_joint,
        core_joints=CORE_JOINTS,
    )
