"""Synthetic fitting scenes with exact ground truth.

The box-grasp scene holds a box pressed against the chest with one hand, a
two-patch grasp: the torso patch pins the object pose through contacts alone
(the torso is never refined), while the hand patch ties the object to the arm
chain that the last stage refines. Contact correspondences come from the
ground-truth arrangement and the ground-truth masks are rendered with the
package's own rasterizer. Initialization is then perturbed by a seeded amount
(10 cm object translation, 15 degrees rotation, 10% scale, 0.2 rad on the
contacting elbow), which the fitting stages must undo.

Out-of-plane object rotation is nearly unobservable in a silhouette, so a
single small contact patch on a perturbed limb would leave the object tilted
and the limb anchored wrong; the torso patch is what makes the scene
well-posed at these tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import BodyModel, PoseVector, pose_body
from .camera import Camera
from .contact import CorrespondenceSet
from .mesh import SurfaceMesh, closest_surface_point
from .pipeline import FitConfig, FitInputs
from .raster import SilhouetteMask, rasterize_silhouette, rasterize_vertices
from .rigid import RigidPose
from .shapes import box
from .toybody import JOINT_NAMES, toy_humanoid

BOX_SIZE = (0.18, 0.16, 0.08)
CONTACT_RADIUS = 0.02
CONTACT_GAP = 0.001
CONTACT_JITTER = 0.012  # annotated correspondences are never exact
_BOX_CENTER_XY = (0.055, 0.295)


@dataclass
class BoxGraspScenario:
    model: BodyModel
    theta_gt: PoseVector
    theta_init: PoseVector
    camera: Camera
    object_mesh: SurfaceMesh          # local coordinates, centered at origin
    gt_object_pose: RigidPose
    init_object_pose: RigidPose       # perturbed start, for reporting only
    scale_gt: float
    scale_init: float
    correspondences: CorrespondenceSet
    contact_vertices: list
    object_mask: SilhouetteMask
    human_mask: SilhouetteMask
    config: FitConfig
    seed: int

    def fit_inputs(self) -> FitInputs:
        return FitInputs(
            body_model=self.model,
            initial_pose=self.theta_init,
            camera=self.camera,
            object_mesh=self.object_mesh,
            scale_init=self.scale_init,
            correspondences=self.correspondences,
            object_mask=self.object_mask,
            human_mask=self.human_mask,
        )

    def gt_meshes(self):
        body = pose_body(self.model, self.theta_gt)
        obj = self.object_mesh.with_vertices(
            self.gt_object_pose.apply(self.object_mesh.vertices))
        return body, obj


def default_scene_camera() -> Camera:
    return Camera(fx=360.0, fy=360.0, cx=120.0, cy=90.0, width=240, height=180)


def scenario_config() -> FitConfig:
    cfg = FitConfig()
    cfg.fd_steps = {"rotation": 0.03, "translation": 0.02, "scale": 0.03, "joints": 0.02}
    cfg.sdf_voxel_size = 0.06
    cfg.sdf_padding = 0.08
    cfg.sdf_rebuild_interval = 30
    cfg.max_iterations = 150
    cfg.min_iterations = 30
    return cfg


def _random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _solve_grasp_pose(model: BodyModel, theta: PoseVector, palm_targets: np.ndarray,
                      palm_vertices: list, joint_targets: dict) -> PoseVector:
    """Solve the left-arm joint rotations that place the palm vertices at the
    given world targets, with soft targets pulling the wrist and elbow so the
    forearm lies across the box front (least squares over shoulder, elbow,
    wrist)."""
    from scipy.optimize import least_squares

    from .body import joint_world_transforms, pose_vertices

    joints = [JOINT_NAMES.index(j) for j in ("leftShoulder", "leftElbow", "leftWrist")]
    soft = sorted(joint_targets)

    def residual(x):
        th = theta.copy()
        th.rotations[joints] = x.reshape(-1, 3)
        verts = pose_vertices(model, th)
        out = [(verts[palm_vertices] - palm_targets).reshape(-1)]
        world = joint_world_transforms(model, th)
        for j in soft:
            pos = world[j][:3, 3] + th.root_translation
            out.append(0.5 * (pos - joint_targets[j]))
        return np.concatenate(out)

    x0 = np.zeros(9)
    x0[4] = -np.pi / 2.0  # elbow pre-bend toward the chest
    sol = least_squares(residual, x0, method="lm", xtol=1e-14, ftol=1e-14)
    out = theta.copy()
    out.rotations[joints] = sol.x.reshape(-1, 3)
    return out


def box_grasp_scenario(seed: int = 0, model: BodyModel = None) -> BoxGraspScenario:
    """Build the seeded box-grasp scene (see module docstring)."""
    rng = np.random.default_rng(seed)
    model = model or toy_humanoid(divisions=1, hand_divisions=2, torso_divisions=6)
    camera = default_scene_camera()

    base_pose = PoseVector.zero(model.n_joints)
    base_pose.root_translation = np.array([0.0, -1.0, 2.5])
    elbow = JOINT_NAMES.index("leftElbow")

    # box resting on the chest: its back face sits on the torso front plane
    torso_front_z = 2.5 + 0.065
    gt_translation = np.array([_BOX_CENTER_XY[0], _BOX_CENTER_XY[1],
                               torso_front_z + CONTACT_GAP + BOX_SIZE[2] / 2.0])
    obj = box(size=BOX_SIZE, center=(0.0, 0.0, 0.0), divisions=1)
    gt_pose = RigidPose(np.zeros(3), gt_translation, 1.0)
    obj_gt_world = obj.with_vertices(gt_pose.apply(obj.vertices))

    # palm pressed flat on the box front: solve the arm pose for the palm
    # vertex ring (the hand's local -x face maps onto the -z world direction)
    hand_idx = [i for i, p in enumerate(model.vertex_parts) if p == "leftHand"]
    hand_local = model.template.vertices[hand_idx]
    palm_y = hand_local[:, 1].min()
    palm_sel = [i for i, v in zip(hand_idx, hand_local) if v[1] < palm_y + 1e-9]
    palm_local = model.template.vertices[palm_sel]
    palm_center_local = palm_local.mean(axis=0)
    # local x (fingers) -> world +y, local y (palm normal side) -> world +x,
    # local z -> world -z; right-handed
    R_des = np.array([[0.0, 1.0, 0.0],
                      [1.0, 0.0, 0.0],
                      [0.0, 0.0, -1.0]])
    # palm: the hand's broad face (local -y) pressed flat on the box's +x
    # side, fingers up, so penetration pushes act along x where the mask can
    # see them (depth along z stays braced by the chest alone)
    side_x = gt_translation[0] + BOX_SIZE[0] / 2.0 + CONTACT_GAP
    palm_center_world = np.array([side_x, gt_translation[1], gt_translation[2]])
    palm_targets = palm_center_world + (palm_local - palm_center_local) @ R_des.T
    # soft wrist/elbow targets keep the forearm below the hand, bending back
    # toward the shoulder
    shoulder_pos = np.array(
        [0.18, 1.40, 0.0]) + base_pose.root_translation
    wrist_est = palm_center_world + np.array([0.025, -0.06, 0.0])
    u = shoulder_pos - wrist_est
    u /= np.linalg.norm(u)
    wrist_idx = JOINT_NAMES.index("leftWrist")
    elbow_idx = JOINT_NAMES.index("leftElbow")
    elbow_target = wrist_est + 0.30 * np.array([u[0], 0.3, u[2]]) / np.linalg.norm(
        [u[0], 0.3, u[2]])
    theta_gt = _solve_grasp_pose(model, base_pose, palm_targets, palm_sel,
                                 {wrist_idx: wrist_est, elbow_idx: elbow_target})

    body_gt = pose_body(model, theta_gt)
    pairs = []
    contact_vertices = []
    for i, v in enumerate(body_gt.vertices):
        if model.vertex_parts[i] not in ("leftHand", "leftForeArm", "torso"):
            continue
        sp, dist = closest_surface_point(obj_gt_world, v)
        if dist <= CONTACT_RADIUS:
            # jitter the object point along the surface, as a human annotation
            # or a retrieved correspondence would be
            noisy = obj_gt_world.position(sp) + CONTACT_JITTER * rng.normal(size=3)
            sp, _ = closest_surface_point(obj_gt_world, noisy)
            pairs.append((int(i), sp))
            contact_vertices.append(int(i))
    correspondences = CorrespondenceSet(pairs, (0,))

    object_mask = rasterize_silhouette(obj, gt_pose, camera)
    human_mask = rasterize_vertices(body_gt.vertices, body_gt.faces, camera)

    theta_init = theta_gt.copy()
    theta_init.rotations[elbow] = theta_gt.rotations[elbow] + 0.2 * _random_unit(rng)
    # translation perturbation points into the chest so the starting state
    # carries real interpenetration for the fit to undo
    into_body = np.array([0.0, 0.0, 2.5]) + [0.0, 1.26 - 1.0, 0.0] - gt_translation
    into_body = into_body / np.linalg.norm(into_body)
    init_pose = RigidPose(
        gt_pose.rotation + (np.pi / 12.0) * _random_unit(rng),
        gt_pose.translation + 0.10 * into_body,
        gt_pose.scale * 1.10,
    )

    return BoxGraspScenario(
        model=model,
        theta_gt=theta_gt,
        theta_init=theta_init,
        camera=camera,
        object_mesh=obj,
        gt_object_pose=gt_pose,
        init_object_pose=init_pose,
        scale_gt=1.0,
        scale_init=1.10,
        correspondences=correspondences,
        contact_vertices=contact_vertices,
        object_mask=object_mask,
        human_mask=human_mask,
        config=scenario_config(),
        seed=seed,
    )
