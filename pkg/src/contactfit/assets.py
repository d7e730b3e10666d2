"""On-disk emission of synthetic scenarios and annotation-service assets."""

from __future__ import annotations

import os

import numpy as np

from .documents import (
    AnnotationDocument,
    PatchAnnotation,
    save_annotation,
    save_body_model,
    save_json,
)
from .meshio import save_mask_file, save_ply
from .synth import box_grasp_scenario


def write_box_grasp_scenario(out_dir: str, seed: int = 0) -> None:
    """Emit every file the `fit` subcommand needs, plus the ground truth."""
    sc = box_grasp_scenario(seed=seed)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)

    save_body_model(sc.model, os.path.join(out_dir, "body_model.json"))
    save_ply(sc.object_mesh, os.path.join(out_dir, "object.ply"))
    save_json(sc.camera.to_dict(), os.path.join(out_dir, "camera.json"))
    save_mask_file(sc.object_mask, os.path.join(out_dir, "masks", "object_mask.pgm"))
    save_mask_file(sc.human_mask, os.path.join(out_dir, "masks", "human_mask.pgm"))

    patch = PatchAnnotation(
        patch_id=0,
        source_axis_waypoints=[],
        axis_length=0.0,
        records=[],
        object_id="box",
        click1={},
        click2=[],
        pairs=[(v, sp.to_dict()) for v, sp in sc.correspondences.pairs],
        dropped=[],
    )
    doc = AnnotationDocument.create(
        image_id=f"box-grasp-{seed}",
        image_path="",
        body_contacts=sc.contact_vertices,
        patches=[patch],
        annotator="synth",
        timestamp="0",
    )
    doc.raw["object_mesh"] = "object.ply"
    save_annotation(doc, os.path.join(out_dir, "annotation.json"))

    config = sc.config.to_dict()
    config["init"] = {
        "theta": sc.theta_init.rotations.tolist(),
        "root_translation": sc.theta_init.root_translation.tolist(),
        "scale": sc.scale_init,
    }
    save_json(config, os.path.join(out_dir, "config.json"))
    save_json({
        "seed": seed,
        "theta_gt": sc.theta_gt.rotations.tolist(),
        "root_translation_gt": sc.theta_gt.root_translation.tolist(),
        "object_pose_gt": sc.gt_object_pose.to_dict(),
        "object_pose_init": sc.init_object_pose.to_dict(),
        "scale_gt": sc.scale_gt,
    }, os.path.join(out_dir, "ground_truth.json"))


def write_annotation_box_assets(out_dir: str, session_id: str = "box") -> None:
    """Emit a service session: test body with contact patches plus a box object."""
    from .shapes import box
    from .toybody import toy_humanoid

    model = toy_humanoid(divisions=3, hand_divisions=3)
    body = model.template
    session_dir = os.path.join(out_dir, session_id)
    os.makedirs(session_dir, exist_ok=True)

    save_ply(body, os.path.join(session_dir, "body.ply"))
    obj = box(size=(0.25, 0.35, 0.25), center=(0.0, 0.0, 0.0), divisions=4)
    save_ply(obj, os.path.join(session_dir, "object.ply"))

    # contacts: the torso front face and the left-hand front face
    verts = body.vertices
    torso = [i for i, p in enumerate(model.vertex_parts) if p == "torso"]
    torso_front = [i for i in torso
                   if verts[i][2] >= max(verts[j][2] for j in torso) - 1e-9]
    hand = [i for i, p in enumerate(model.vertex_parts) if p == "leftHand"]
    hand_front = [i for i in hand
                  if verts[i][0] >= max(verts[j][0] for j in hand) - 1e-9]
    contacts = sorted(torso_front + hand_front)
    save_json({"vertices": contacts}, os.path.join(session_dir, "contacts.json"))
    save_json({
        "image": "synthetic://annotation-box",
        "body_mesh": "body.ply",
        "object_mesh": "object.ply",
        "contacts": "contacts.json",
        "object_id": "box",
    }, os.path.join(session_dir, "meta.json"))
