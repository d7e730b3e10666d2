"""Command-line interface.

Subcommands: transfer (headless two-click contact transfer), fit (three-stage
registration), retrieve (embedding store query), eval (batch metrics), synth
(synthetic scene generation), serve (annotation HTTP service).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="contactfit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", help="two-click contact transfer onto an object mesh")
    p.add_argument("--body", required=True)
    p.add_argument("--contacts", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--clicks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-id", default="headless")

    p = sub.add_parser("fit", help="run the three-stage registration")
    p.add_argument("--annotation", required=True)
    p.add_argument("--body-model", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--object", help="object mesh (overrides the annotation's reference)")
    p.add_argument("--stages", default="1,2,3")

    p = sub.add_parser("retrieve", help="nearest objects in an embedding store")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=3)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--contact-threshold", type=float, default=0.05)

    p = sub.add_parser("synth", help="generate a synthetic scenario directory")
    p.add_argument("--scenario", required=True, choices=["box-grasp", "annotation-box"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--assets", required=True)

    args = parser.parse_args(argv)
    return {
        "transfer": _cmd_transfer,
        "fit": _cmd_fit,
        "retrieve": _cmd_retrieve,
        "eval": _cmd_eval,
        "synth": _cmd_synth,
        "serve": _cmd_serve,
    }[args.command](args)


def _cmd_transfer(args) -> int:
    from .contact import extract_patches, parameterize_patch, synthesize_axis, \
        transfer_patch, unpack_axis
    from .documents import AnnotationDocument, PatchAnnotation, load_json, save_annotation
    from .mesh import SurfacePoint
    from .meshio import load_mesh_file

    body = load_mesh_file(args.body)
    obj = load_mesh_file(args.object)
    contacts = load_json(args.contacts)
    clicks = load_json(args.clicks)
    contact_set = {int(v) for v in contacts["vertices"]}
    patches = extract_patches(body, contact_set)
    click_map = {int(c["patch_id"]): c for c in clicks["clicks"]}

    annotations = []
    for patch in patches:
        click = click_map.get(patch.patch_id)
        if click is None:
            continue
        axis = synthesize_axis(body, patch)
        param = parameterize_patch(body, patch, axis)
        click1 = click["click1"]
        if isinstance(click1, dict):
            start = SurfacePoint.from_dict(click1)
        else:
            from .mesh import closest_surface_point
            start, _ = closest_surface_point(obj, np.asarray(click1, dtype=np.float64))
        target_axis = unpack_axis(obj, axis, start, np.asarray(click["click2"], dtype=np.float64))
        points, cs = transfer_patch(obj, param, target_axis)
        annotations.append(PatchAnnotation(
            patch_id=patch.patch_id,
            source_axis_waypoints=[p.tolist() for p in axis.path.points],
            axis_length=axis.length,
            records=param.records,
            object_id=clicks.get("object_id", os.path.basename(args.object)),
            click1=start.to_dict(),
            click2=[float(x) for x in click["click2"]],
            pairs=[(v, sp.to_dict()) for v, sp in cs.pairs],
            dropped=list(cs.dropped),
        ))
    doc = AnnotationDocument.create(
        image_id=args.image_id,
        image_path=clicks.get("image_path", ""),
        body_contacts=contact_set,
        patches=annotations,
        annotator=clicks.get("annotator", "cli"),
        timestamp=str(int(time.time())),
    )
    save_annotation(doc, args.out)
    print(f"wrote {args.out}: {len(annotations)} patches, "
          f"{sum(len(p.pairs) for p in annotations)} correspondences")
    return 0


def _cmd_fit(args) -> int:
    from .contact import CorrespondenceSet
    from .documents import load_annotation, load_body_model, load_json, save_fit_result
    from .camera import Camera
    from .body import PoseVector
    from .meshio import load_mask_file, load_mesh_file
    from .pipeline import FitConfig, FitInputs, fit

    doc = load_annotation(args.annotation)
    model = load_body_model(args.body_model)
    camera = Camera.from_dict(load_json(args.camera))
    config_doc = load_json(args.config)
    config = FitConfig.from_dict(config_doc)

    object_path = args.object
    if object_path is None:
        object_path = os.path.join(os.path.dirname(args.annotation),
                                   doc.raw.get("object_mesh", "object.ply"))
    obj = load_mesh_file(object_path)

    init = config_doc.get("init", {})
    theta = PoseVector(
        np.asarray(init.get("theta", np.zeros((model.n_joints, 3)).tolist())),
        np.asarray(init.get("root_translation", [0.0, 0.0, 0.0])),
    )
    scale_init = float(init.get("scale", 1.0))

    pairs = doc.correspondence_pairs()
    correspondences = CorrespondenceSet(pairs, tuple(p.patch_id for p in doc.patches))

    object_mask = load_mask_file(os.path.join(args.masks, "object_mask.pgm"))
    human_mask = load_mask_file(os.path.join(args.masks, "human_mask.pgm"))

    stages = tuple(int(s) for s in args.stages.split(","))
    inputs = FitInputs(model, theta, camera, obj, scale_init, correspondences,
                       object_mask, human_mask)
    result = fit(inputs, config, stages=stages)
    save_fit_result(result, args.out)
    final_losses = {k: v[-1] for k, v in result.stage_traces.items()}
    print(f"wrote {args.out}; final losses {final_losses}")
    return 0


def _cmd_retrieve(args) -> int:
    from .documents import load_embedding_store, load_json
    from .retrieval import nn_objects

    store = load_embedding_store(args.store)
    query = np.asarray(load_json(args.query), dtype=np.float64)
    hits = nn_objects(store, query, k=args.k)
    qn = np.linalg.norm(query)
    out = []
    for r in hits:
        v = r.vector.astype(np.float64)
        sim = float(np.dot(v, query) / (np.linalg.norm(v) * qn)) if qn else 0.0
        out.append({"id": r.object_id, "similarity": sim,
                    "mesh": r.mesh_path, "category": r.category})
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def _cmd_eval(args) -> int:
    from .documents import save_json
    from .meshio import load_mesh_file
    from .metrics import contact_f1, gt_contact_extract, pa_cd

    sample_names = sorted(
        d for d in os.listdir(args.pred)
        if os.path.isdir(os.path.join(args.pred, d)))
    rows = []
    t0 = time.perf_counter()
    for name in sample_names:
        pred_h = load_mesh_file(os.path.join(args.pred, name, "human.ply"))
        pred_o = load_mesh_file(os.path.join(args.pred, name, "object.ply"))
        gt_h = load_mesh_file(os.path.join(args.gt, name, "human.ply"))
        gt_o = load_mesh_file(os.path.join(args.gt, name, "object.ply"))
        cd_h, cd_o, cd_ho = pa_cd(pred_h, pred_o, gt_h, gt_o, n_samples=args.samples)
        pred_contacts, _ = gt_contact_extract(pred_h, pred_o, args.contact_threshold)
        gt_contacts, _ = gt_contact_extract(gt_h, gt_o, args.contact_threshold)
        _, _, f1 = contact_f1(pred_contacts, gt_contacts)
        rows.append({"sample": name, "cd_h_cm": cd_h, "cd_o_cm": cd_o,
                     "cd_combined_cm": cd_ho, "contact_f1": f1})
    runtime = time.perf_counter() - t0
    report = {
        "samples": rows,
        "aggregate": {
            "cd_h_cm": float(np.mean([r["cd_h_cm"] for r in rows])) if rows else None,
            "cd_o_cm": float(np.mean([r["cd_o_cm"] for r in rows])) if rows else None,
            "cd_combined_cm": float(np.mean([r["cd_combined_cm"] for r in rows])) if rows else None,
            "contact_f1": float(np.mean([r["contact_f1"] for r in rows])) if rows else None,
        },
        "runtime_seconds": runtime,
        "n_samples": args.samples,
        "contact_threshold": args.contact_threshold,
    }
    save_json(report, args.out)
    print(f"wrote {args.out}: {len(rows)} samples")
    return 0


def _cmd_synth(args) -> int:
    from .assets import write_annotation_box_assets, write_box_grasp_scenario

    os.makedirs(args.out, exist_ok=True)
    if args.scenario == "box-grasp":
        write_box_grasp_scenario(args.out, seed=args.seed)
    else:
        write_annotation_box_assets(args.out)
    print(f"wrote scenario {args.scenario} to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import run_server

    run_server(port=args.port, assets_dir=args.assets)
    return 0


if __name__ == "__main__":
    sys.exit(main())
