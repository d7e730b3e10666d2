"""Structured-text documents and the binary embedding store.

Everything human-facing is JSON: annotation documents, body model files,
fit configurations, fit results, and evaluation reports. The embedding store
is the one binary format (header magic "PICOEMB1", little-endian).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .body import BodyModel
from .errors import ParseError, SchemaVersionUnsupportedError
from .mesh import SurfacePoint, build_mesh
from .retrieval import EmbeddingRecord, EmbeddingStore

ANNOTATION_SCHEMA = "contact-annotation/1"
BODY_MODEL_SCHEMA = "body-model/1"

EMB_MAGIC = b"PICOEMB1"


# --- annotation documents -------------------------------------------------------


@dataclass
class PatchAnnotation:
    patch_id: int
    source_axis_waypoints: list      # [[x, y, z], ...] on the body
    axis_length: float
    records: list                    # [(vertex, t, d, alpha), ...]
    object_id: str
    click1: dict                     # SurfacePoint as {"face", "bary"}
    click2: list                     # 3D point
    pairs: list                      # [(vertex, {"face", "bary"}), ...]
    dropped: list = field(default_factory=list)
    picked_rank: int = 0             # rank of the retrieved object the user kept

    def to_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "source_axis_waypoints": self.source_axis_waypoints,
            "axis_length": self.axis_length,
            "records": [list(r) for r in self.records],
            "object_id": self.object_id,
            "click1": self.click1,
            "click2": list(self.click2),
            "pairs": [[v, sp] for v, sp in self.pairs],
            "dropped": list(self.dropped),
            "picked_rank": self.picked_rank,
        }

    @staticmethod
    def from_dict(d: dict) -> "PatchAnnotation":
        return PatchAnnotation(
            patch_id=int(d["patch_id"]),
            source_axis_waypoints=d.get("source_axis_waypoints", []),
            axis_length=float(d.get("axis_length", 0.0)),
            records=[tuple(r) for r in d.get("records", [])],
            object_id=str(d.get("object_id", "")),
            click1=d.get("click1", {}),
            click2=d.get("click2", []),
            pairs=[(int(v), sp) for v, sp in d.get("pairs", [])],
            dropped=[int(v) for v in d.get("dropped", [])],
            picked_rank=int(d.get("picked_rank", 0)),
        )


class AnnotationDocument:
    """Annotation payload plus any unknown fields, preserved across rewrites."""

    def __init__(self, raw: dict):
        if raw.get("schema") != ANNOTATION_SCHEMA:
            raise SchemaVersionUnsupportedError(
                f"unsupported annotation schema {raw.get('schema')!r}")
        ids = [p["patch_id"] for p in raw.get("patches", [])]
        if len(ids) != len(set(ids)):
            raise ParseError("duplicate patch ids in annotation document")
        self.raw = raw

    @staticmethod
    def create(image_id: str, image_path: str, body_contacts, patches,
               annotator: str = "", timestamp: str = "") -> "AnnotationDocument":
        return AnnotationDocument({
            "schema": ANNOTATION_SCHEMA,
            "image_id": image_id,
            "image_path": image_path,
            "body_contacts": sorted(int(v) for v in body_contacts),
            "patches": [p.to_dict() for p in patches],
            "annotator": annotator,
            "timestamps": {"created": timestamp, "modified": timestamp},
        })

    @property
    def image_id(self) -> str:
        return self.raw.get("image_id", "")

    @property
    def body_contacts(self) -> set:
        return {int(v) for v in self.raw.get("body_contacts", [])}

    @property
    def patches(self) -> list:
        return [PatchAnnotation.from_dict(p) for p in self.raw.get("patches", [])]

    def correspondence_pairs(self) -> list:
        pairs = []
        for p in self.patches:
            for v, sp in p.pairs:
                pairs.append((int(v), SurfacePoint.from_dict(sp)))
        return pairs


def save_annotation(doc: AnnotationDocument, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc.raw, f, indent=2, sort_keys=True)
        f.write("\n")


def load_annotation(path: str) -> AnnotationDocument:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"bad annotation JSON: {e.msg}", e.lineno)
    return AnnotationDocument(raw)


# --- body model files -----------------------------------------------------------


def save_body_model(model: BodyModel, path: str) -> None:
    payload = {
        "schema": BODY_MODEL_SCHEMA,
        "vertices": model.template.vertices.tolist(),
        "faces": model.template.faces.tolist(),
        "joint_names": list(model.joint_names),
        "parents": model.parents.tolist(),
        "joint_positions": model.joint_positions.tolist(),
        "skin_joints": model.skin_joints.tolist(),
        "skin_weights": model.skin_weights.tolist(),
        "vertex_parts": list(model.vertex_parts),
        "part_joint": {k: int(v) for k, v in model.part_joint.items()},
        "core_joints": sorted(int(j) for j in model.core_joints),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_body_model(path: str) -> BodyModel:
    with open(path, "r", encoding="utf-8") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"bad body model JSON: {e.msg}", e.lineno)
    if d.get("schema") != BODY_MODEL_SCHEMA:
        raise SchemaVersionUnsupportedError(
            f"unsupported body model schema {d.get('schema')!r}")
    template = build_mesh(np.array(d["vertices"]), np.array(d["faces"]))
    return BodyModel(
        template=template,
        joint_names=list(d["joint_names"]),
        parents=np.array(d["parents"], dtype=np.int64),
        joint_positions=np.array(d["joint_positions"]),
        skin_joints=np.array(d["skin_joints"], dtype=np.int64),
        skin_weights=np.array(d["skin_weights"]),
        vertex_parts=list(d["vertex_parts"]),
        part_joint={k: int(v) for k, v in d["part_joint"].items()},
        core_joints=frozenset(int(j) for j in d["core_joints"]),
    )


# --- embedding store binary -------------------------------------------------------


def save_embedding_store(store: EmbeddingStore, path: str) -> None:
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", len(store.records), store.dimension))
        for r in store.records:
            for text in (r.object_id,):
                encoded = text.encode("utf-8")
                f.write(struct.pack("<I", len(encoded)))
                f.write(encoded)
            f.write(np.asarray(r.vector, dtype="<f4").tobytes())
            for text in (r.mesh_path, r.category):
                encoded = text.encode("utf-8")
                f.write(struct.pack("<I", len(encoded)))
                f.write(encoded)


def load_embedding_store(path: str) -> EmbeddingStore:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != EMB_MAGIC:
        raise ParseError(f"bad embedding store magic {data[:8]!r}", 0)
    pos = 8
    if len(data) < pos + 8:
        raise ParseError("truncated embedding store header", pos)
    count, dim = struct.unpack_from("<II", data, pos)
    pos += 8

    def read_string(pos):
        if len(data) < pos + 4:
            raise ParseError("truncated string length", pos)
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if len(data) < pos + n:
            raise ParseError("truncated string payload", pos)
        return data[pos:pos + n].decode("utf-8"), pos + n

    records = []
    for _ in range(count):
        object_id, pos = read_string(pos)
        if len(data) < pos + 4 * dim:
            raise ParseError("truncated embedding vector", pos)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).copy()
        pos += 4 * dim
        mesh_path, pos = read_string(pos)
        category, pos = read_string(pos)
        records.append(EmbeddingRecord(object_id, vec, mesh_path, category))
    if pos != len(data):
        raise ParseError("trailing bytes after last record", pos)
    return EmbeddingStore(records, int(dim))


# --- fit results and reports -------------------------------------------------------


def save_fit_result(result, path: str) -> None:
    payload = {
        "object_pose": result.object_pose.to_dict(),
        "object_centroid": [float(x) for x in result.object_centroid]
        if result.object_centroid is not None else None,
        "body_pose": {
            "rotations": result.body_pose.rotations.tolist(),
            "root_translation": result.body_pose.root_translation.tolist(),
        },
        "stage_traces": {k: list(map(float, v)) for k, v in result.stage_traces.items()},
        "dropped_correspondences": result.dropped_correspondences,
        "empty_chains": result.empty_chains,
        "timing_seconds": result.timing_seconds,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"bad JSON: {e.msg}", e.lineno)


def save_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
