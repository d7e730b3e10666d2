"""File formats: OBJ/PLY meshes, PGM/PBM masks, documents, embedding stores."""

import json

import numpy as np
import pytest

from contactfit.documents import (
    AnnotationDocument,
    PatchAnnotation,
    load_annotation,
    load_body_model,
    load_embedding_store,
    save_annotation,
    save_body_model,
    save_embedding_store,
)
from contactfit.errors import NonManifoldError, ParseError, SchemaVersionUnsupportedError
from contactfit.meshio import (
    load_mask_file,
    load_mesh_file,
    load_obj,
    load_ply,
    save_mask_file,
    save_obj,
    save_ply,
)
from contactfit.raster import SilhouetteMask
from contactfit.retrieval import EmbeddingRecord, EmbeddingStore
from contactfit.shapes import icosphere, unit_square
from contactfit.toybody import toy_humanoid


# --- OBJ -------------------------------------------------------------------------


def test_obj_unit_square(tmp_path):
    path = tmp_path / "square.obj"
    path.write_text(
        "# comment\n"
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
        "vn 0 0 1\n"
        "f 1 2 3\nf 1 3 4\n")
    mesh = load_obj(str(path))
    assert mesh.n_vertices == 4
    assert mesh.n_faces == 2


def test_obj_quad_fan_triangulated(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = load_obj(str(path))
    assert mesh.n_faces == 2


def test_obj_zero_index_rejected(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
    with pytest.raises(ParseError) as err:
        load_obj(str(path))
    assert "1-based" in str(err.value)


def test_obj_slash_indices(tmp_path):
    path = tmp_path / "tex.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    mesh = load_obj(str(path))
    assert mesh.n_faces == 1


def test_obj_roundtrip(tmp_path):
    ico = icosphere(1)
    path = tmp_path / "ico.obj"
    save_obj(ico, str(path))
    again = load_obj(str(path))
    assert np.array_equal(ico.faces, again.faces)
    assert np.allclose(ico.vertices, again.vertices, atol=0)


def test_obj_nonmanifold_rejected(tmp_path):
    path = tmp_path / "nm.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\nf 1 3 2\n")
    with pytest.raises(NonManifoldError):
        load_obj(str(path))


# --- PLY -------------------------------------------------------------------------


def test_ply_roundtrip_bit_exact(tmp_path):
    ico = icosphere(2)
    path = tmp_path / "ico.ply"
    save_ply(ico, str(path))
    again = load_ply(str(path))
    assert np.array_equal(ico.vertices, again.vertices)  # bit-exact doubles
    assert np.array_equal(ico.faces, again.faces)
    # generic loader dispatches on magic
    assert load_mesh_file(str(path)).n_faces == ico.n_faces


def test_ply_trailing_garbage_rejected(tmp_path):
    ico = icosphere(0)
    path = tmp_path / "bad.ply"
    save_ply(ico, str(path))
    with open(path, "ab") as f:
        f.write(b"junk")
    with pytest.raises(ParseError) as err:
        load_ply(str(path))
    assert err.value.where is not None


def test_ply_truncated_rejected(tmp_path):
    ico = icosphere(0)
    path = tmp_path / "short.ply"
    save_ply(ico, str(path))
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(ParseError):
        load_ply(str(path))


# --- masks -----------------------------------------------------------------------


def test_pgm_threshold_contract(tmp_path):
    path = tmp_path / "m.pgm"
    pixels = bytes([0, 127, 128, 255, 10, 200])
    path.write_bytes(b"P5\n3 2\n255\n" + pixels)
    mask = load_mask_file(str(path))
    assert mask.width == 3 and mask.height == 2
    assert mask.bits.tolist() == [[False, False, True], [True, False, True]]


def test_pgm_all_zero(tmp_path):
    path = tmp_path / "z.pgm"
    path.write_bytes(b"P5\n4 2\n255\n" + bytes(8))
    assert load_mask_file(str(path)).area == 0


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    mask = SilhouetteMask(13, 7, rng.random((7, 13)) > 0.5)
    path = tmp_path / "r.pgm"
    save_mask_file(mask, str(path))
    again = load_mask_file(str(path))
    assert np.array_equal(mask.bits, again.bits)


def test_pbm_bits(tmp_path):
    path = tmp_path / "m.pbm"
    # 10 wide: two bytes per row, pattern 1010101010
    row = bytes([0b10101010, 0b10000000])
    path.write_bytes(b"P4\n10 2\n" + row + row)
    mask = load_mask_file(str(path))
    assert mask.bits[0].tolist() == [True, False] * 5


def test_mask_trailing_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes(5))
    with pytest.raises(ParseError):
        load_mask_file(str(path))


# --- annotation documents -----------------------------------------------------------


def make_doc():
    patch = PatchAnnotation(
        patch_id=0,
        source_axis_waypoints=[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]],
        axis_length=0.1,
        records=[(3, 0.05, 0.01, 0.5)],
        object_id="box",
        click1={"face": 2, "bary": [0.2, 0.3, 0.5]},
        click2=[0.5, 0.5, 0.5],
        pairs=[(3, {"face": 4, "bary": [1.0, 0.0, 0.0]})],
    )
    return AnnotationDocument.create("img-1", "imgs/1.jpg", {3, 4, 5}, [patch],
                                     annotator="test", timestamp="123")


def test_annotation_roundtrip(tmp_path):
    doc = make_doc()
    path = tmp_path / "a.json"
    save_annotation(doc, str(path))
    again = load_annotation(str(path))
    assert again.raw == doc.raw


def test_annotation_duplicate_patch_rejected(tmp_path):
    doc = make_doc()
    doc.raw["patches"].append(dict(doc.raw["patches"][0]))
    path = tmp_path / "dup.json"
    with open(path, "w") as f:
        json.dump(doc.raw, f)
    with pytest.raises(ParseError):
        load_annotation(str(path))


def test_annotation_unknown_fields_preserved(tmp_path):
    doc = make_doc()
    doc.raw["future_field"] = {"nested": [1, 2, 3]}
    path = tmp_path / "f.json"
    save_annotation(doc, str(path))
    again = load_annotation(str(path))
    assert again.raw["future_field"] == {"nested": [1, 2, 3]}
    save_annotation(again, str(path))
    assert load_annotation(str(path)).raw["future_field"] == {"nested": [1, 2, 3]}


def test_annotation_bad_schema(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"schema": "contact-annotation/99", "patches": []}))
    with pytest.raises(SchemaVersionUnsupportedError):
        load_annotation(str(path))


# --- body model ----------------------------------------------------------------------


def test_body_model_roundtrip(tmp_path):
    model = toy_humanoid(divisions=1, hand_divisions=1)
    path = tmp_path / "body.json"
    save_body_model(model, str(path))
    again = load_body_model(str(path))
    assert np.array_equal(model.template.faces, again.template.faces)
    assert np.allclose(model.template.vertices, again.template.vertices)
    assert again.joint_names == model.joint_names
    assert np.array_equal(model.parents, again.parents)
    assert again.vertex_parts == model.vertex_parts
    assert again.part_joint == model.part_joint
    assert again.core_joints == model.core_joints


# --- embedding store -------------------------------------------------------------------


def test_embedding_store_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    records = [
        EmbeddingRecord(f"id-{i}", rng.normal(size=32).astype(np.float32),
                        f"mesh/{i}.ply", f"cat{i % 3}")
        for i in range(25)
    ]
    store = EmbeddingStore(records, 32)
    path = tmp_path / "store.bin"
    save_embedding_store(store, str(path))
    again = load_embedding_store(str(path))
    assert again.dimension == 32
    assert len(again.records) == 25
    for a, b in zip(records, again.records):
        assert a.object_id == b.object_id
        assert np.array_equal(a.vector, b.vector)
        assert a.mesh_path == b.mesh_path
        assert a.category == b.category
    # magic check
    with open(path, "rb") as f:
        assert f.read(8) == b"PICOEMB1"


def test_embedding_store_trailing_garbage(tmp_path):
    store = EmbeddingStore(
        [EmbeddingRecord("a", np.ones(4, dtype=np.float32), "m", "c")], 4)
    path = tmp_path / "store.bin"
    save_embedding_store(store, str(path))
    with open(path, "ab") as f:
        f.write(b"\x00")
    with pytest.raises(ParseError) as err:
        load_embedding_store(str(path))
    assert err.value.where is not None


def test_embedding_store_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + bytes(8))
    with pytest.raises(ParseError):
        load_embedding_store(str(path))
