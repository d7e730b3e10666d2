"""Annotation service: session payloads, transfers, commit/undo, export, CLI parity."""

import json
import threading
import urllib.request

import numpy as np
import pytest

from contactfit.assets import write_annotation_box_assets
from contactfit.service import make_server


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    assets = tmp_path_factory.mktemp("assets")
    write_annotation_box_assets(str(assets), session_id="box")
    srv = make_server(0, str(assets))
    port = srv.server_address[1]
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{port}", str(assets)
    srv.shutdown()


def get(base, path):
    with urllib.request.urlopen(base + path, timeout=30) as resp:
        return resp.status, json.loads(resp.read())


def post(base, path, payload):
    req = urllib.request.Request(
        base + path, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=60) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def _click_for(session, patch_id=0):
    """A valid two-click placement near the object center."""
    obj_faces = np.array(session["object"]["faces"])
    obj_verts = np.array(session["object"]["vertices"])
    # pick a front-facing triangle: use face 0's centroid
    face = 0
    bary = [1 / 3, 1 / 3, 1 / 3]
    tri = obj_verts[obj_faces[face]]
    pos = tri.mean(axis=0)
    click2 = (pos + np.array([0.05, 0.02, 0.0])).tolist()
    return {"patch_id": patch_id, "click1": {"face": face, "bary": bary},
            "click2": click2}


def test_session_payload(server):
    base, _ = server
    status, session = get(base, "/session/box")
    assert status == 200
    assert session["body"]["vertices"] and session["object"]["faces"]
    assert session["patches"], "session must expose contact patches"
    for p in session["patches"]:
        assert p["axis"]["length"] > 0
        assert len(p["axis"]["waypoints"]) >= 2
    assert session["committed"] == []


def test_unknown_session_404(server):
    base, _ = server
    status, _ = post(base, "/session/nope/undo", {})
    assert status == 404


def test_transfer_commit_undo_export(server):
    base, _ = server
    _, session = get(base, "/session/box")
    patch_id = session["patches"][0]["patch_id"]

    click = _click_for(session, patch_id)
    status, preview = post(base, "/session/box/transfer", click)
    assert status == 200
    assert preview["pairs"], "transfer must return correspondences"
    for pt in preview["points"]:
        assert len(pt["bary"]) == 3

    # repeating the clicks overwrites the pending transfer
    click2 = dict(click)
    click2["click2"] = (np.array(click["click2"]) + [0.0, 0.03, 0.0]).tolist()
    status, preview2 = post(base, "/session/box/transfer", click2)
    assert status == 200

    status, out = post(base, "/session/box/commit", {"patch_id": patch_id})
    assert status == 200
    assert patch_id in out["committed"]

    status, doc = get(base, "/session/box/export")
    assert status == 200
    assert doc["schema"] == "contact-annotation/1"
    assert len(doc["patches"]) == 1
    assert doc["patches"][0]["pairs"] == preview2["pairs"]

    status, out = post(base, "/session/box/undo", {})
    assert status == 200
    assert patch_id not in out["committed"]

    status, _ = post(base, "/session/box/undo", {})
    assert status == 404  # nothing left to undo


def test_bad_click_rejected(server):
    base, _ = server
    _, session = get(base, "/session/box")
    patch_id = session["patches"][0]["patch_id"]
    bad = {"patch_id": patch_id,
           "click1": {"face": 0, "bary": [0.7, 0.3, 0.0]},
           "click2": [9.0, 9.0, 9.0]}
    # bary valid on its own but we corrupt it against the mesh by pointing at
    # a different face's plane: build a residual violation via face index
    bad["click1"] = {"face": 10 ** 6, "bary": [1.0, 0.0, 0.0]}
    status, out = post(base, "/session/box/transfer", bad)
    assert status == 400


def test_commit_without_pending_404(server):
    base, _ = server
    status, _ = post(base, "/session/box/commit", {"patch_id": 10_000})
    assert status == 404


def test_export_matches_headless_cli(server, tmp_path):
    """A scripted two-click flow must reproduce the transfer CLI bit-for-bit."""
    from contactfit.cli import main as cli_main
    from contactfit.documents import load_annotation

    base, assets = server
    _, session = get(base, "/session/box")
    patch_ids = [p["patch_id"] for p in session["patches"]]
    clicks = []
    previews = {}
    for pid in patch_ids:
        click = _click_for(session, pid)
        status, preview = post(base, "/session/box/transfer", click)
        assert status == 200
        post(base, "/session/box/commit", {"patch_id": pid})
        clicks.append({"patch_id": pid, "click1": click["click1"],
                       "click2": click["click2"]})
        previews[pid] = preview
    _, doc = get(base, "/session/box/export")

    clicks_path = tmp_path / "clicks.json"
    clicks_path.write_text(json.dumps({"clicks": clicks, "object_id": "box"}))
    out_path = tmp_path / "cli_annotation.json"
    rc = cli_main([
        "transfer",
        "--body", f"{assets}/box/body.ply",
        "--contacts", f"{assets}/box/contacts.json",
        "--object", f"{assets}/box/object.ply",
        "--clicks", str(clicks_path),
        "--out", str(out_path),
    ])
    assert rc == 0
    cli_doc = load_annotation(str(out_path))
    service_patches = {p["patch_id"]: p for p in doc["patches"]}
    cli_patches = {p["patch_id"]: p for p in cli_doc.raw["patches"]}
    assert set(service_patches) == set(cli_patches)
    for pid in service_patches:
        assert service_patches[pid]["pairs"] == cli_patches[pid]["pairs"]
        assert service_patches[pid]["records"] == cli_patches[pid]["records"]


def test_sessions_are_isolated(server):
    base, assets = server
    write_annotation_box_assets(assets, session_id="box2")
    _, s2 = get(base, "/session/box2")
    assert s2["committed"] == []  # box's commits never leak into box2
