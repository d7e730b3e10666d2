"""HTTP service backing the browser annotation client.

Sessions are loaded lazily from the assets directory (one subdirectory per
session id, with meta.json naming the body mesh, object mesh, and contact
file). Each session's state mutates under its own lock; different sessions
never share state. Static frontend files are served from `<assets>/web` when
that directory exists.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .contact import extract_patches, parameterize_patch, synthesize_axis, \
    transfer_patch, unpack_axis
from .documents import AnnotationDocument, PatchAnnotation, load_json
from .errors import ContactFitError
from .geometry import barycentric_coordinates
from .mesh import SurfacePoint
from .meshio import load_mesh_file

UNDO_LIMIT = 64


@dataclass
class SessionState:
    session_id: str
    meta: dict
    body: object
    object_mesh: object
    contacts: set
    patches: list                  # ContactPatch list
    axes: dict                     # patch_id -> ContactAxis
    params: dict                   # patch_id -> ParamPatch
    committed: dict = field(default_factory=dict)   # patch_id -> payload
    pending: dict = field(default_factory=dict)     # at most one entry
    undo_stack: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    def __init__(self, assets_dir: str):
        self.assets_dir = assets_dir
        self._sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()

    def get(self, session_id: str) -> SessionState:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = self._load(session_id)
        with self._lock:
            return self._sessions.setdefault(session_id, session)

    def _load(self, session_id: str) -> SessionState:
        base = os.path.join(self.assets_dir, session_id)
        meta_path = os.path.join(base, "meta.json")
        if not os.path.exists(meta_path):
            raise KeyError(session_id)
        meta = load_json(meta_path)
        body = load_mesh_file(os.path.join(base, meta["body_mesh"]))
        obj = load_mesh_file(os.path.join(base, meta["object_mesh"]))
        contacts = {int(v) for v in load_json(os.path.join(base, meta["contacts"]))["vertices"]}
        patches = extract_patches(body, contacts)
        axes = {}
        params = {}
        for patch in patches:
            axis = synthesize_axis(body, patch)
            axes[patch.patch_id] = axis
            params[patch.patch_id] = parameterize_patch(body, patch, axis)
        return SessionState(session_id, meta, body, obj, contacts,
                            patches, axes, params)


def _mesh_payload(mesh) -> dict:
    return {"vertices": mesh.vertices.tolist(), "faces": mesh.faces.tolist()}


def _session_payload(s: SessionState) -> dict:
    patches = []
    for patch in s.patches:
        axis = s.axes[patch.patch_id]
        patches.append({
            "patch_id": patch.patch_id,
            "vertices": list(patch.vertices),
            "axis": {
                "waypoints": [p.tolist() for p in axis.path.points],
                "length": axis.length,
                "start_tangent": axis.start_tangent.tolist(),
            },
        })
    return {
        "session_id": s.session_id,
        "image": s.meta.get("image", ""),
        "object_id": s.meta.get("object_id", ""),
        "body": _mesh_payload(s.body),
        "object": _mesh_payload(s.object_mesh),
        "patches": patches,
        "committed": sorted(s.committed),
        "pending": next(iter(s.pending), None),
    }


def _validate_click(mesh, click: dict, tol: float = 1e-6) -> SurfacePoint:
    sp = SurfacePoint.from_dict(click)
    if sp.face < 0 or sp.face >= mesh.n_faces:
        raise ValueError(f"face {sp.face} out of range")
    pos = mesh.position(sp)
    recomputed = barycentric_coordinates(mesh.vertices[mesh.faces[sp.face]], pos)
    if float(np.abs(recomputed - sp.bary).max()) > tol:
        raise ValueError("click barycentric residual exceeds tolerance")
    return sp


def _do_transfer(s: SessionState, payload: dict) -> dict:
    patch_id = int(payload["patch_id"])
    if patch_id not in s.axes:
        raise KeyError(f"unknown patch {patch_id}")
    click1 = _validate_click(s.object_mesh, payload["click1"])
    click2 = np.asarray(payload["click2"], dtype=np.float64)
    axis = unpack_axis(s.object_mesh, s.axes[patch_id], click1, click2)
    points, cs = transfer_patch(s.object_mesh, s.params[patch_id], axis)
    entry = {
        "patch_id": patch_id,
        "click1": click1.to_dict(),
        "click2": click2.tolist(),
        "pairs": [(v, sp.to_dict()) for v, sp in cs.pairs],
        "dropped": list(cs.dropped),
    }
    with s.lock:
        s.pending.clear()
        s.pending[patch_id] = entry
    return {
        "patch_id": patch_id,
        "points": [
            {"face": sp.face, "bary": sp.bary.tolist(),
             "position": s.object_mesh.position(sp).tolist()}
            for sp in points
        ],
        "pairs": entry["pairs"],
        "dropped": entry["dropped"],
    }


def _do_commit(s: SessionState, payload: dict) -> dict:
    patch_id = int(payload["patch_id"])
    with s.lock:
        if patch_id not in s.pending:
            raise KeyError(f"no pending transfer for patch {patch_id}")
        entry = s.pending.pop(patch_id)
        previous = s.committed.get(patch_id)
        s.committed[patch_id] = entry
        s.undo_stack.append((patch_id, previous))
        if len(s.undo_stack) > UNDO_LIMIT:
            s.undo_stack.pop(0)
    return {"committed": sorted(s.committed)}


def _do_undo(s: SessionState) -> dict:
    with s.lock:
        if not s.undo_stack:
            raise KeyError("nothing to undo")
        patch_id, previous = s.undo_stack.pop()
        if previous is None:
            s.committed.pop(patch_id, None)
        else:
            s.committed[patch_id] = previous
    return {"committed": sorted(s.committed)}


def _do_export(s: SessionState) -> dict:
    patches = []
    with s.lock:
        committed = dict(s.committed)
    for patch_id in sorted(committed):
        entry = committed[patch_id]
        axis = s.axes[patch_id]
        param = s.params[patch_id]
        patches.append(PatchAnnotation(
            patch_id=patch_id,
            source_axis_waypoints=[p.tolist() for p in axis.path.points],
            axis_length=axis.length,
            records=param.records,
            object_id=s.meta.get("object_id", ""),
            click1=entry["click1"],
            click2=entry["click2"],
            pairs=entry["pairs"],
            dropped=entry["dropped"],
        ))
    doc = AnnotationDocument.create(
        image_id=s.meta.get("image", s.session_id),
        image_path=s.meta.get("image", ""),
        body_contacts=s.contacts,
        patches=patches,
        annotator="service",
        timestamp=str(int(time.time())),
    )
    return doc.raw


class _Handler(BaseHTTPRequestHandler):
    registry: SessionRegistry = None
    web_dir: str = None

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def _reply(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _reply_file(self, path: str) -> None:
        content_types = {".html": "text/html", ".js": "text/javascript",
                         ".css": "text/css", ".map": "application/json"}
        ext = os.path.splitext(path)[1]
        with open(path, "rb") as f:
            body = f.read()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(ext, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        try:
            if parts == ["healthz"]:
                self._reply(200, {"ok": True})
            elif len(parts) == 2 and parts[0] == "session":
                session = self.registry.get(parts[1])
                self._reply(200, _session_payload(session))
            elif len(parts) == 3 and parts[0] == "session" and parts[2] == "export":
                session = self.registry.get(parts[1])
                self._reply(200, _do_export(session))
            elif self.web_dir:
                rel = "index.html" if not parts else os.path.join(*parts)
                path = os.path.normpath(os.path.join(self.web_dir, rel))
                if path.startswith(os.path.abspath(self.web_dir)) and os.path.isfile(path):
                    self._reply_file(path)
                else:
                    self._reply(404, {"error": "not found"})
            else:
                self._reply(404, {"error": "not found"})
        except KeyError as e:
            self._reply(404, {"error": str(e)})
        except (ValueError, ContactFitError) as e:
            self._reply(400, {"error": str(e)})

    def do_POST(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        length = int(self.headers.get("Content-Length", "0"))
        try:
            payload = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._reply(400, {"error": "bad JSON body"})
            return
        try:
            if len(parts) == 3 and parts[0] == "session":
                session = self.registry.get(parts[1])
                action = parts[2]
                if action == "transfer":
                    self._reply(200, _do_transfer(session, payload))
                elif action == "commit":
                    self._reply(200, _do_commit(session, payload))
                elif action == "undo":
                    self._reply(200, _do_undo(session))
                else:
                    self._reply(404, {"error": f"unknown action {action!r}"})
            else:
                self._reply(404, {"error": "not found"})
        except KeyError as e:
            self._reply(404, {"error": str(e)})
        except (ValueError, ContactFitError) as e:
            self._reply(400, {"error": str(e)})


def make_server(port: int, assets_dir: str) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {
        "registry": SessionRegistry(assets_dir),
        "web_dir": os.path.abspath(os.path.join(assets_dir, "web"))
        if os.path.isdir(os.path.join(assets_dir, "web")) else None,
    })
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def run_server(port: int, assets_dir: str) -> None:
    server = make_server(port, assets_dir)
    print(f"annotation service on http://127.0.0.1:{port} (assets: {assets_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
