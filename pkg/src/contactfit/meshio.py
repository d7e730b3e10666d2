"""Mesh and mask file formats.

Meshes: text OBJ (v/f records, 1-based indices, polygons fan-triangulated)
and binary little-endian PLY with double-precision vertices so write/read
round trips are bit-exact. Masks: binary PGM (P5, gray >= 128 is foreground)
and PBM (P4, set bits are foreground). Parsers reject trailing garbage and
report where parsing failed.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ParseError
from .mesh import SurfaceMesh, build_mesh
from .raster import SilhouetteMask


def load_mesh_file(path: str) -> SurfaceMesh:
    with open(path, "rb") as f:
        head = f.read(4)
    if head[:3] == b"ply":
        return load_ply(path)
    return load_obj(path)


def load_obj(path: str) -> SurfaceMesh:
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            tag = fields[0]
            if tag == "v":
                if len(fields) < 4:
                    raise ParseError("vertex record needs 3 coordinates", lineno)
                try:
                    vertices.append([float(x) for x in fields[1:4]])
                except ValueError:
                    raise ParseError("bad vertex coordinate", lineno)
            elif tag == "f":
                if len(fields) < 4:
                    raise ParseError("face record needs at least 3 indices", lineno)
                idx = []
                for tok in fields[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ParseError(f"bad face index {tok!r}", lineno)
                    if i == 0:
                        raise ParseError("OBJ face indices are 1-based", lineno)
                    if i < 0:
                        i = len(vertices) + 1 + i
                    if i < 1 or i > len(vertices):
                        raise ParseError(f"face index {i} out of range", lineno)
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # all other record types (vn, vt, o, g, s, usemtl, ...) are ignored
    if not faces:
        raise ParseError("no faces found", None)
    return build_mesh(np.array(vertices), np.array(faces))


def save_obj(mesh: SurfaceMesh, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for v in mesh.vertices:
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for face in mesh.faces:
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")


def load_ply(path: str) -> SurfaceMesh:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"ply"):
        raise ParseError("not a PLY file", 0)
    end = data.find(b"end_header\n")
    if end < 0:
        raise ParseError("missing PLY end_header", 0)
    header = data[:end].decode("ascii", errors="replace").splitlines()
    offset = end + len(b"end_header\n")

    n_vertices = n_faces = None
    vertex_types = []
    current = None
    fmt_seen = False
    for line in header[1:]:
        fields = line.split()
        if not fields:
            continue
        if fields[0] == "format":
            if fields[1] != "binary_little_endian":
                raise ParseError(f"unsupported PLY format {fields[1]!r}", 0)
            fmt_seen = True
        elif fields[0] == "element":
            current = fields[1]
            if current == "vertex":
                n_vertices = int(fields[2])
            elif current == "face":
                n_faces = int(fields[2])
        elif fields[0] == "property" and current == "vertex":
            vertex_types.append((fields[1], fields[-1]))
    if not fmt_seen or n_vertices is None or n_faces is None:
        raise ParseError("incomplete PLY header", 0)

    type_sizes = {"float": 4, "float32": 4, "double": 8, "float64": 8,
                  "uchar": 1, "uint8": 1, "int": 4, "int32": 4, "uint": 4, "uint32": 4}
    type_codes = {"float": "f", "float32": "f", "double": "d", "float64": "d"}
    stride = 0
    coords = {}
    for t, name in vertex_types:
        if t not in type_sizes:
            raise ParseError(f"unsupported vertex property type {t!r}", offset)
        if name in ("x", "y", "z"):
            coords[name] = (stride, type_codes.get(t))
            if coords[name][1] is None:
                raise ParseError(f"coordinate {name} must be float typed", offset)
        stride += type_sizes[t]
    if set(coords) != {"x", "y", "z"}:
        raise ParseError("PLY vertex element must carry x, y, z", offset)

    vertices = np.empty((n_vertices, 3))
    for i in range(n_vertices):
        base = offset + i * stride
        if base + stride > len(data):
            raise ParseError("truncated vertex data", base)
        for axis, name in enumerate(("x", "y", "z")):
            off, code = coords[name]
            vertices[i, axis] = struct.unpack_from("<" + code, data, base + off)[0]
    offset += n_vertices * stride

    faces = []
    for i in range(n_faces):
        if offset >= len(data):
            raise ParseError("truncated face data", offset)
        count = data[offset]
        offset += 1
        if offset + 4 * count > len(data):
            raise ParseError("truncated face indices", offset)
        idx = struct.unpack_from(f"<{count}i", data, offset)
        offset += 4 * count
        for k in range(1, count - 1):
            faces.append([idx[0], idx[k], idx[k + 1]])
    if offset != len(data):
        raise ParseError("trailing bytes after face data", offset)
    return build_mesh(vertices, np.array(faces))


def save_ply(mesh: SurfaceMesh, path: str) -> None:
    """Binary little-endian PLY with double-precision coordinates."""
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for v in mesh.vertices:
            f.write(struct.pack("<3d", *v))
        for face in mesh.faces:
            f.write(struct.pack("<B3i", 3, *[int(i) for i in face]))


def _read_token(data: bytes, pos: int):
    # skip whitespace and comments between PNM header tokens
    while pos < len(data):
        c = data[pos:pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", start)
    return data[start:pos], pos


def load_mask_file(path: str) -> SilhouetteMask:
    with open(path, "rb") as f:
        data = f.read()
    magic, pos = _read_token(data, 0)
    if magic == b"P5":
        w_tok, pos = _read_token(data, pos)
        h_tok, pos = _read_token(data, pos)
        max_tok, pos = _read_token(data, pos)
        try:
            w, h, maxval = int(w_tok), int(h_tok), int(max_tok)
        except ValueError:
            raise ParseError("bad PGM header field", pos)
        if maxval <= 0 or maxval > 255:
            raise ParseError(f"unsupported PGM maxval {maxval}", pos)
        pos += 1  # single whitespace after maxval
        if len(data) - pos != w * h:
            raise ParseError(f"expected {w * h} pixel bytes, found {len(data) - pos}", pos)
        pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
        bits = (pixels >= 128).reshape(h, w)
        return SilhouetteMask(w, h, bits)
    if magic == b"P4":
        w_tok, pos = _read_token(data, pos)
        h_tok, pos = _read_token(data, pos)
        try:
            w, h = int(w_tok), int(h_tok)
        except ValueError:
            raise ParseError("bad PBM header field", pos)
        pos += 1
        row_bytes = (w + 7) // 8
        if len(data) - pos != row_bytes * h:
            raise ParseError(
                f"expected {row_bytes * h} packed bytes, found {len(data) - pos}", pos)
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos)
        unpacked = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
        return SilhouetteMask(w, h, unpacked.astype(bool))
    raise ParseError(f"unsupported mask magic {magic!r}", 0)


def save_mask_file(mask: SilhouetteMask, path: str) -> None:
    """Write a mask as binary PGM (255 foreground, 0 background)."""
    with open(path, "wb") as f:
        f.write(f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii"))
        f.write((mask.bits.astype(np.uint8) * 255).tobytes())
