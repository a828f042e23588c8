"""Mesh and buffer file formats.

Supported:
  - ASCII OBJ: ``v``/``f`` records only; ``vt``/``vn`` ignored on read,
    never emitted.  Polygonal faces are fan-triangulated.
  - PLY (ascii / binary_little_endian): vertex x/y/z (+ optional
    nx/ny/nz, optional integer ``fdi``), face vertex-index list
    (+ optional integer ``label``).
  - face-id buffer: 16-byte header (magic ``FIDB``, uint32 width/height,
    4 reserved) followed by little-endian int32 pixels, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mesh import FaceLabeling, MeshError, TriMesh, VertexLabeling


class MeshIOError(ValueError):
    """Raised for unparseable mesh files."""


# ---------------------------------------------------------------------------
# OBJ


def read_obj(path) -> TriMesh:
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshIOError(f"{path}:{ln}: short vertex record")
                try:
                    verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError as exc:
                    raise MeshIOError(f"{path}:{ln}: bad vertex: {exc}") from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshIOError(f"{path}:{ln}: face needs >= 3 vertices")
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshIOError(f"{path}:{ln}: bad face index {tok!r}") from exc
                    if i > 0:
                        idx.append(i - 1)
                    elif i < 0:
                        idx.append(len(verts) + i)
                    else:
                        raise MeshIOError(f"{path}:{ln}: zero face index")
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
            # all other records ignored
    if not tris:
        raise MeshIOError(f"{path}: no faces")
    v = np.array(verts, dtype=np.float64)
    f = np.array(tris, dtype=np.int64)
    if f.min() < 0 or f.max() >= len(verts):
        raise MeshIOError(f"{path}: face index out of range")
    try:
        return TriMesh.from_arrays(v, f)
    except MeshError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc


def write_obj(path, mesh: TriMesh) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


# ---------------------------------------------------------------------------
# PLY

_PLY_SCALARS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh) -> tuple[str, list]:
    """Returns (format, elements) where each element is
    (name, count, [(prop_name, kind)]); kind is a numpy dtype string or
    ("list", count_dtype, item_dtype)."""
    magic = fh.readline().strip()
    if magic != b"ply":
        raise MeshIOError("not a PLY file")
    fmt = None
    elements = []
    while True:
        line = fh.readline()
        if not line:
            raise MeshIOError("unterminated PLY header")
        parts = line.decode("ascii", errors="replace").split()
        if not parts:
            continue
        if parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshIOError("property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", _PLY_SCALARS[parts[2]], _PLY_SCALARS[parts[3]])))
            else:
                elements[-1][2].append((parts[2], _PLY_SCALARS[parts[1]]))
        elif parts[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshIOError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def read_ply(path):
    """Read a PLY file.

    Returns (TriMesh, face_labels | None, vertex_fdi | None); labels come
    from the optional per-face ``label`` and per-vertex ``fdi`` integer
    properties.
    """
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        data = {}
        for name, count, props in elements:
            if fmt == "ascii":
                rows = []
                got = 0
                while got < count:
                    line = fh.readline()
                    if not line:
                        raise MeshIOError(f"{path}: truncated element {name}")
                    toks = line.split()
                    if not toks:
                        continue
                    rows.append(toks)
                    got += 1
                data[name] = _decode_ascii_rows(path, rows, props)
            else:
                data[name] = _decode_binary(path, fh, count, props)

    if "vertex" not in data or "face" not in data:
        raise MeshIOError(f"{path}: missing vertex or face element")
    vprops, fprops = data["vertex"], data["face"]
    for key in ("x", "y", "z"):
        if key not in vprops:
            raise MeshIOError(f"{path}: vertex missing {key}")
    v = np.column_stack([vprops["x"], vprops["y"], vprops["z"]]).astype(np.float64)
    normals = None
    if all(k in vprops for k in ("nx", "ny", "nz")):
        normals = np.column_stack([vprops["nx"], vprops["ny"], vprops["nz"]]).astype(np.float64)

    list_keys = [k for k in ("vertex_indices", "vertex_index") if k in fprops]
    if not list_keys:
        raise MeshIOError(f"{path}: face element has no vertex index list")
    polys = fprops[list_keys[0]]
    tris = []
    tri_src = []  # originating polygon row, for label fan-out
    for row, poly in enumerate(polys):
        if len(poly) < 3:
            raise MeshIOError(f"{path}: face with {len(poly)} vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
            tri_src.append(row)
    f = np.array(tris, dtype=np.int64)
    if f.size == 0:
        raise MeshIOError(f"{path}: no faces")
    if f.min() < 0 or f.max() >= v.shape[0]:
        raise MeshIOError(f"{path}: face index out of range")

    face_labels = None
    if "label" in fprops:
        lab = np.asarray(fprops["label"], dtype=np.int64)[np.array(tri_src)]
        face_labels = lab
    vertex_fdi = None
    if "fdi" in vprops:
        vertex_fdi = np.asarray(vprops["fdi"], dtype=np.int64)

    repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    keep = (~repeated) & (areas > 1e-12)
    dropped = int(np.count_nonzero(~keep))
    mesh = TriMesh(v, f[keep], vertex_normals=normals, n_degenerate_dropped=dropped)
    if face_labels is not None:
        face_labels = FaceLabeling(face_labels[keep])
    if vertex_fdi is not None:
        vertex_fdi = VertexLabeling(vertex_fdi)
    return mesh, face_labels, vertex_fdi


def _decode_ascii_rows(path, rows, props):
    out = {name: [] for name, _ in props}
    for toks in rows:
        pos = 0
        for name, kind in props:
            if isinstance(kind, tuple):
                n = int(toks[pos]); pos += 1
                vals = [int(t) for t in toks[pos:pos + n]]
                if len(vals) != n:
                    raise MeshIOError(f"{path}: short list property {name}")
                pos += n
                out[name].append(vals)
            else:
                conv = float if kind[0] == "f" else int
                out[name].append(conv(toks[pos])); pos += 1
    for name, kind in props:
        if not isinstance(kind, tuple):
            out[name] = np.array(out[name])
    return out


def _decode_binary(path, fh, count, props):
    fixed = all(not isinstance(kind, tuple) for _, kind in props)
    if fixed:
        dt = np.dtype([(name, "<" + kind) for name, kind in props])
        buf = fh.read(dt.itemsize * count)
        if len(buf) != dt.itemsize * count:
            raise MeshIOError(f"{path}: truncated binary element")
        arr = np.frombuffer(buf, dtype=dt)
        return {name: arr[name] for name, _ in props}
    out = {name: [] for name, _ in props}
    for _ in range(count):
        for name, kind in props:
            if isinstance(kind, tuple):
                _, cnt_t, item_t = kind
                n = int(np.frombuffer(fh.read(np.dtype(cnt_t).itemsize), dtype="<" + cnt_t)[0])
                items = np.frombuffer(fh.read(np.dtype(item_t).itemsize * n), dtype="<" + item_t)
                if items.size != n:
                    raise MeshIOError(f"{path}: truncated list property")
                out[name].append(items.astype(np.int64).tolist())
            else:
                width = np.dtype(kind).itemsize
                raw = fh.read(width)
                if len(raw) != width:
                    raise MeshIOError(f"{path}: truncated binary element")
                out[name].append(np.frombuffer(raw, dtype="<" + kind)[0])
    for name, kind in props:
        if not isinstance(kind, tuple):
            out[name] = np.array(out[name])
    return out


def write_ply(
    path,
    mesh: TriMesh,
    face_labels: FaceLabeling | None = None,
    vertex_fdi: VertexLabeling | None = None,
    binary: bool = True,
) -> None:
    if face_labels is not None:
        face_labels.check_against(mesh)
    if vertex_fdi is not None:
        vertex_fdi.check_against(mesh)
    have_n = mesh.vertex_normals is not None

    # doubles keep save->load bit-identical on vertex data
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {mesh.n_vertices}")
    header += ["property double x", "property double y", "property double z"]
    if have_n:
        header += ["property double nx", "property double ny", "property double nz"]
    if vertex_fdi is not None:
        header.append("property int fdi")
    header.append(f"element face {mesh.n_faces}")
    header.append("property list uchar int vertex_indices")
    if face_labels is not None:
        header.append("property int label")
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            vert_fields = [("v", "<3f8")]
            if have_n:
                vert_fields.append(("n", "<3f8"))
            if vertex_fdi is not None:
                vert_fields.append(("fdi", "<i4"))
            varr = np.empty(mesh.n_vertices, dtype=np.dtype(vert_fields))
            varr["v"] = mesh.vertices
            if have_n:
                varr["n"] = mesh.vertex_normals
            if vertex_fdi is not None:
                varr["fdi"] = vertex_fdi.labels.astype("<i4")
            fh.write(varr.tobytes())

            face_fields = [("n", "u1"), ("idx", "<3i4")]
            if face_labels is not None:
                face_fields.append(("label", "<i4"))
            farr = np.empty(mesh.n_faces, dtype=np.dtype(face_fields))
            farr["n"] = 3
            farr["idx"] = mesh.faces.astype("<i4")
            if face_labels is not None:
                farr["label"] = face_labels.labels.astype("<i4")
            fh.write(farr.tobytes())
        else:
            for i in range(mesh.n_vertices):
                row = [f"{c!r}" for c in mesh.vertices[i]]
                if have_n:
                    row += [f"{c!r}" for c in mesh.vertex_normals[i]]
                if vertex_fdi is not None:
                    row.append(str(int(vertex_fdi.labels[i])))
                fh.write((" ".join(row) + "\n").encode("ascii"))
            for i in range(mesh.n_faces):
                row = ["3"] + [str(int(c)) for c in mesh.faces[i]]
                if face_labels is not None:
                    row.append(str(int(face_labels.labels[i])))
                fh.write((" ".join(row) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# unified mesh loading


def load_mesh(path, fmt: str | None = None) -> TriMesh:
    """Load an OBJ or PLY mesh; format inferred from the extension when
    not given explicitly."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "obj":
        return read_obj(path)
    if fmt == "ply":
        return read_ply(path)[0]
    raise MeshIOError(f"unknown mesh format {fmt!r}")


def save_mesh(path, mesh: TriMesh, fmt: str | None = None, **kw) -> None:
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "obj":
        write_obj(path, mesh)
    elif fmt == "ply":
        write_ply(path, mesh, **kw)
    else:
        raise MeshIOError(f"unknown mesh format {fmt!r}")


# ---------------------------------------------------------------------------
# face-id pixel buffer

_FACEID_MAGIC = b"FIDB"


def write_face_id(path, face_id: np.ndarray) -> None:
    arr = np.ascontiguousarray(face_id, dtype="<i4")
    if arr.ndim != 2:
        raise ValueError("face_id buffer must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_FACEID_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(b"\x00" * 4)
        fh.write(arr.tobytes())


def read_face_id(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _FACEID_MAGIC:
            raise MeshIOError(f"{path}: not a face-id buffer")
        w, h = struct.unpack("<II", head[4:12])
        buf = fh.read(4 * w * h)
        if len(buf) != 4 * w * h:
            raise MeshIOError(f"{path}: truncated face-id buffer")
        return np.frombuffer(buf, dtype="<i4").reshape(h, w).astype(np.int32)
