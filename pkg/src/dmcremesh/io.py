"""OBJ / PLY / STL readers and OBJ / PLY writers."""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from .errors import EmptyMesh, MeshIOError, ParseError
from .mesh import WELD_TOL, Provenance, TriangleMesh, drop_degenerate, weld

FORMATS = ("obj", "ply", "stl")


def _detect_format(path: Path, fmt: str) -> str:
    fmt = fmt.lower()
    if fmt != "auto":
        if fmt not in FORMATS:
            raise ValueError(f"unknown mesh format {fmt!r}")
        return fmt
    ext = path.suffix.lower().lstrip(".")
    if ext in FORMATS:
        return ext
    raise ValueError(f"cannot infer mesh format from {path.name!r}")


def load_mesh(path, format: str = "auto", weld_vertices: bool = True,
              weld_tol: float = WELD_TOL) -> TriangleMesh:
    """Read a triangle mesh, drop degenerate faces and weld duplicate vertices.

    ``weld_tol`` is expressed in normalized units (half the longest bounding
    box extent maps to 1), so the same tolerance works for any source scale.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mesh file not found: {path}")
    fmt = _detect_format(path, format)
    data = path.read_bytes()
    if fmt == "obj":
        positions, triangles = _read_obj(data)
    elif fmt == "ply":
        positions, triangles = _read_ply(data)
    else:
        positions, triangles = _read_stl(data)

    if len(triangles) == 0:
        raise EmptyMesh(f"{path}: no triangles")
    if weld_vertices:
        used = positions[np.unique(triangles)]
        half_extent = 0.5 * float((used.max(axis=0) - used.min(axis=0)).max())
        positions, triangles, _ = weld(positions, triangles, weld_tol * max(half_extent, 1e-300))
    scale = float(np.abs(positions).max()) if len(positions) else 1.0
    triangles = drop_degenerate(positions, triangles, area_tol=1e-12 * max(scale, 1.0) ** 2)
    if len(triangles) == 0:
        raise EmptyMesh(f"{path}: zero valid triangles")
    return TriangleMesh(positions, triangles, Provenance(str(path), None))


def save_mesh(mesh: TriangleMesh, path, format: str = "auto", binary: bool = True) -> None:
    """Write ``mesh`` as OBJ (ASCII) or PLY (binary little-endian by default)."""
    path = Path(path)
    fmt = _detect_format(path, format)
    if fmt == "stl":
        raise ValueError("STL output is not supported; use OBJ or PLY")
    if mesh.n_triangles == 0:
        raise EmptyMesh("refusing to write a mesh with zero triangles")
    try:
        if fmt == "obj":
            _write_obj(mesh, path)
        else:
            _write_ply(mesh, path, binary)
    except OSError as exc:
        raise MeshIOError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------- OBJ

def _read_obj(data: bytes):
    positions = []
    triangles = []
    text = data.decode("utf-8", errors="replace")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError("vertex record needs 3 coordinates", line=lineno)
            try:
                positions.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise ParseError(f"bad vertex coordinate: {exc}", line=lineno) from None
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError("face record needs at least 3 vertices", line=lineno)
            idx = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    k = int(head)
                except ValueError:
                    raise ParseError(f"bad face index {token!r}", line=lineno) from None
                if k == 0:
                    raise ParseError("OBJ indices are 1-based", line=lineno)
                k = k - 1 if k > 0 else len(positions) + k
                if not 0 <= k < len(positions):
                    raise ParseError(f"face index {token} out of range", line=lineno)
                idx.append(k)
            for j in range(1, len(idx) - 1):  # fan triangulation of polygons
                triangles.append((idx[0], idx[j], idx[j + 1]))
    return (np.array(positions, dtype=np.float64).reshape(-1, 3),
            np.array(triangles, dtype=np.int64).reshape(-1, 3))


def _write_obj(mesh: TriangleMesh, path: Path) -> None:
    lines = ["# dmcremesh"]
    lines.extend(f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.positions)
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------- PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply(data: bytes):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("missing PLY header", offset=0)
    nl = data.find(b"\n", end)
    body = data[nl + 1:]
    header = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []  # (name, count, [props]); prop = (name, dtype) or (name, (count_t, item_t))
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", line=lineno)
            try:
                if parts[1] == "list":
                    elements[-1][2].append((parts[4], (_PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])))
                else:
                    elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
            except (KeyError, IndexError):
                raise ParseError(f"unsupported property {line!r}", line=lineno) from None
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unsupported PLY format {fmt!r}", line=1)
    if fmt == "ascii":
        return _read_ply_ascii(body, elements, len(header) + 1)
    return _read_ply_binary(body, elements, "<" if fmt == "binary_little_endian" else ">")


def _face_property(props):
    for name, t in props:
        if isinstance(t, tuple) and name in ("vertex_indices", "vertex_index"):
            return name
    raise ParseError("face element has no vertex_indices list")


def _read_ply_ascii(body: bytes, elements, first_line: int):
    lines = body.decode("ascii", errors="replace").splitlines()
    cursor = 0
    positions = np.zeros((0, 3))
    triangles = []
    for name, count, props in elements:
        rows = lines[cursor:cursor + count]
        if len(rows) < count:
            raise ParseError(f"element {name!r} truncated", line=first_line + cursor + len(rows))
        if name == "vertex":
            names = [p[0] for p in props]
            try:
                cols = [names.index(c) for c in "xyz"]
                table = np.array([[float(v) for v in r.split()[:len(props)]] for r in rows]).reshape(count, -1)
            except ValueError as exc:
                raise ParseError(f"bad vertex row: {exc}", line=first_line + cursor) from None
            positions = table[:, cols]
        elif name == "face":
            _face_property(props)
            for i, r in enumerate(rows):
                vals = r.split()
                try:
                    n = int(vals[0])
                    idx = [int(v) for v in vals[1:1 + n]]
                except (ValueError, IndexError):
                    raise ParseError("bad face row", line=first_line + cursor + i) from None
                triangles.extend((idx[0], idx[j], idx[j + 1]) for j in range(1, n - 1))
        cursor += count
    tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if tri.size and (tri.min() < 0 or tri.max() >= len(positions)):
        raise ParseError("face index out of range")
    return positions.astype(np.float64), tri


def _read_ply_binary(body: bytes, elements, endian: str):
    offset = 0
    positions = np.zeros((0, 3))
    tri = np.zeros((0, 3), np.int64)
    for name, count, props in elements:
        has_list = any(isinstance(t, tuple) for _, t in props)
        if not has_list:
            dtype = np.dtype([(pname, endian + t) for pname, t in props])
            need = dtype.itemsize * count
            if offset + need > len(body):
                raise ParseError(f"element {name!r} truncated", offset=offset)
            arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
            offset += need
            if name == "vertex":
                positions = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
            continue
        if name != "face":
            raise ParseError(f"list properties only supported on faces, not {name!r}", offset=offset)
        key = _face_property(props)
        # fast path: a single triangle-list property
        if len(props) == 1:
            count_t, item_t = props[0][1]
            dtype = np.dtype([("n", endian + count_t), ("v", endian + item_t, 3)])
            need = dtype.itemsize * count
            if offset + need <= len(body):
                arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
                if np.all(arr["n"] == 3):
                    tri = arr["v"].astype(np.int64)
                    offset += need
                    continue
        rows = []
        for _ in range(count):
            for pname, t in props:
                if isinstance(t, tuple):
                    count_t, item_t = t
                    csize = np.dtype(count_t).itemsize
                    if offset + csize > len(body):
                        raise ParseError("face list truncated", offset=offset)
                    n = int(np.frombuffer(body, endian + count_t, 1, offset)[0])
                    offset += csize
                    isize = np.dtype(item_t).itemsize * n
                    if offset + isize > len(body):
                        raise ParseError("face list truncated", offset=offset)
                    idx = np.frombuffer(body, endian + item_t, n, offset).astype(np.int64)
                    offset += isize
                    if pname == key:
                        rows.extend((idx[0], idx[j], idx[j + 1]) for j in range(1, n - 1))
                else:
                    offset += np.dtype(t).itemsize
        tri = np.array(rows, dtype=np.int64).reshape(-1, 3)
    if tri.size and (tri.min() < 0 or tri.max() >= len(positions)):
        raise ParseError("face index out of range")
    return positions, tri


def _write_ply(mesh: TriangleMesh, path: Path, binary: bool) -> None:
    nv, nf = mesh.n_vertices, mesh.n_triangles
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        f"ply\nformat {fmt} 1.0\ncomment dmcremesh\n"
        f"element vertex {nv}\nproperty float x\nproperty float y\nproperty float z\n"
        f"element face {nf}\nproperty list uchar int vertex_indices\nend_header\n"
    )
    if binary:
        verts = mesh.positions.astype("<f4")
        faces = np.empty(nf, dtype=[("n", "u1"), ("v", "<i4", 3)])
        faces["n"] = 3
        faces["v"] = mesh.triangles
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(verts.tobytes())
            fh.write(faces.tobytes())
    else:
        lines = [header.rstrip("\n")]
        lines.extend(f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.positions)
        lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
        path.write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------- STL

_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_STL_VERTEX = re.compile(rf"vertex\s+({_FLOAT})\s+({_FLOAT})\s+({_FLOAT})")


def _read_stl(data: bytes):
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n:
            dtype = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            rec = np.frombuffer(data, dtype=dtype, count=n, offset=84)
            positions = rec["v"].reshape(-1, 3).astype(np.float64)
            return positions, np.arange(3 * n, dtype=np.int64).reshape(-1, 3)
    text = data.decode("ascii", errors="replace")
    if not text.lstrip().startswith("solid"):
        raise ParseError("neither binary nor ASCII STL", offset=0)
    coords = _STL_VERTEX.findall(text)
    if len(coords) % 3:
        raise ParseError("ASCII STL facet with a vertex count other than 3")
    positions = np.array(coords, dtype=np.float64).reshape(-1, 3)
    return positions, np.arange(len(positions), dtype=np.int64).reshape(-1, 3)


def write_stl(mesh: TriangleMesh, path) -> None:
    """Binary STL writer (used for test fixtures; STL is not an output format of the CLI)."""
    v = mesh.corners().astype("<f4")
    rec = np.zeros(mesh.n_triangles, dtype=[("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    rec["normal"] = mesh.face_normals()
    rec["v"] = v
    with open(path, "wb") as fh:
        fh.write(b"dmcremesh".ljust(80, b" "))
        fh.write(struct.pack("<I", mesh.n_triangles))
        fh.write(rec.tobytes())


__all__ = ["load_mesh", "save_mesh", "write_stl", "FORMATS"]
