"""OBJ and STL readers plus the OBJ writer.

OBJ support covers v/f records (polygonal faces are fan-triangulated);
everything else is skipped. STL is auto-detected as ASCII or binary and
duplicate vertices are welded on a 1e-6 mm grid so downstream topology
is connected.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import MeshParseError
from .mesh import TriangleMesh

WELD_TOLERANCE = 1e-6  # mm


def parse_obj(data: bytes, name="mesh") -> TriangleMesh:
    """Parse an ASCII OBJ byte stream.

    Vertex order is preserved. Faces with more than three corners are
    fan-triangulated around the first corner. Normals, texture
    coordinates, and other records are ignored. Extended vertex records
    with six floats ("v x y z r g b") populate vertex colors.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MeshParseError(f"not valid UTF-8/ASCII OBJ: {exc}") from None

    vertices: list[tuple[float, float, float]] = []
    colors: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            vals = parts[1:]
            if len(vals) not in (3, 4, 6):
                raise MeshParseError(
                    f"vertex record needs 3 coordinates, got {len(vals)}", line=lineno
                )
            try:
                nums = [float(x) for x in vals]
            except ValueError:
                raise MeshParseError("bad float in vertex record", line=lineno) from None
            vertices.append((nums[0], nums[1], nums[2]))
            if len(nums) == 6:
                colors.append((nums[3], nums[4], nums[5]))
            else:
                colors.append(None)
        elif tag == "f":
            refs = parts[1:]
            if len(refs) < 3:
                raise MeshParseError("face needs at least 3 vertices", line=lineno)
            idx = []
            for ref in refs:
                head = ref.split("/")[0]
                try:
                    k = int(head)
                except ValueError:
                    raise MeshParseError(f"bad face index {ref!r}", line=lineno) from None
                if k > 0:
                    k -= 1
                elif k < 0:
                    k += len(vertices)  # relative reference
                else:
                    raise MeshParseError("face index 0 is invalid", line=lineno)
                if k < 0 or k >= len(vertices):
                    raise MeshParseError(
                        f"face index {ref} out of range ({len(vertices)} vertices)",
                        line=lineno,
                    )
                idx.append(k)
            for i in range(1, len(idx) - 1):
                faces.append((idx[0], idx[i], idx[i + 1]))
        # other records (vn, vt, o, g, s, usemtl, ...) are ignored

    if not vertices:
        raise MeshParseError("OBJ contains no vertices")
    if not faces:
        raise MeshParseError("OBJ contains no faces")

    vertex_colors = None
    if any(c is not None for c in colors):
        vertex_colors = np.array(
            [c if c is not None else (0.5, 0.5, 0.5) for c in colors], dtype=np.float64
        )
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64),
                        vertex_colors=vertex_colors, name=name)


def write_obj(mesh: TriangleMesh) -> bytes:
    """Serialize to ASCII OBJ with 9-significant-digit coordinates.

    Vertex colors, when present, are written as extended
    "v x y z r g b" records.
    """
    out = [f"# {mesh.name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces"]
    v = mesh.vertices
    c = mesh.vertex_colors
    if c is None:
        for i in range(v.shape[0]):
            out.append(f"v {v[i, 0]:.9g} {v[i, 1]:.9g} {v[i, 2]:.9g}")
    else:
        for i in range(v.shape[0]):
            out.append(
                f"v {v[i, 0]:.9g} {v[i, 1]:.9g} {v[i, 2]:.9g}"
                f" {c[i, 0]:.9g} {c[i, 1]:.9g} {c[i, 2]:.9g}"
            )
    f = mesh.faces
    for i in range(f.shape[0]):
        out.append(f"f {f[i, 0] + 1} {f[i, 1] + 1} {f[i, 2] + 1}")
    out.append("")
    return "\n".join(out).encode("utf-8")


def parse_stl(data: bytes, name="mesh") -> TriangleMesh:
    """Parse ASCII or binary STL, welding duplicate vertices.

    Binary is assumed unless the stream starts with "solid" and the rest
    parses as a valid ASCII body. Duplicate vertices are merged on a
    1e-6 mm grid so shared cube corners collapse to single vertices.
    """
    if len(data) == 0:
        raise MeshParseError("empty STL stream")
    if data[:5] in (b"solid", b"SOLID") or data[:5].lower() == b"solid":
        try:
            tris = _parse_stl_ascii(data)
        except MeshParseError:
            # "solid" header on a binary file happens in the wild
            tris = _parse_stl_binary(data)
    else:
        tris = _parse_stl_binary(data)
    if tris.shape[0] == 0:
        raise MeshParseError("STL contains zero triangles")
    vertices, faces = _weld(tris)
    return TriangleMesh(vertices, faces, name=name)


def _parse_stl_ascii(data: bytes) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise MeshParseError("STL starts with 'solid' but body is not ASCII") from None
    tris = []
    current: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) != 4:
                raise MeshParseError("vertex record needs 3 floats", line=lineno)
            try:
                current.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise MeshParseError("bad float in vertex record", line=lineno) from None
        elif parts[0] == "endloop":
            if len(current) != 3:
                raise MeshParseError(
                    f"facet loop has {len(current)} vertices, expected 3", line=lineno
                )
            tris.append(current)
            current = []
        elif parts[0] not in (
            "solid", "endsolid", "facet", "endfacet", "outer",
        ):
            raise MeshParseError(f"unexpected token {parts[0]!r}", line=lineno)
    if current:
        raise MeshParseError("unterminated facet loop at end of file")
    return np.array(tris, dtype=np.float64).reshape(-1, 3, 3)


def _parse_stl_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshParseError(f"binary STL too short ({len(data)} bytes)")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MeshParseError(
            f"binary STL truncated: header declares {count} triangles "
            f"({expected} bytes), stream has {len(data)}"
        )
    if count == 0:
        raise MeshParseError("STL contains zero triangles")
    rec = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    rec = rec.reshape(count, 50)
    # 12 bytes normal + 3*12 bytes vertices + 2 bytes attribute
    floats = rec[:, :48].copy().view("<f4").reshape(count, 4, 3)
    return floats[:, 1:, :].astype(np.float64)


def _weld(tris: np.ndarray):
    """Merge coincident corners (1e-6 mm grid) into shared vertices."""
    flat = tris.reshape(-1, 3)
    keys = np.round(flat / WELD_TOLERANCE).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    vertices = flat[first]
    faces = inverse.reshape(-1, 3)
    return vertices, faces


def write_stl_binary(mesh: TriangleMesh, header=b"") -> bytes:
    """Serialize to binary STL (little-endian, 50-byte records)."""
    m = mesh.n_faces
    head = (header or b"fabseg binary stl").ljust(80, b"\0")[:80]
    buf = bytearray(head)
    buf += struct.pack("<I", m)
    p = mesh.vertices[mesh.faces]
    n = mesh.face_normals()
    for i in range(m):
        buf += struct.pack("<3f", *n[i])
        for k in range(3):
            buf += struct.pack("<3f", *p[i, k])
        buf += b"\0\0"
    return bytes(buf)


def parse_mesh_bytes(data: bytes, name="mesh", filename=None) -> TriangleMesh:
    """Best-effort format sniffing for uploaded mesh payloads.

    A filename extension wins when given; otherwise binary STL layout,
    then ASCII STL, then OBJ are tried in that order.
    """
    if filename:
        low = filename.lower()
        if low.endswith(".obj"):
            return parse_obj(data, name=name)
        if low.endswith(".stl"):
            return parse_stl(data, name=name)
    # exact binary STL length match is unambiguous
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if count > 0 and len(data) == 84 + 50 * count and not data[:5].lower() == b"solid":
            return parse_stl(data, name=name)
    head = data[:5].lower()
    if head == b"solid":
        try:
            return parse_stl(data, name=name)
        except MeshParseError:
            pass
    try:
        return parse_obj(data, name=name)
    except MeshParseError as obj_err:
        try:
            return parse_stl(data, name=name)
        except MeshParseError:
            raise obj_err from None


def load_mesh(path, name=None) -> TriangleMesh:
    """Read a mesh file from disk, format chosen by extension."""
    import os

    with open(path, "rb") as fh:
        data = fh.read()
    base = name or os.path.splitext(os.path.basename(str(path)))[0]
    return parse_mesh_bytes(data, name=base, filename=str(path))


def save_mesh(mesh: TriangleMesh, path):
    """Write a mesh to disk; .stl gets binary STL, everything else OBJ."""
    data = (
        write_stl_binary(mesh)
        if str(path).lower().endswith(".stl")
        else write_obj(mesh)
    )
    with open(path, "wb") as fh:
        fh.write(data)
