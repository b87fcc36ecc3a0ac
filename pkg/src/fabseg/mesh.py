"""Triangle mesh container, validation, and topology queries."""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import MeshValidationError

DEGENERATE_AREA = 1e-12  # mm^2


class TriangleMesh:
    """Indexed triangle mesh in millimeters.

    Arrays are copied on construction and frozen; instances are safe to
    share across threads. ``vertex_colors`` is optional per-vertex RGB
    in [0, 1].
    """

    __slots__ = ("vertices", "faces", "vertex_colors", "name")

    def __init__(self, vertices, faces, vertex_colors=None, name="mesh", validate=True):
        v = np.ascontiguousarray(vertices, dtype=np.float64)
        f = np.ascontiguousarray(faces, dtype=np.int32)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshValidationError(f"vertices must be (n, 3), got {v.shape}")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshValidationError(f"faces must be (m, 3), got {f.shape}")
        c = None
        if vertex_colors is not None:
            c = np.ascontiguousarray(vertex_colors, dtype=np.float64)
            if c.shape != v.shape:
                raise MeshValidationError(
                    f"vertex_colors shape {c.shape} does not match vertices {v.shape}"
                )
        if validate:
            _validate(v, f)
        for arr in (v, f, c):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "vertex_colors", c)
        object.__setattr__(self, "name", str(name))

    def __setattr__(self, key, value):
        raise AttributeError("TriangleMesh is immutable")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def face_centroids(self):
        return self.vertices[self.faces].mean(axis=1)

    def face_areas(self):
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(
            np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1
        )

    def face_normals(self):
        """Unit face normals; zero vector for (near-)degenerate faces."""
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norm = np.linalg.norm(n, axis=1)
        safe = np.where(norm > 0, norm, 1.0)
        n = n / safe[:, None]
        n[norm == 0] = 0.0
        return n

    def vertex_normals(self):
        """Area-weighted unit vertex normals (zero for isolated vertices)."""
        p = self.vertices[self.faces]
        fn = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])  # area-weighted
        vn = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(vn, self.faces[:, k], fn)
        norm = np.linalg.norm(vn, axis=1)
        safe = np.where(norm > 0, norm, 1.0)
        vn = vn / safe[:, None]
        vn[norm == 0] = 0.0
        return vn

    def bounding_box(self):
        if self.n_vertices == 0:
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self):
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def with_vertices(self, vertices, vertex_colors=None, name=None):
        """New mesh with replaced positions (and optionally colors)."""
        colors = self.vertex_colors if vertex_colors is None else vertex_colors
        return TriangleMesh(
            vertices, self.faces, vertex_colors=colors,
            name=self.name if name is None else name,
        )

    def transformed(self, rotation=None, translation=None):
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return self.with_vertices(v)

    def __repr__(self):
        return f"TriangleMesh({self.name!r}, {self.n_vertices} verts, {self.n_faces} faces)"


def _validate(vertices, faces):
    nv = vertices.shape[0]
    if nv == 0:
        raise MeshValidationError("mesh has no vertices")
    if not np.isfinite(vertices).all():
        raise MeshValidationError("non-finite vertex coordinates")
    if faces.shape[0]:
        if faces.min() < 0 or faces.max() >= nv:
            bad = int(np.argmax((faces < 0) | (faces >= nv)).item())
            raise MeshValidationError(
                f"face index out of range (face {bad // 3}, vertex count {nv})"
            )
        a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
        repeated = (a == b) | (b == c) | (a == c)
        if repeated.any():
            raise MeshValidationError(
                f"face {int(np.argmax(repeated))} has repeated vertices"
            )
        p = vertices[faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1
        )
        if (areas <= DEGENERATE_AREA).any():
            raise MeshValidationError(
                f"face {int(np.argmax(areas <= DEGENERATE_AREA))} is degenerate "
                f"(area <= {DEGENERATE_AREA} mm^2)"
            )


class MeshTopology:
    """Face adjacency, edge incidence, and boundary information."""

    __slots__ = ("face_adjacency", "edge_map", "boundary_edges", "non_manifold_edges")

    def __init__(self, face_adjacency, edge_map, boundary_edges, non_manifold_edges):
        self.face_adjacency = face_adjacency
        self.edge_map = edge_map
        self.boundary_edges = boundary_edges
        self.non_manifold_edges = non_manifold_edges

    @property
    def is_manifold(self):
        return len(self.non_manifold_edges) == 0

    @property
    def is_watertight(self):
        return len(self.boundary_edges) == 0 and self.is_manifold

    def adjacency_pairs(self):
        """Array of (face_i, face_j, v_lo, v_hi) rows, one per shared edge, i < j."""
        rows = []
        for (a, b), fl in self.edge_map.items():
            if len(fl) == 2:
                i, j = fl
                rows.append((min(i, j), max(i, j), a, b))
            elif len(fl) > 2:
                # non-manifold edge: connect every incident face pair
                for x in range(len(fl)):
                    for y in range(x + 1, len(fl)):
                        i, j = fl[x], fl[y]
                        rows.append((min(i, j), max(i, j), a, b))
        if not rows:
            return np.zeros((0, 4), dtype=np.int64)
        return np.array(sorted(rows), dtype=np.int64)


def build_topology(mesh: TriangleMesh) -> MeshTopology:
    """Edge map, symmetric face adjacency, and boundary edges of a mesh.

    Non-manifold edges (more than two incident faces) are collected and
    flagged rather than treated as fatal.
    """
    faces = mesh.faces
    m = faces.shape[0]
    edge_map: dict[tuple[int, int], list[int]] = {}
    for fi in range(m):
        a, b, c = int(faces[fi, 0]), int(faces[fi, 1]), int(faces[fi, 2])
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edge_map.setdefault(key, []).append(fi)

    adjacency: list[list[int]] = [[] for _ in range(m)]
    boundary = []
    non_manifold = []
    for key, fl in edge_map.items():
        if len(fl) == 1:
            boundary.append(key)
        elif len(fl) == 2:
            i, j = fl
            adjacency[i].append(j)
            adjacency[j].append(i)
        else:
            non_manifold.append(key)
            for x in range(len(fl)):
                for y in range(x + 1, len(fl)):
                    adjacency[fl[x]].append(fl[y])
                    adjacency[fl[y]].append(fl[x])
    for lst in adjacency:
        lst.sort()
    return MeshTopology(adjacency, edge_map, sorted(boundary), sorted(non_manifold))


def face_adjacency_matrix(mesh: TriangleMesh, topology: MeshTopology | None = None):
    """Unweighted sparse face adjacency (CSR, symmetric)."""
    topo = topology or build_topology(mesh)
    pairs = topo.adjacency_pairs()
    m = mesh.n_faces
    if pairs.shape[0] == 0:
        return coo_matrix((m, m)).tocsr()
    i, j = pairs[:, 0], pairs[:, 1]
    data = np.ones(len(i))
    mat = coo_matrix((data, (i, j)), shape=(m, m))
    return (mat + mat.T).tocsr()


def connected_components(mesh: TriangleMesh) -> list[TriangleMesh]:
    """Split a mesh into face-connectivity components.

    Components are ordered by their lowest original face index; the union
    of the returned face sets equals the input face set.
    """
    if mesh.n_faces == 0:
        return []
    adj = face_adjacency_matrix(mesh)
    n_comp, labels = _cc(adj, directed=False)
    if n_comp == 1:
        return [mesh]
    order = []
    seen = set()
    for lab in labels:
        if lab not in seen:
            seen.add(lab)
            order.append(lab)
    out = []
    for idx, lab in enumerate(order):
        face_ids = np.nonzero(labels == lab)[0]
        out.append(submesh(mesh, face_ids, name=f"{mesh.name}.part{idx}"))
    return out


def submesh(mesh: TriangleMesh, face_ids, name=None) -> TriangleMesh:
    """Mesh restricted to the given faces, vertices re-indexed compactly."""
    face_ids = np.asarray(face_ids, dtype=np.int64)
    faces = mesh.faces[face_ids]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    colors = mesh.vertex_colors[used] if mesh.vertex_colors is not None else None
    return TriangleMesh(
        mesh.vertices[used],
        remap[faces],
        vertex_colors=colors,
        name=name if name is not None else f"{mesh.name}.sub",
    )


def face_component_labels(mesh: TriangleMesh):
    """(component count, per-face component label) on face connectivity."""
    if mesh.n_faces == 0:
        return 0, np.zeros(0, dtype=np.int64)
    adj = face_adjacency_matrix(mesh)
    n_comp, labels = _cc(adj, directed=False)
    return int(n_comp), labels
