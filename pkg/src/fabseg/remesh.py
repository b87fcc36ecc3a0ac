"""Resolution normalization: subdivide, decimate, relax.

The pipeline is midpoint (1 -> 4) subdivision until the face count
reaches the target, quadric-error edge-collapse decimation down to the
target, then three rounds of tangential Laplacian smoothing with
projection back onto the input surface. Everything is deterministic;
the seed in RemeshParams is accepted for interface stability but no
step below draws random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import RemeshError
from .mesh import TriangleMesh

_MIN_FACE_AREA = 1e-10  # collapse guard, mm^2; one order above the validation bound
_BOUNDARY_WEIGHT = 1e3
_CREASE_WEIGHT = 1e3
_CREASE_COS = 0.95  # dihedral sharper than ~18 degrees counts as a feature edge


@dataclass(frozen=True)
class RemeshParams:
    target_resolution: int
    tolerance_fraction: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if int(self.target_resolution) != self.target_resolution or self.target_resolution < 4:
            raise ValueError("target_resolution must be an integer >= 4")
        if not (0.0 < self.tolerance_fraction < 0.5):
            raise ValueError("tolerance_fraction must be in (0, 0.5)")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def remesh(mesh: TriangleMesh, params: RemeshParams) -> TriangleMesh:
    out, _ = remesh_with_stats(mesh, params)
    return out


def remesh_with_stats(mesh: TriangleMesh, params: RemeshParams):
    """Remesh and report what happened.

    Returns (mesh, stats) where stats has subdivision_rounds,
    decimation_passes, and achieved_faces. Raises RemeshError carrying
    the achieved face count when the target cannot be met within
    params.tolerance_fraction.
    """
    if mesh.n_faces < 1:
        raise RemeshError("input has no faces", achieved=0)
    target = int(params.target_resolution)
    vertices = mesh.vertices.copy()
    faces = mesh.faces.copy()

    rounds = 0
    if mesh.n_faces < target:
        rounds = max(0, math.ceil(math.log(target / mesh.n_faces) / math.log(4.0)))
        for _ in range(rounds):
            vertices, faces = _subdivide_midpoint(vertices, faces)

    passes = 0
    if faces.shape[0] > target:
        vertices, faces, passes = _decimate(vertices, faces, target)
        vertices, faces = _compact(vertices, faces)

    achieved = faces.shape[0]
    tol = params.tolerance_fraction * target
    if abs(achieved - target) > tol:
        raise RemeshError(
            f"could not reach {target} faces within {params.tolerance_fraction:.0%}",
            achieved=achieved,
        )

    vertices = _smooth(vertices, faces, mesh, rounds=3)
    out = TriangleMesh(vertices, faces, name=mesh.name)
    stats = {
        "subdivision_rounds": rounds,
        "decimation_passes": passes,
        "achieved_faces": achieved,
        "input_faces": mesh.n_faces,
    }
    return out, stats


def _compact(vertices, faces):
    """Drop vertices no face references, re-indexing faces."""
    used = np.unique(faces.ravel())
    remap = np.full(vertices.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    return vertices[used], remap[faces]


def _subdivide_midpoint(vertices, faces):
    """One 1 -> 4 round; every edge gains its midpoint."""
    n_v = vertices.shape[0]
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, inverse = np.unique(e, axis=0, return_inverse=True)
    mids = 0.5 * (vertices[uniq[:, 0]] + vertices[uniq[:, 1]])
    m = inverse.reshape(3, -1).T + n_v  # per-face midpoint ids: ab, bc, ca
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    mab, mbc, mca = m[:, 0], m[:, 1], m[:, 2]
    new_faces = np.concatenate([
        np.stack([a, mab, mca], axis=1),
        np.stack([mab, b, mbc], axis=1),
        np.stack([mca, mbc, c], axis=1),
        np.stack([mab, mbc, mca], axis=1),
    ])
    return np.concatenate([vertices, mids]), new_faces.astype(np.int64)


def _edge_list(faces):
    """Unique undirected edges with incident-face counts."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq, counts


def _vertex_csr(pairs, n_v):
    """Sorted neighbor lists in CSR form from an undirected edge list."""
    both = np.concatenate([pairs, pairs[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    np.add.at(indptr, both[:, 0] + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, both[:, 1].copy()


def _face_csr(faces, n_v):
    flat = faces.ravel()
    fid = np.repeat(np.arange(faces.shape[0]), 3)
    order = np.argsort(flat, kind="stable")
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    np.add.at(indptr, flat + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, fid[order]


def _face_quadrics(vertices, faces):
    p0, p1, p2 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    cr = np.cross(p1 - p0, p2 - p0)
    area2 = np.linalg.norm(cr, axis=1)
    w = 0.5 * area2
    safe = np.where(area2 > 0, area2, 1.0)
    n = cr / safe[:, None]
    d = -np.einsum("ij,ij->i", n, p0)
    return n, d, w


def _vertex_quadrics(vertices, faces, boundary_edges):
    """Per-vertex quadric as (A: 3x3, b: 3, c: scalar), area-weighted.

    Boundary edges contribute a heavily weighted plane perpendicular to
    their face so the open boundary resists drifting inward. Sharp
    interior edges get the same treatment with one plane per incident
    face, which keeps creases from being chorded away.
    """
    n_v = vertices.shape[0]
    A = np.zeros((n_v, 3, 3))
    b = np.zeros((n_v, 3))
    c = np.zeros(n_v)
    n, d, w = _face_quadrics(vertices, faces)
    nnT = n[:, :, None] * n[:, None, :] * w[:, None, None]
    nd = n * (d * w)[:, None]
    dd = d * d * w
    for k in range(3):
        v = faces[:, k]
        np.add.at(A, v, nnT)
        np.add.at(b, v, nd)
        np.add.at(c, v, dd)

    def add_constraint_planes(pairs, face_ids, weight):
        fa, fb = pairs[:, 0], pairs[:, 1]
        ev = vertices[fb] - vertices[fa]
        cn = np.cross(ev, n[face_ids])
        ln = np.linalg.norm(cn, axis=1)
        cn = cn / np.where(ln > 0, ln, 1.0)[:, None]
        wgt = weight * np.einsum("ij,ij->i", ev, ev)
        cd = -np.einsum("ij,ij->i", cn, vertices[fa])
        pn = cn[:, :, None] * cn[:, None, :] * wgt[:, None, None]
        pd = cn * (cd * wgt)[:, None]
        pc = cd * cd * wgt
        for col in (fa, fb):
            np.add.at(A, col, pn)
            np.add.at(b, col, pd)
            np.add.at(c, col, pc)

    if boundary_edges.shape[0]:
        add_constraint_planes(
            boundary_edges, _boundary_edge_faces(faces, boundary_edges), _BOUNDARY_WEIGHT
        )
    sharp, f1, f2 = _sharp_edges(vertices, faces)
    if sharp.shape[0]:
        add_constraint_planes(sharp, f1, _CREASE_WEIGHT)
        add_constraint_planes(sharp, f2, _CREASE_WEIGHT)
    return A, b, c


def _sharp_edges(vertices, faces):
    """Manifold interior edges whose dihedral angle exceeds the crease bound.

    Returns (edges, f1, f2): the edge endpoint pairs and their two
    incident faces.
    """
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    fid = np.tile(np.arange(faces.shape[0]), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, fid = e[order], fid[order]
    same = (e[1:] == e[:-1]).all(axis=1)
    f1, f2 = fid[:-1][same], fid[1:][same]
    pair_e = e[:-1][same]

    p0, p1, p2 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    fn = np.cross(p1 - p0, p2 - p0)
    ln = np.linalg.norm(fn, axis=1)
    fn = fn / np.where(ln > 0, ln, 1.0)[:, None]
    dots = np.einsum("ij,ij->i", fn[f1], fn[f2])
    sharp = dots < _CREASE_COS
    return pair_e[sharp], f1[sharp], f2[sharp]


def _boundary_edge_faces(faces, boundary_edges):
    """For each boundary edge, the id of its single incident face."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    fid = np.tile(np.arange(faces.shape[0]), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e_sorted, fid_sorted = e[order], fid[order]
    idx = np.searchsorted(
        e_sorted[:, 0] * (faces.max() + 2) + e_sorted[:, 1],
        boundary_edges[:, 0] * (faces.max() + 2) + boundary_edges[:, 1],
    )
    return fid_sorted[idx]


def _quadric_error(A, b, c, p):
    return np.einsum("...i,...ij,...j->...", p, A, p) + 2 * np.einsum("...i,...i->...", b, p) + c


def _decimate(vertices, faces, target):
    """Batched greedy quadric decimation down to `target` faces.

    Each pass ranks all edges by collapse cost, then greedily accepts
    collapses whose 1-rings are untouched this pass, so applying them
    simultaneously is safe. Interior collapses remove 2 faces, boundary
    collapses 1.
    """
    n_v = vertices.shape[0]
    edges, counts = _edge_list(faces)
    boundary = edges[counts == 1]
    A, b, c = _vertex_quadrics(vertices, faces, boundary)
    remaining = faces.shape[0]
    passes = 0
    scale = float(np.abs(vertices).max()) or 1.0

    while remaining > target:
        edges, counts = _edge_list(faces)
        boundary_mask_e = counts == 1
        nonmanifold_mask_e = counts > 2
        is_boundary_v = np.zeros(n_v, dtype=bool)
        is_boundary_v[edges[boundary_mask_e].ravel()] = True
        near_nonmanifold = np.zeros(n_v, dtype=bool)
        near_nonmanifold[edges[nonmanifold_mask_e].ravel()] = True

        vi, vj = edges[:, 0], edges[:, 1]
        Ae = A[vi] + A[vj]
        be = b[vi] + b[vj]
        ce = c[vi] + c[vj]

        # candidate placements: regularized optimum, midpoint, endpoints.
        # The optimum is solved as a displacement from the midpoint so
        # directions the quadric leaves unconstrained (flat regions)
        # stay at the midpoint instead of drifting toward the origin.
        mid = 0.5 * (vertices[vi] + vertices[vj])
        tr = np.einsum("eii->e", Ae)
        eps = (1e-6 * tr + 1e-12 * scale**2)[:, None, None]
        reg = Ae + eps * np.eye(3)
        rhs = -(np.einsum("eij,ej->ei", Ae, mid) + be)
        try:
            q = np.linalg.solve(reg, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            q = np.zeros_like(mid)
        p_opt = mid + np.where(np.isfinite(q), q, 0.0)
        cand = np.stack([p_opt, mid, vertices[vi], vertices[vj]], axis=1)
        errs = _quadric_error(Ae[:, None], be[:, None], ce[:, None], cand)

        # boundary handling: never solve freely when the edge touches the
        # boundary; an interior edge with one boundary endpoint collapses
        # onto that endpoint, with two boundary endpoints it is frozen
        bi, bj = is_boundary_v[vi], is_boundary_v[vj]
        edge_on_boundary = boundary_mask_e
        errs[:, 0] = np.where(bi | bj, np.inf, errs[:, 0])
        errs[:, 1] = np.where(bi | bj, np.inf, errs[:, 1])
        errs[:, 2] = np.where(bi & ~edge_on_boundary & bj, np.inf,
                              np.where(bj & ~bi & ~edge_on_boundary, np.inf, errs[:, 2]))
        errs[:, 3] = np.where(bi & ~edge_on_boundary & bj, np.inf,
                              np.where(bi & ~bj & ~edge_on_boundary, np.inf, errs[:, 3]))
        if edge_on_boundary.any():
            m_err = _quadric_error(Ae, be, ce, mid)
            errs[:, 1] = np.where(edge_on_boundary, m_err, errs[:, 1])

        choice = np.argmin(errs, axis=1)
        cost = errs[np.arange(errs.shape[0]), choice]
        placement = cand[np.arange(cand.shape[0]), choice]
        cost = np.where(nonmanifold_mask_e, np.inf, cost)
        cost = np.where(near_nonmanifold[vi] | near_nonmanifold[vj], np.inf, cost)

        vn_indptr, vn_data = _vertex_csr(edges, n_v)
        vf_indptr, vf_data = _face_csr(faces, n_v)

        order = np.argsort(cost, kind="stable")
        touched = np.zeros(n_v, dtype=bool)
        accepted = []
        removed = 0
        for e_id in order:
            if not np.isfinite(cost[e_id]):
                break
            i, j = int(vi[e_id]), int(vj[e_id])
            if touched[i] or touched[j]:
                continue
            gap = remaining - removed - target
            n_inc = int(counts[e_id])
            if n_inc > gap:
                continue
            nbr_i = vn_data[vn_indptr[i]:vn_indptr[i + 1]]
            nbr_j = vn_data[vn_indptr[j]:vn_indptr[j + 1]]
            shared = np.intersect1d(nbr_i, nbr_j, assume_unique=False)
            if shared.shape[0] != n_inc:
                continue  # link condition: collapse would pinch the surface
            if not _collapse_geometry_ok(
                vertices, faces, vf_indptr, vf_data, i, j, placement[e_id], scale
            ):
                continue
            accepted.append((i, j, placement[e_id]))
            touched[i] = touched[j] = True
            touched[nbr_i] = True
            touched[nbr_j] = True
            removed += n_inc
            if remaining - removed <= target:
                break

        if not accepted:
            break

        vmap = np.arange(n_v)
        for i, j, p in accepted:
            vertices[i] = p
            vmap[j] = i
            A[i] += A[j]
            b[i] += b[j]
            c[i] += c[j]
        faces = vmap[faces]
        keep = (
            (faces[:, 0] != faces[:, 1])
            & (faces[:, 1] != faces[:, 2])
            & (faces[:, 0] != faces[:, 2])
        )
        faces = faces[keep]
        remaining = faces.shape[0]
        passes += 1

    return vertices, faces, passes


def _collapse_geometry_ok(vertices, faces, vf_indptr, vf_data, i, j, p, scale):
    """Reject collapses that flip or squash the surviving 1-ring faces."""
    fids = np.unique(np.concatenate([
        vf_data[vf_indptr[i]:vf_indptr[i + 1]],
        vf_data[vf_indptr[j]:vf_indptr[j + 1]],
    ]))
    tris = faces[fids]
    has_i = (tris == i).any(axis=1)
    has_j = (tris == j).any(axis=1)
    survivors = tris[~(has_i & has_j)]
    if survivors.shape[0] == 0:
        return True
    merged = np.where(survivors == j, i, survivors)
    merged = np.sort(merged, axis=1)
    if np.unique(merged, axis=0).shape[0] != merged.shape[0]:
        return False  # two survivors would coincide: a zero-volume fin
    old = vertices[survivors]
    new = old.copy()
    new[survivors == i] = p
    new[survivors == j] = p
    old_n = np.cross(old[:, 1] - old[:, 0], old[:, 2] - old[:, 0])
    new_n = np.cross(new[:, 1] - new[:, 0], new[:, 2] - new[:, 0])
    new_area = 0.5 * np.linalg.norm(new_n, axis=1)
    if (new_area < _MIN_FACE_AREA * max(1.0, scale**2)).any():
        return False
    dots = np.einsum("ij,ij->i", old_n, new_n)
    return bool((dots > 0).all())


def _smooth(vertices, faces, original: TriangleMesh, rounds=3, step=0.5):
    """Tangential Laplacian relaxation projected back to `original`.

    Boundary and crease vertices are frozen: relaxation would slide them
    off the feature line and the projection step cannot bring them back
    onto it. Everything else moves within its tangent plane toward the
    neighbor centroid, then snaps to the closest point of the original
    surface.
    """
    n_v = vertices.shape[0]
    edges, counts = _edge_list(faces)
    boundary_v = np.zeros(n_v, dtype=bool)
    boundary_v[edges[counts == 1].ravel()] = True
    boundary_v |= _crease_vertices(vertices, faces, n_v)
    indptr, nbrs = _vertex_csr(edges, n_v)
    degree = np.maximum(1, np.diff(indptr))
    proj = _SurfaceProjector(original)

    v = vertices.copy()
    for _ in range(rounds):
        centroid = np.zeros_like(v)
        np.add.at(centroid, np.repeat(np.arange(n_v), np.diff(indptr)), v[nbrs])
        centroid /= degree[:, None]
        normals = _vertex_normals(v, faces, n_v)
        d = centroid - v
        d_tan = d - np.einsum("ij,ij->i", d, normals)[:, None] * normals
        moved = v + step * d_tan
        moved = proj.project(moved)
        v = np.where(boundary_v[:, None], v, moved)
    return v


def _crease_vertices(vertices, faces, n_v):
    """Vertices on an edge whose dihedral angle exceeds the crease bound."""
    sharp, _, _ = _sharp_edges(vertices, faces)
    out = np.zeros(n_v, dtype=bool)
    out[sharp.ravel()] = True
    return out


def _vertex_normals(vertices, faces, n_v):
    p0, p1, p2 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    fn = np.cross(p1 - p0, p2 - p0)
    out = np.zeros((n_v, 3))
    for k in range(3):
        np.add.at(out, faces[:, k], fn)
    ln = np.linalg.norm(out, axis=1)
    return out / np.where(ln > 0, ln, 1.0)[:, None]


class _SurfaceProjector:
    """Closest-point queries against a fixed triangle surface.

    Candidates come from a centroid KD-tree; exact point-triangle
    distances pick the winner among them. k candidates bound the error;
    for smoothing-scale displacements this is effectively exact.
    """

    def __init__(self, mesh: TriangleMesh, k=12):
        self._tris = mesh.vertices[mesh.faces]
        self._tree = cKDTree(mesh.face_centroids())
        self._k = min(k, mesh.n_faces)

    def project(self, points):
        _, cand = self._tree.query(points, k=self._k)
        if self._k == 1:
            cand = cand[:, None]
        n, k = cand.shape
        tris = self._tris[cand.ravel()]
        pts = np.repeat(points, k, axis=0)
        closest = closest_point_on_triangles(pts, tris)
        d2 = np.einsum("ij,ij->i", pts - closest, pts - closest).reshape(n, k)
        best = np.argmin(d2, axis=1)
        return closest.reshape(n, k, 3)[np.arange(n), best]

    def distances(self, points):
        projected = self.project(points)
        return np.linalg.norm(points - projected, axis=1)


def surface_distances(points, mesh: TriangleMesh, k=12):
    """Distance from each point to the surface of `mesh`."""
    return _SurfaceProjector(mesh, k=k).distances(np.asarray(points, dtype=np.float64))


def closest_point_on_triangles(p, tri):
    """Closest point on triangle tri[i] to p[i], vectorized.

    Standard barycentric region walk; p is (N,3), tri is (N,3,3).
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
    v_ab = np.nan_to_num(v_ab)
    w_ac = np.nan_to_num(w_ac)
    w_bc = np.nan_to_num(w_bc)
    v_in = np.nan_to_num(v_in)
    w_in = np.nan_to_num(w_in)

    out = a + v_in[:, None] * ab + w_in[:, None] * ac  # interior default
    reg_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    out = np.where(reg_bc[:, None], b + w_bc[:, None] * (c - b), out)
    reg_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(reg_ac[:, None], a + w_ac[:, None] * ac, out)
    reg_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(reg_ab[:, None], a + v_ab[:, None] * ab, out)
    reg_c = (d6 >= 0) & (d5 <= d6)
    out = np.where(reg_c[:, None], c, out)
    reg_b = (d3 >= 0) & (d4 <= d3)
    out = np.where(reg_b[:, None], b, out)
    reg_a = (d1 <= 0) & (d2 <= 0)
    out = np.where(reg_a[:, None], a, out)
    return out
