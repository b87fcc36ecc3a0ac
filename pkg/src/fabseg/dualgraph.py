"""Weighted face-dual graph and its normalized Laplacian.

Every pair of adjacent faces becomes a graph edge weighted by a blend
of geodesic distance (centroid to shared-edge midpoint to centroid)
and angular distance (dihedral deviation, discounted across convex
edges). Affinity is exp(-Dist) after per-term average normalization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, identity

from .errors import GraphError
from .mesh import MeshTopology, TriangleMesh, build_topology, face_component_labels

DEFAULT_DELTA = 0.5
DEFAULT_ETA_CONVEX = 0.1


@dataclass
class DualGraph:
    """Face adjacency graph with distance and affinity annotations.

    node_count is the number of graph nodes; face_ids maps each node
    back to its face index in the source mesh (identity for connected
    meshes). edges holds node-id pairs (i < j) with parallel geodesic
    and angular distance arrays.
    """

    node_count: int
    edges: np.ndarray
    geodesic: np.ndarray
    angular: np.ndarray
    affinity: csr_matrix
    degree: np.ndarray
    face_ids: np.ndarray = field(repr=False)


def build_dual_graph(mesh: TriangleMesh, topology: MeshTopology | None = None,
                     delta: float = DEFAULT_DELTA,
                     eta_convex: float = DEFAULT_ETA_CONVEX) -> DualGraph:
    """Construct the weighted dual graph of a mesh.

    For adjacent faces i, j sharing an edge with midpoint m:
      Geod_ij = |c_i - m| + |m - c_j|
      Ang_ij  = eta * (1 - cos theta), eta = eta_convex on convex edges else 1
      Dist_ij = delta * Geod/avg(Geod) + (1 - delta) * Ang/avg(Ang)
      W_ij    = exp(-Dist_ij)

    A zero angular average (perfectly flat mesh) simply drops the
    angular term; a zero geodesic average means every centroid and
    edge midpoint coincide and is an error. On a disconnected mesh the
    largest face component is used and a warning is emitted.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must be in [0, 1]")
    if not 0.0 < eta_convex <= 1.0:
        raise ValueError("eta_convex must be in (0, 1]")
    topo = topology or build_topology(mesh)
    pairs = topo.adjacency_pairs()

    face_ids = np.arange(mesh.n_faces, dtype=np.int64)
    n_comp, comp = face_component_labels(mesh)
    if n_comp > 1:
        largest = int(np.bincount(comp).argmax())
        warnings.warn(
            "mesh is disconnected; dual graph built on the largest face component",
            stacklevel=2,
        )
        face_ids = np.where(comp == largest)[0]
        if pairs.shape[0]:
            keep = np.isin(pairs[:, 0], face_ids)
            pairs = pairs[keep]
    n = face_ids.shape[0]
    node_of = np.full(mesh.n_faces, -1, dtype=np.int64)
    node_of[face_ids] = np.arange(n)

    if pairs.shape[0]:
        # collapse parallel edges (faces sharing two edges, non-manifold
        # fans): the first record per (i, j) pair wins
        key = pairs[:, 0] * mesh.n_faces + pairs[:, 1]
        _, first = np.unique(key, return_index=True)
        pairs = pairs[np.sort(first)]

    centroids = mesh.face_centroids()
    normals = mesh.face_normals()

    if pairs.shape[0] == 0:
        edges = np.zeros((0, 2), dtype=np.int64)
        geod = np.zeros(0)
        ang = np.zeros(0)
        weights = np.zeros(0)
    else:
        fi, fj = pairs[:, 0], pairs[:, 1]
        mid = 0.5 * (mesh.vertices[pairs[:, 2]] + mesh.vertices[pairs[:, 3]])
        geod = (np.linalg.norm(centroids[fi] - mid, axis=1)
                + np.linalg.norm(mid - centroids[fj], axis=1))
        cos_t = np.clip(np.einsum("ij,ij->i", normals[fi], normals[fj]), -1.0, 1.0)
        raw_ang = 1.0 - cos_t
        # convex test, symmetric in i and j: the faces bend away from
        # each other when each centroid sits on or below the other's plane
        gap = centroids[fj] - centroids[fi]
        convex = np.einsum("ij,ij->i", normals[fi] - normals[fj], gap) <= 0.0
        ang = np.where(convex, eta_convex, 1.0) * raw_ang

        avg_geod = float(geod.mean())
        if avg_geod <= 0.0:
            raise GraphError("zero average geodesic distance: all face centroids coincide")
        dist = delta * geod / avg_geod
        avg_ang = float(ang.mean())
        if avg_ang > 0.0:
            dist = dist + (1.0 - delta) * ang / avg_ang
        weights = np.exp(-dist)
        edges = node_of[pairs[:, :2]]

    if edges.shape[0]:
        w2 = np.concatenate([weights, weights])
        ii = np.concatenate([edges[:, 0], edges[:, 1]])
        jj = np.concatenate([edges[:, 1], edges[:, 0]])
        affinity = coo_matrix((w2, (ii, jj)), shape=(n, n)).tocsr()
    else:
        affinity = coo_matrix((n, n)).tocsr()
    degree = np.asarray(affinity.sum(axis=1)).ravel()
    return DualGraph(
        node_count=n,
        edges=edges,
        geodesic=geod,
        angular=ang,
        affinity=affinity,
        degree=degree,
        face_ids=face_ids,
    )


def normalized_laplacian(graph: DualGraph) -> csr_matrix:
    """L = I - D^(-1/2) W D^(-1/2), exactly symmetric by construction.

    Raises GraphError naming the offending face if any node has zero
    degree (a face with no neighbors).
    """
    deg = graph.degree
    if (deg <= 0.0).any():
        node = int(np.argmin(deg))
        face = int(graph.face_ids[node])
        raise GraphError(f"face {face} is isolated in the dual graph")
    n = graph.node_count
    dinv = 1.0 / np.sqrt(deg)
    a = graph.affinity.tocoo()
    # dinv products are commutative, so mirrored entries scale to
    # bit-identical values and L stays exactly symmetric
    s = a.data * (dinv[a.row] * dinv[a.col])
    scaled = coo_matrix((s, (a.row, a.col)), shape=(n, n)).tocsr()
    return (identity(n, format="csr") - scaled).tocsr()
