"""Spectral segmentation: predict k, embed, cluster.

segment() runs the whole chain: dual graph -> normalized Laplacian ->
partial eigendecomposition -> k prediction -> k-means on the
row-normalized spectral embedding. Faces are processed in a canonical
centroid order so the result is invariant to the order faces happen to
be stored in.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dualgraph import DEFAULT_DELTA, DEFAULT_ETA_CONVEX, build_dual_graph, normalized_laplacian
from .eigen import Spectrum, eigendecompose
from .mesh import TriangleMesh
from .remesh import RemeshParams, remesh

DEFAULT_M = 64
DEFAULT_K_CAP = 25


@dataclass(frozen=True)
class SegmentParams:
    delta: float = DEFAULT_DELTA
    eta_convex: float = DEFAULT_ETA_CONVEX
    m: int = DEFAULT_M
    seed: int = 0
    k_min: int = 1
    k_max: int | None = None  # defaults to min(m - 1, 25)

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")
        if not 0.0 < self.eta_convex <= 1.0:
            raise ValueError("eta_convex must be in (0, 1]")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")
        if self.resolved_k_max() < self.k_min:
            raise ValueError("k_max must be >= k_min")

    def resolved_k_max(self) -> int:
        if self.k_max is not None:
            return self.k_max
        return min(self.m - 1, DEFAULT_K_CAP)


@dataclass
class SegmentationResult:
    k: int
    face_labels: np.ndarray
    segments: list
    predicted_k: int
    requested_k: int | None
    seed: int
    params: SegmentParams = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "predicted_k": int(self.predicted_k),
            "requested_k": None if self.requested_k is None else int(self.requested_k),
            "seed": int(self.seed),
            "face_labels": [int(x) for x in self.face_labels],
            "params": {
                "delta": self.params.delta,
                "eta_convex": self.params.eta_convex,
                "m": self.params.m,
                "seed": self.params.seed,
                "k_min": self.params.k_min,
                "k_max": self.params.resolved_k_max(),
            },
        }


def predict_k(spectrum: Spectrum, k_min: int = 1, k_max: int | None = None) -> int:
    """Number of eigenvalues strictly above mu + sigma, clamped.

    mu and sigma are taken from the spectrum window (population form).
    """
    if spectrum.eigenvalues.shape[0] == 0:
        raise ValueError("spectrum is empty")
    if k_max is None:
        k_max = min(spectrum.m - 1, DEFAULT_K_CAP)
    if not 1 <= k_min <= k_max:
        raise ValueError("need 1 <= k_min <= k_max")
    raw = int((spectrum.eigenvalues > spectrum.mu + spectrum.sigma).sum())
    return int(np.clip(raw, k_min, k_max))


def segment(mesh: TriangleMesh, requested_k: int | None = None,
            params: SegmentParams | None = None) -> SegmentationResult:
    """Partition mesh faces into segments by spectral clustering.

    k comes from predict_k unless requested_k overrides it. The
    embedding rows are the first k eigenvector columns, normalized to
    unit length (rows that are exactly zero stay zero). Deterministic
    for fixed (mesh, params, seed) and invariant to face storage order.
    """
    params = params or SegmentParams()
    if mesh.n_faces < 1:
        raise ValueError("mesh has no faces")
    if requested_k is not None:
        if int(requested_k) != requested_k or requested_k < 1:
            raise ValueError("requested_k must be a positive integer")
        requested_k = int(requested_k)
        if requested_k > mesh.n_faces:
            raise ValueError(
                f"requested_k={requested_k} exceeds face count {mesh.n_faces}"
            )

    # canonical face order: sort by centroid so storage order is moot
    cent = mesh.face_centroids()
    canon = np.lexsort((cent[:, 2], cent[:, 1], cent[:, 0]))
    work = TriangleMesh(mesh.vertices, mesh.faces[canon], name=mesh.name, validate=False)

    graph = build_dual_graph(work, delta=params.delta, eta_convex=params.eta_convex)
    n_nodes = graph.node_count
    if requested_k is not None and requested_k > n_nodes:
        raise ValueError(
            f"requested_k={requested_k} exceeds the {n_nodes} faces of the "
            "largest connected component"
        )
    m_eff = min(n_nodes, max(params.m, requested_k or 1))
    L = normalized_laplacian(graph)
    spectrum = eigendecompose(L, m_eff, params.seed)

    k_max_eff = max(params.k_min, min(params.resolved_k_max(), n_nodes))
    predicted = predict_k(spectrum, min(params.k_min, n_nodes), k_max_eff)
    k = requested_k if requested_k is not None else predicted

    embedding = spectrum.eigenvectors[:, :k].copy()
    norms = np.linalg.norm(embedding, axis=1)
    nz = norms > 0
    embedding[nz] /= norms[nz, None]
    node_labels = _kmeans(embedding, k, params.seed)

    labels_canon = np.zeros(mesh.n_faces, dtype=np.int64)
    labels_canon[graph.face_ids] = node_labels
    face_labels = np.empty(mesh.n_faces, dtype=np.int64)
    face_labels[canon] = labels_canon
    # label ids follow first appearance in mesh face order
    face_labels = _relabel_first_appearance(face_labels)

    used = np.unique(face_labels)
    segments = [np.where(face_labels == s)[0].tolist() for s in used]
    return SegmentationResult(
        k=int(used.shape[0]),
        face_labels=face_labels,
        segments=segments,
        predicted_k=int(predicted),
        requested_k=requested_k,
        seed=params.seed,
        params=params,
    )


def _relabel_first_appearance(labels):
    """Rename labels to 0..k-1 in order of first appearance."""
    uniq, first = np.unique(labels, return_index=True)
    rank = np.empty(uniq.shape[0], dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(uniq.shape[0])
    lut = np.empty(int(uniq.max()) + 1, dtype=np.int64)
    lut[uniq] = rank
    return lut[labels]


def _kmeans(points, k, seed, max_iter=200):
    """Plain k-means with k-means++ seeding, deterministic given seed.

    Assignment ties go to the lowest cluster index; clusters that empty
    out are re-seeded from the point farthest from its center.
    """
    n = points.shape[0]
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        new_labels = np.argmin(d2, axis=1)
        assigned = d2[np.arange(n), new_labels]
        reseeded = False
        for c in range(k):
            if not (new_labels == c).any():
                far = int(np.argmax(assigned))
                centers[c] = points[far]
                new_labels[far] = c
                assigned[far] = 0.0
                reseeded = True
        if not reseeded and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            member = labels == c
            if member.any():
                centers[c] = points[member].mean(axis=0)
    return labels


def _kmeanspp_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = _sq_dists(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = points[idx]
        d2 = np.minimum(d2, _sq_dists(points, centers[c:c + 1])[:, 0])
    return centers


def _sq_dists(points, centers):
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


@dataclass
class SweepPoint:
    resolution: int
    predicted_k: int
    wall_time: float


def stability_sweep(mesh: TriangleMesh, resolutions, params: SegmentParams | None = None,
                    remesh_tolerance: float = 0.02) -> list:
    """Remesh and segment at each resolution, reporting k and timing.

    resolutions must be ascending. "Stabilized at r" afterwards means
    predicted k is identical at every swept resolution >= r; see
    stabilized_at().
    """
    res = [int(r) for r in resolutions]
    if not res:
        raise ValueError("resolutions is empty")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ValueError("resolutions must be strictly ascending")
    params = params or SegmentParams()
    out = []
    for r in res:
        t0 = time.perf_counter()
        remeshed = remesh(mesh, RemeshParams(r, tolerance_fraction=remesh_tolerance,
                                             seed=params.seed))
        result = segment(remeshed, None, params)
        out.append(SweepPoint(resolution=r, predicted_k=result.predicted_k,
                              wall_time=time.perf_counter() - t0))
    return out


def stabilized_at(points) -> int:
    """Smallest swept resolution whose k persists through every later one."""
    ks = [p.predicted_k for p in points]
    idx = len(ks) - 1
    while idx > 0 and ks[idx - 1] == ks[-1]:
        idx -= 1
    return points[idx].resolution
