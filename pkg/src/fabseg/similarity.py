"""Shape similarity via multiresolution Reeb graphs.

compute_mu integrates geodesic distance over the surface (area-weighted,
approximated by farthest-point base sampling). build_mrg bins faces by
mu into dyadic intervals at R+1 resolution levels; connected face
regions within an interval become graph nodes carrying normalized area
and mu-extent attributes. mrg_similarity matches two graphs coarse to
fine and sums matched-pair similarity over the finest level.
contextual_similarity combines a segment score with its parent-mesh
score by product.

Everything here is pure: no mutation of inputs, deterministic for a
fixed seed, safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .errors import SimilarityError
from .mesh import TriangleMesh, build_topology, face_component_labels, submesh
from .segmentation import SegmentationResult

DEFAULT_BASE_POINTS = 400
DEFAULT_R = 4

_MAGIC = b"MRG1"
_SIDECAR_VERSION = 1


@dataclass(frozen=True)
class MuField:
    """Per-vertex geodesic-integral scalar, normalized to [0, 1].

    A constant field normalizes to all zeros. ``raw_min``/``raw_max``
    are the pre-normalization bounds (mm * mm^2), kept for diagnostics.
    """

    values: np.ndarray
    base_points: np.ndarray
    total_area: float  # mm^2
    raw_min: float
    raw_max: float


@dataclass(frozen=True)
class MRGLevel:
    """One resolution level: node attributes plus structure arrays.

    Nodes are ordered canonically by (interval, lowest face id).
    ``parent`` holds node ids one level up (-1 at level 0); ``edges``
    joins nodes in consecutive intervals of this level. ``face_nodes``
    (per-face node id) is construction-time audit data and is not
    serialized.
    """

    interval: np.ndarray
    area: np.ndarray
    length: np.ndarray
    parent: np.ndarray
    edges: np.ndarray
    face_nodes: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.area.shape[0]


@dataclass(frozen=True)
class MRG:
    """Multiresolution Reeb graph: levels[r] partitions mu-range into 2^r bins."""

    R: int
    levels: list

    @property
    def finest(self) -> MRGLevel:
        return self.levels[-1]


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    matched_pairs: list  # (node, node) pairs at the finest level, for audit


@dataclass(frozen=True)
class SegmentMesh:
    """A segment extracted as a standalone mesh.

    ``used_largest_component`` flags that the segment's faces were not
    connected and only the largest component was kept.
    """

    mesh: TriangleMesh
    used_largest_component: bool


def _vertex_graph(mesh: TriangleMesh):
    """Sparse symmetric vertex graph weighted by edge length."""
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    # coincident vertices would otherwise vanish from the sparse graph
    w = np.maximum(w, 1e-12)
    n = mesh.n_vertices
    g = coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
    return (g + g.T).tocsr()


def _vertex_areas(mesh: TriangleMesh):
    """Barycentric vertex areas: each face spreads a third per corner."""
    fa = mesh.face_areas()
    va = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(va, mesh.faces[:, k], fa / 3.0)
    return va


def compute_mu(mesh: TriangleMesh, num_base_points: int = DEFAULT_BASE_POINTS,
               seed: int = 0) -> MuField:
    """Area-weighted geodesic integral mu(v) = sum_b d(v, b) * area(b).

    Base points come from farthest-point sampling over edge-graph
    shortest paths; the first point is drawn from the seeded generator.
    area(b) is the Voronoi share of b: the summed vertex area of all
    vertices geodesically nearest to b. The field is normalized so
    min = 0 and max = 1; a constant field maps to all zeros.
    """
    if num_base_points < 1:
        raise ValueError("num_base_points must be >= 1")
    if seed < 0:
        raise ValueError("seed must be unsigned")
    n = mesh.n_vertices
    graph = _vertex_graph(mesh)
    n_comp, _ = _cc(graph, directed=False)
    if n_comp > 1:
        raise SimilarityError(
            f"mesh has {n_comp} vertex-connected components; "
            "pass components separately"
        )
    b_cap = min(int(num_base_points), n)
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    # ties in the farthest-point argmax and the Voronoi assignment are
    # resolved with a small absolute band so that the float noise a
    # rigid motion adds to edge lengths cannot reorder the selection
    eps = 1e-9 * mesh.bbox_diagonal()

    dist = np.empty((b_cap, n))
    bases = [first]
    dist[0] = _dijkstra(graph, directed=False, indices=first)
    nearest = np.zeros(n, dtype=np.int64)
    min_dist = dist[0].copy()
    while len(bases) < b_cap:
        hi = float(min_dist.max())
        if hi <= 0.0:
            break  # every vertex coincides with a base already
        cand = int(np.argmax(min_dist >= hi - eps))  # lowest index in the tie band
        i = len(bases)
        bases.append(cand)
        dist[i] = _dijkstra(graph, directed=False, indices=cand)
        closer = dist[i] < min_dist - eps
        nearest[closer] = i
        np.minimum(min_dist, dist[i], out=min_dist)

    v_area = _vertex_areas(mesh)
    share = np.bincount(nearest, weights=v_area, minlength=len(bases))
    mu = share @ dist[: len(bases)]
    lo, hi = float(mu.min()), float(mu.max())
    # constant up to float rounding collapses to zero rather than
    # stretching noise across the whole [0, 1] range
    if hi - lo > 1e-12 * max(hi, 1.0):
        values = (mu - lo) / (hi - lo)
    else:
        values = np.zeros(n)
    return MuField(
        values=values,
        base_points=np.array(bases, dtype=np.int64),
        total_area=float(mesh.face_areas().sum()),
        raw_min=lo,
        raw_max=hi,
    )


def build_mrg(mesh: TriangleMesh, mu: MuField, R: int = DEFAULT_R) -> MRG:
    """Bin faces by mean vertex mu into 2^r intervals for r = 0..R.

    Connected face regions within one interval become nodes. Node
    attributes: area share a(n) (sums to 1 per level) and length l(n),
    the region's mu-extent over the level's total extent (when every
    extent is zero, l falls back to a so the level still sums to 1).
    Dyadic nesting gives each node exactly one parent a level up.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if mesh.n_faces < 1:
        raise ValueError("mesh has no faces")
    if mu.values.shape[0] != mesh.n_vertices:
        raise ValueError(
            f"mu has {mu.values.shape[0]} values for {mesh.n_vertices} vertices"
        )
    face_mu = mu.values[mesh.faces].mean(axis=1)
    face_areas = mesh.face_areas()
    total = face_areas.sum()
    pairs = build_topology(mesh).adjacency_pairs()[:, :2]
    nf_count = mesh.n_faces

    levels = []
    prev_nf = None
    for r in range(R + 1):
        k = 1 << r
        bins = np.clip((face_mu * k).astype(np.int64), 0, k - 1)
        if pairs.shape[0]:
            same = bins[pairs[:, 0]] == bins[pairs[:, 1]]
            sp = pairs[same]
        else:
            sp = pairs
        g = coo_matrix(
            (np.ones(sp.shape[0]), (sp[:, 0], sp[:, 1])),
            shape=(nf_count, nf_count),
        )
        ncomp, raw = _cc(g + g.T, directed=False)

        # canonical node order: interval first, then lowest face id
        first_raw = np.full(ncomp, nf_count, dtype=np.int64)
        np.minimum.at(first_raw, raw, np.arange(nf_count))
        bin_raw = bins[first_raw]
        perm = np.lexsort((first_raw, bin_raw))
        new_id = np.empty(ncomp, dtype=np.int64)
        new_id[perm] = np.arange(ncomp)
        nf = new_id[raw]

        interval = bin_raw[perm]
        first_face = first_raw[perm]
        area = np.bincount(nf, weights=face_areas, minlength=ncomp) / total
        mu_lo = np.full(ncomp, np.inf)
        mu_hi = np.full(ncomp, -np.inf)
        np.minimum.at(mu_lo, nf, face_mu)
        np.maximum.at(mu_hi, nf, face_mu)
        extent = mu_hi - mu_lo
        tot_ext = extent.sum()
        length = extent / tot_ext if tot_ext > 0 else area.copy()

        if r == 0:
            parent = np.full(ncomp, -1, dtype=np.int64)
        else:
            parent = prev_nf[first_face]

        if pairs.shape[0]:
            cross = np.abs(bins[pairs[:, 0]] - bins[pairs[:, 1]]) == 1
            cp = pairs[cross]
            en = np.stack([nf[cp[:, 0]], nf[cp[:, 1]]], axis=1)
            en.sort(axis=1)
            edges = np.unique(en, axis=0) if en.shape[0] else en.reshape(0, 2)
        else:
            edges = np.zeros((0, 2), dtype=np.int64)

        levels.append(MRGLevel(
            interval=interval, area=area, length=length,
            parent=parent, edges=edges, face_nodes=nf,
        ))
        prev_nf = nf
    return MRG(R=R, levels=levels)


def _children(parent: np.ndarray) -> dict:
    out: dict = {}
    for i, p in enumerate(parent.tolist()):
        out.setdefault(p, []).append(i)
    return out


def mrg_similarity(g1: MRG, g2: MRG, w: float = 0.5) -> SimilarityScore:
    """Coarse-to-fine greedy matching score in [0, 1].

    Candidate pairs at level r must have matched parents at r-1; pairs
    are taken greedily in descending sim(m, n) = w*min(a) + (1-w)*min(l)
    with each node used at most once. Ties break on the symmetric key
    (min(i, j), max(i, j), i) so swapping arguments cannot change the
    score. The returned value sums matched sims over the finest level
    only; attribute normalization keeps it at or below 1.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must be in [0, 1]")
    if g1.R != g2.R:
        raise SimilarityError(f"MRG resolution mismatch: R={g1.R} vs R={g2.R}")
    matched = [(-1, -1)]
    score = 0.0
    for r in range(g1.R + 1):
        l1, l2 = g1.levels[r], g2.levels[r]
        kids1 = _children(l1.parent)
        kids2 = _children(l2.parent)
        cands = []
        for p, q in matched:
            for i in kids1.get(p, ()):
                ai, li = l1.area[i], l1.length[i]
                for j in kids2.get(q, ()):
                    s = w * min(ai, l2.area[j]) + (1.0 - w) * min(li, l2.length[j])
                    cands.append((-s, min(i, j), max(i, j), i, j))
        cands.sort()
        used1, used2 = set(), set()
        matched = []
        for neg_s, _, _, i, j in cands:
            if i in used1 or j in used2:
                continue
            used1.add(i)
            used2.add(j)
            matched.append((i, j))
            if r == g1.R:
                score -= neg_s
    return SimilarityScore(
        value=float(min(max(score, 0.0), 1.0)),
        matched_pairs=sorted(matched),
    )


def contextual_similarity(mesh_sim, segment_sim) -> float:
    """Product of mesh-level and segment-level similarity, in [0, 1]."""
    m = mesh_sim.value if isinstance(mesh_sim, SimilarityScore) else float(mesh_sim)
    s = segment_sim.value if isinstance(segment_sim, SimilarityScore) else float(segment_sim)
    for name, x in (("mesh_sim", m), ("segment_sim", s)):
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {x}")
    return float(m * s)


def segment_submesh(mesh: TriangleMesh, seg: SegmentationResult,
                    segment_id: int) -> SegmentMesh:
    """Extract one segment as a compact standalone mesh.

    A face-disconnected segment keeps only its largest component and
    sets ``used_largest_component``.
    """
    if not 0 <= segment_id < seg.k:
        raise ValueError(f"segment_id must be in [0, {seg.k}), got {segment_id}")
    face_ids = np.nonzero(seg.face_labels == segment_id)[0]
    if face_ids.shape[0] == 0:
        raise SimilarityError(f"segment {segment_id} has no faces")
    sub = submesh(mesh, face_ids, name=f"{mesh.name}.seg{segment_id}")
    n_comp, labels = face_component_labels(sub)
    if n_comp == 1:
        return SegmentMesh(mesh=sub, used_largest_component=False)
    counts = np.bincount(labels)
    keep = int(np.argmax(counts))  # ties keep the first-seen component
    kept = submesh(sub, np.nonzero(labels == keep)[0],
                   name=f"{mesh.name}.seg{segment_id}")
    return SegmentMesh(mesh=kept, used_largest_component=True)


def save_mrg(mrg: MRG, path) -> None:
    """Write the little-endian MRG1 sidecar (face_nodes excluded)."""
    buf = bytearray(_MAGIC)
    buf += np.array([_SIDECAR_VERSION, mrg.R], dtype="<u2").tobytes()
    for lv in mrg.levels:
        buf += np.array([lv.n_nodes, lv.edges.shape[0]], dtype="<u4").tobytes()
        buf += lv.interval.astype("<i4").tobytes()
        buf += lv.area.astype("<f8").tobytes()
        buf += lv.length.astype("<f8").tobytes()
        buf += lv.parent.astype("<i4").tobytes()
        buf += lv.edges.astype("<i4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def _take(data: bytes, dtype, count: int, offset: int):
    need = offset + np.dtype(dtype).itemsize * count
    if need > len(data):
        raise SimilarityError("truncated MRG sidecar")
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset), need


def load_mrg(path) -> MRG:
    """Read an MRG1 sidecar; structure is validated, face_nodes is None."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise SimilarityError(f"{path}: not an MRG sidecar (bad magic)")
    head, offset = _take(data, "<u2", 2, 4)
    version, R = int(head[0]), int(head[1])
    if version != _SIDECAR_VERSION:
        raise SimilarityError(f"unsupported MRG sidecar version {version}")
    if R < 1:
        raise SimilarityError(f"MRG sidecar has invalid R={R}")
    levels = []
    prev_count = 0
    for r in range(R + 1):
        counts, offset = _take(data, "<u4", 2, offset)
        nc, ne = int(counts[0]), int(counts[1])
        interval, offset = _take(data, "<i4", nc, offset)
        area, offset = _take(data, "<f8", nc, offset)
        length, offset = _take(data, "<f8", nc, offset)
        parent, offset = _take(data, "<i4", nc, offset)
        edges, offset = _take(data, "<i4", 2 * ne, offset)
        interval = interval.astype(np.int64)
        parent = parent.astype(np.int64)
        edges = edges.astype(np.int64).reshape(ne, 2)
        if interval.size and (interval.min() < 0 or interval.max() >= (1 << r)):
            raise SimilarityError(f"level {r}: interval id out of range")
        if r == 0:
            if parent.size and not (parent == -1).all():
                raise SimilarityError("level 0 nodes cannot have parents")
        elif parent.size and (parent.min() < 0 or parent.max() >= prev_count):
            raise SimilarityError(f"level {r}: parent id out of range")
        if edges.size and (edges.min() < 0 or edges.max() >= nc):
            raise SimilarityError(f"level {r}: edge endpoint out of range")
        levels.append(MRGLevel(
            interval=interval, area=area.copy(), length=length.copy(),
            parent=parent, edges=edges,
        ))
        prev_count = nc
    if offset != len(data):
        raise SimilarityError("trailing bytes after MRG sidecar payload")
    return MRG(R=R, levels=levels)


def mrg_to_dict(mrg: MRG) -> dict:
    """JSON-dumpable view of an MRG, for debugging."""
    return {
        "version": _SIDECAR_VERSION,
        "R": mrg.R,
        "levels": [
            {
                "intervals": 1 << r,
                "interval": lv.interval.tolist(),
                "area": lv.area.tolist(),
                "length": lv.length.tolist(),
                "parent": lv.parent.tolist(),
                "edges": lv.edges.tolist(),
            }
            for r, lv in enumerate(mrg.levels)
        ],
    }
