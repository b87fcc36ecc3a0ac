"""Parametric test-model generators.

Everything here is deterministic given its arguments (and seed where one
is taken). The generators are used by the test suite and the demo corpus
builder; none of them are needed by the processing pipeline itself.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import TriangleMesh
from .meshio import _weld


def _face_grid(origin, u_vec, v_vec, nu, nv):
    """Triangle soup for a rectangular grid patch, normal along u x v."""
    origin = np.asarray(origin, dtype=np.float64)
    u_vec = np.asarray(u_vec, dtype=np.float64)
    v_vec = np.asarray(v_vec, dtype=np.float64)
    us = np.linspace(0.0, 1.0, nu + 1)
    vs = np.linspace(0.0, 1.0, nv + 1)
    pts = origin[None, None, :] + us[:, None, None] * u_vec + vs[None, :, None] * v_vec
    tris = []
    for i in range(nu):
        for j in range(nv):
            p00 = pts[i, j]
            p10 = pts[i + 1, j]
            p11 = pts[i + 1, j + 1]
            p01 = pts[i, j + 1]
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    return np.array(tris)


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), divisions=1, name="box"):
    """Axis-aligned box, 12*divisions^2 faces, outward normals."""
    sx, sy, sz = (float(s) for s in np.broadcast_to(np.asarray(size, dtype=float), (3,)))
    cx, cy, cz = center
    d = divisions
    lo = np.array([cx - sx / 2, cy - sy / 2, cz - sz / 2])
    ex = np.array([sx, 0, 0])
    ey = np.array([0, sy, 0])
    ez = np.array([0, 0, sz])
    patches = [
        _face_grid(lo + ex, ey, ez, d, d),            # +x
        _face_grid(lo, ez, ey, d, d),                 # -x
        _face_grid(lo + ey, ez, ex, d, d),            # +y
        _face_grid(lo, ex, ez, d, d),                 # -y
        _face_grid(lo + ez, ex, ey, d, d),            # +z
        _face_grid(lo, ey, ex, d, d),                 # -z
    ]
    vertices, faces = _weld(np.concatenate(patches))
    return TriangleMesh(vertices, faces, name=name)


def lathe(profile, segments=32, name="lathe", return_ranges=False):
    """Revolve an (r, z) polyline around the z axis.

    Args:
        profile: sequence of (r, z) pairs, r >= 0. A point with r == 0
            becomes a single pole vertex; r == 0 is only allowed at the
            two ends of the profile.
        segments: number of angular steps of the full revolution.
        return_ranges: when true, also return a list of (start, stop)
            face-index ranges, one per profile edge. Ranges are what the
            demo fixtures use to define ground-truth segmentations.

    The surface is closed in the angular direction; it is watertight iff
    the profile starts and ends on the axis.
    """
    profile = [(float(r), float(z)) for r, z in profile]
    if len(profile) < 2:
        raise ValueError("profile needs at least 2 points")
    for i, (r, _) in enumerate(profile):
        if r < 0:
            raise ValueError("profile radius must be >= 0")
        if r == 0 and i not in (0, len(profile) - 1):
            raise ValueError("r == 0 only allowed at profile ends")
    theta = np.arange(segments) * (2 * math.pi / segments)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    vertices = []
    rows = []  # per profile point: array of vertex ids (len 1 for poles)
    for r, z in profile:
        if r == 0:
            rows.append(np.array([len(vertices)]))
            vertices.append((0.0, 0.0, z))
        else:
            base = len(vertices)
            rows.append(np.arange(base, base + segments))
            vertices.extend(zip(r * cos_t, r * sin_t, np.full(segments, z)))

    faces = []
    ranges = []
    nxt = np.roll(np.arange(segments), -1)
    for e in range(len(profile) - 1):
        start = len(faces)
        a, b = rows[e], rows[e + 1]
        if len(a) == 1 and len(b) == 1:
            raise ValueError("profile edge between two poles")
        if len(a) == 1:  # bottom pole fan, wound to face away from +z
            for j in range(segments):
                faces.append((a[0], b[nxt[j]], b[j]))
        elif len(b) == 1:  # top pole fan
            for j in range(segments):
                faces.append((a[j], a[nxt[j]], b[0]))
        else:
            for j in range(segments):
                faces.append((a[j], a[nxt[j]], b[nxt[j]]))
                faces.append((a[j], b[nxt[j]], b[j]))
        ranges.append((start, len(faces)))

    mesh = TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64), name=name)
    if signed_volume(mesh) < 0:
        faces_arr = mesh.faces.copy()
        faces_arr[:, [1, 2]] = faces_arr[:, [2, 1]]
        mesh = TriangleMesh(mesh.vertices, faces_arr, name=name)
    if return_ranges:
        return mesh, ranges
    return mesh


def signed_volume(mesh: TriangleMesh) -> float:
    """Signed volume via the divergence theorem; positive for outward winding."""
    p = mesh.vertices[mesh.faces]
    return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def _densify(profile, pieces):
    """Split every profile edge into `pieces` collinear sub-edges."""
    out = [profile[0]]
    for (r0, z0), (r1, z1) in zip(profile, profile[1:]):
        for k in range(1, pieces + 1):
            t = k / pieces
            out.append((r0 + (r1 - r0) * t, z0 + (z1 - z0) * t))
    return out


def uv_sphere(radius=1.0, rings=16, segments=32, center=(0.0, 0.0, 0.0), name="sphere"):
    profile = [(0.0, -radius)]
    for i in range(1, rings):
        phi = math.pi * i / rings
        profile.append((radius * math.sin(phi), -radius * math.cos(phi)))
    profile.append((0.0, radius))
    mesh = lathe(profile, segments=segments, name=name)
    return mesh.transformed(translation=np.asarray(center, dtype=float))


def cylinder(radius=1.0, height=2.0, segments=32, rings=4, name="cylinder"):
    """Closed cylinder standing on z = 0."""
    profile = [(0.0, 0.0), (radius, 0.0)]
    for i in range(1, rings + 1):
        profile.append((radius, height * i / rings))
    profile.append((0.0, height))
    return lathe(profile, segments=segments, name=name)


def torus(major_radius=1.0, minor_radius=0.35, major_segments=48, minor_segments=24,
          name="torus"):
    u = np.arange(major_segments) * (2 * math.pi / major_segments)
    v = np.arange(minor_segments) * (2 * math.pi / minor_segments)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major_radius + minor_radius * np.cos(vv)) * np.cos(uu)
    y = (major_radius + minor_radius * np.cos(vv)) * np.sin(uu)
    z = minor_radius * np.sin(vv)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def vid(i, j):
        return (i % major_segments) * minor_segments + (j % minor_segments)

    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            faces.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    mesh = TriangleMesh(verts, np.array(faces, dtype=np.int64), name=name)
    if signed_volume(mesh) < 0:
        f = mesh.faces.copy()
        f[:, [1, 2]] = f[:, [2, 1]]
        mesh = TriangleMesh(mesh.vertices, f, name=name)
    return mesh


def star_blob(radius=1.0, spikes=6, spike_amp=0.45, rings=24, segments=48, name="star"):
    """Sphere with radial spikes around the equator.

    Same vertex layout as uv_sphere, but the radius is modulated by the
    angular coordinate, so it cannot be built with lathe().
    """
    verts = [(0.0, 0.0, -radius)]
    rows = [np.array([0])]
    theta = np.arange(segments) * (2 * math.pi / segments)
    for i in range(1, rings):
        phi = math.pi * i / rings
        bulge = 1.0 + spike_amp * np.cos(spikes * theta) ** 2 * math.sin(phi) ** 2
        r = radius * math.sin(phi) * bulge
        z = -radius * math.cos(phi)
        base = len(verts)
        rows.append(np.arange(base, base + segments))
        verts.extend(zip(r * np.cos(theta), r * np.sin(theta), np.full(segments, z)))
    rows.append(np.array([len(verts)]))
    verts.append((0.0, 0.0, radius))

    nxt = np.roll(np.arange(segments), -1)
    faces = []
    for j in range(segments):
        faces.append((rows[0][0], rows[1][nxt[j]], rows[1][j]))
    for i in range(1, rings - 1):
        a, b = rows[i], rows[i + 1]
        for j in range(segments):
            faces.append((a[j], a[nxt[j]], b[nxt[j]]))
            faces.append((a[j], b[nxt[j]], b[j]))
    for j in range(segments):
        a = rows[rings - 1]
        faces.append((a[j], a[nxt[j]], rows[rings][0]))
    mesh = TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64), name=name)
    if signed_volume(mesh) < 0:
        f = mesh.faces.copy()
        f[:, [1, 2]] = f[:, [2, 1]]
        mesh = TriangleMesh(mesh.vertices, f, name=name)
    return mesh


def strip(n_faces=3, length=1.0, width=0.2, name="strip"):
    """Flat zigzag triangle strip with n_faces triangles."""
    if n_faces < 1:
        raise ValueError("n_faces must be >= 1")
    n_vertices = n_faces + 2
    dx = 2.0 * length / (n_vertices - 1)
    verts = []
    for i in range(n_vertices):
        verts.append((i * dx / 2.0, width if i % 2 else 0.0, 0.0))
    faces = []
    for i in range(n_faces):
        if i % 2 == 0:
            faces.append((i, i + 1, i + 2))
        else:
            faces.append((i, i + 2, i + 1))
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64), name=name)


def two_cubes_bridge(name="two-cubes-bridge"):
    """Two 12-face unit cubes joined by a 4-face flat ribbon, 28 faces.

    Faces 0..11 belong to the left cube, 12..23 to the right cube and
    24..27 to the ribbon. The ribbon lies in the plane of the cube tops,
    so its attachment edges are shared by three faces each; topology
    construction flags them as non-manifold but the dual graph stays
    connected.
    """
    a = box(center=(-1.5, 0.0, 0.0))
    b = box(center=(1.5, 0.0, 0.0))
    ribbon = _face_grid((-1.0, -0.5, 0.5), (2.0, 0.0, 0.0), (0.0, 1.0, 0.0), 2, 1)
    soup = np.concatenate([a.vertices[a.faces], b.vertices[b.faces], ribbon])
    vertices, faces = _weld(soup)
    return TriangleMesh(vertices, faces, name=name)


def vase(height=2.2, belly=1.0, neck=0.45, mouth=0.62, base=0.55,
         segments=40, pieces=5, name="vase"):
    """Hollow-looking vase silhouette (solid of revolution, watertight)."""
    zs = np.linspace(0.0, height, 7)
    rs = [base, belly * 0.85, belly, belly * 0.8, neck, mouth * 0.95, mouth]
    profile = [(0.0, 0.0)] + list(zip(rs, zs)) + [(0.0, height)]
    return lathe(_densify(profile, pieces), segments=segments, name=name)


def bowl(radius=1.2, height=0.7, lip=1.25, segments=40, pieces=5, name="bowl"):
    profile = [(0.0, 0.0), (radius * 0.55, 0.0), (radius * 0.92, height * 0.35),
               (radius, height * 0.75), (radius * lip / 1.25, height), (0.0, height)]
    return lathe(_densify(profile, pieces), segments=segments, name=name)


def planter(radius=0.9, height=1.4, taper=0.62, rim=1.12, segments=40, pieces=5,
            name="planter"):
    profile = [(0.0, 0.0), (radius * taper, 0.0), (radius * 0.92, height * 0.8),
               (radius * rim, height * 0.92), (radius * rim, height), (0.0, height)]
    return lathe(_densify(profile, pieces), segments=segments, name=name)


def snap_fit_plug(body_radius=1.0, body_height=0.6, peg_radius=0.30,
                  peg_height=0.42, segments=36, pieces=4, name="plug"):
    """Puck-shaped body with a central peg on top.

    Returns (mesh, segmentation) where segmentation is a dict with two
    face-id lists: "body" and "feature". The split follows the profile
    edges, so it is exact by construction.
    """
    body_profile = [(0.0, 0.0), (body_radius, 0.0), (body_radius, body_height),
                    (peg_radius * 1.35, body_height)]
    feat_profile = [(peg_radius * 1.35, body_height), (peg_radius, body_height),
                    (peg_radius, body_height + peg_height), (0.0, body_height + peg_height)]
    return _lathe_two_part(body_profile, feat_profile, segments, pieces, name)


def snap_fit_socket(body_radius=1.0, body_height=0.6, hole_radius=0.33,
                    hole_depth=0.40, segments=36, pieces=4, name="socket"):
    """Puck-shaped body with a central cylindrical recess in the top."""
    feat_profile = [(0.0, body_height - hole_depth),
                    (hole_radius, body_height - hole_depth),
                    (hole_radius, body_height), (hole_radius * 1.35, body_height)]
    body_profile = [(hole_radius * 1.35, body_height), (body_radius, body_height),
                    (body_radius, 0.0), (0.0, 0.0)]
    return _lathe_two_part(body_profile, feat_profile, segments, pieces, name,
                           feature_first=True)


def _lathe_two_part(body_profile, feat_profile, segments, pieces, name,
                    feature_first=False):
    bp = _densify(body_profile, pieces)
    fp = _densify(feat_profile, pieces)
    if feature_first:
        profile = fp + bp[1:]
        n_feat_edges = len(fp) - 1
        mesh, ranges = lathe(profile, segments=segments, name=name, return_ranges=True)
        feat_ranges = ranges[:n_feat_edges]
        body_ranges = ranges[n_feat_edges:]
    else:
        profile = bp + fp[1:]
        n_body_edges = len(bp) - 1
        mesh, ranges = lathe(profile, segments=segments, name=name, return_ranges=True)
        body_ranges = ranges[:n_body_edges]
        feat_ranges = ranges[n_body_edges:]
    body = [f for s, e in body_ranges for f in range(s, e)]
    feat = [f for s, e in feat_ranges for f in range(s, e)]
    return mesh, {"body": sorted(body), "feature": sorted(feat)}


def jitter(mesh: TriangleMesh, amplitude=0.01, seed=0) -> TriangleMesh:
    """Displace vertices along their normals by uniform noise.

    Used to make "same shape, different scan" twins for corpus tests.
    Amplitude is absolute, in mesh units; keep it well below the local
    feature size or validation may reject the result.
    """
    rng = np.random.default_rng(seed)
    n = mesh.vertex_normals()
    offs = rng.uniform(-amplitude, amplitude, size=(mesh.n_vertices, 1))
    return mesh.with_vertices(mesh.vertices + offs * n)
