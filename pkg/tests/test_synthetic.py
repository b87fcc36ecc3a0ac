import numpy as np

from fabseg import synthetic
from fabseg.mesh import build_topology, connected_components


def test_box_counts():
    assert synthetic.box().n_faces == 12
    assert synthetic.box(divisions=3).n_faces == 12 * 9


def test_sphere_watertight_and_outward():
    s = synthetic.uv_sphere(radius=2.0, rings=12, segments=20)
    topo = build_topology(s)
    assert topo.is_watertight
    assert synthetic.signed_volume(s) > 0
    r = np.linalg.norm(s.vertices, axis=1)
    assert np.allclose(r, 2.0, atol=1e-9)


def test_cylinder_closed():
    c = synthetic.cylinder(radius=0.5, height=2.0, segments=16, rings=3)
    assert build_topology(c).is_watertight
    vol = synthetic.signed_volume(c)
    # inscribed prism volume is slightly below the analytic pi*r^2*h
    analytic = np.pi * 0.25 * 2.0
    assert analytic > vol > 0.95 * analytic


def test_torus_watertight():
    t = synthetic.torus(major_segments=24, minor_segments=12)
    assert build_topology(t).is_watertight
    assert synthetic.signed_volume(t) > 0


def test_star_blob_differs_from_sphere():
    star = synthetic.star_blob(rings=12, segments=24)
    assert build_topology(star).is_watertight
    r = np.linalg.norm(star.vertices, axis=1)
    assert r.max() > 1.2  # spikes stick out


def test_strip_face_count():
    s = synthetic.strip(3)
    assert s.n_faces == 3
    assert s.n_vertices == 5
    assert len(build_topology(s).boundary_edges) > 0


def test_two_cubes_bridge_layout():
    m = synthetic.two_cubes_bridge()
    assert m.n_faces == 28
    assert len(connected_components(m)) == 1
    topo = build_topology(m)
    assert len(topo.non_manifold_edges) == 2  # the two ribbon attachment edges
    cents = m.face_centroids()
    assert (cents[:12, 0] < -0.9).all()
    assert (cents[12:24, 0] > 0.9).all()
    assert np.allclose(cents[24:, 2], 0.5)


def test_lathe_ranges_cover_all_faces():
    mesh, ranges = synthetic.lathe(
        [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], segments=10,
        return_ranges=True,
    )
    covered = sorted(f for s, e in ranges for f in range(s, e))
    assert covered == list(range(mesh.n_faces))


def test_snap_fit_segmentations_partition():
    for mesh, seg in (synthetic.snap_fit_plug(), synthetic.snap_fit_socket()):
        both = sorted(seg["body"] + seg["feature"])
        assert both == list(range(mesh.n_faces))
        assert build_topology(mesh).is_watertight


def test_vase_bowl_planter_valid():
    for m in (synthetic.vase(), synthetic.bowl(), synthetic.planter()):
        assert build_topology(m).is_watertight
        assert synthetic.signed_volume(m) > 0


def test_jitter_keeps_topology():
    base = synthetic.uv_sphere(rings=8, segments=12)
    wobbly = synthetic.jitter(base, amplitude=0.01, seed=3)
    assert np.array_equal(wobbly.faces, base.faces)
    assert not np.array_equal(wobbly.vertices, base.vertices)
    assert np.abs(wobbly.vertices - base.vertices).max() <= 0.011
