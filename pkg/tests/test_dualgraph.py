import numpy as np
import pytest

from fabseg.dualgraph import build_dual_graph, normalized_laplacian
from fabseg.errors import GraphError
from fabseg.mesh import TriangleMesh
from fabseg import synthetic


def hinge(third_vertex):
    """Two triangles sharing the edge (0,0,0)-(1,0,0).

    Face 0 lies in the z=0 plane with normal +z; face 1's apex is
    third_vertex, wound so both normals agree with a consistent
    surface orientation.
    """
    vertices = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, 1.0, 0.0],
        third_vertex,
    ])
    faces = np.array([[0, 1, 2], [1, 0, 3]])
    return TriangleMesh(vertices, faces, name="hinge")


def test_coplanar_pair_weight():
    # flat pair: angular term vanishes, single edge self-normalizes the
    # geodesic term, so Dist = delta and W = exp(-0.5)
    g = build_dual_graph(hinge([0.5, -1.0, 0.0]))
    assert g.node_count == 2
    assert g.edges.shape == (1, 2)
    assert g.angular[0] == 0.0
    assert np.isclose(g.affinity[0, 1], np.exp(-0.5), rtol=0, atol=1e-12)


def test_convex_edge_discounted():
    g = build_dual_graph(hinge([0.5, 0.0, -1.0]))
    # right-angle roof ridge: cos theta = 0, eta = 0.1
    assert np.isclose(g.angular[0], 0.1, atol=1e-12)


def test_concave_edge_full_weight():
    g = build_dual_graph(hinge([0.5, 0.0, 1.0]))
    # right-angle valley: cos theta = 0, eta = 1
    assert np.isclose(g.angular[0], 1.0, atol=1e-12)


def test_eta_convex_parameter():
    g = build_dual_graph(hinge([0.5, 0.0, -1.0]), eta_convex=0.25)
    assert np.isclose(g.angular[0], 0.25, atol=1e-12)


def test_flat_fan_equal_weights():
    # unit square split into 4 triangles around its center: all
    # coplanar and congruent, so every dual edge gets the same weight
    vertices = np.array([
        [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0], [0.5, 0.5, 0.0],
    ])
    faces = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    g = build_dual_graph(TriangleMesh(vertices, faces))
    assert g.edges.shape[0] == 4
    assert np.allclose(g.affinity.data, np.exp(-0.5), atol=1e-12)


def test_delta_extremes():
    m = hinge([0.5, 0.0, 1.0])
    g_geod = build_dual_graph(m, delta=1.0)
    g_ang = build_dual_graph(m, delta=0.0)
    # single edge: each normalized term is exactly 1
    assert np.isclose(g_geod.affinity[0, 1], np.exp(-1.0), atol=1e-12)
    assert np.isclose(g_ang.affinity[0, 1], np.exp(-1.0), atol=1e-12)


def test_parameter_validation():
    m = hinge([0.5, -1.0, 0.0])
    with pytest.raises(ValueError):
        build_dual_graph(m, delta=-0.1)
    with pytest.raises(ValueError):
        build_dual_graph(m, delta=1.1)
    with pytest.raises(ValueError):
        build_dual_graph(m, eta_convex=0.0)
    with pytest.raises(ValueError):
        build_dual_graph(m, eta_convex=1.5)


def test_graph_invariants_on_synthetic_meshes():
    for mesh in (synthetic.uv_sphere(rings=8, segments=10),
                 synthetic.torus(major_segments=12, minor_segments=8),
                 synthetic.vase(segments=16, pieces=2)):
        g = build_dual_graph(mesh)
        assert g.node_count == mesh.n_faces
        assert np.all(g.edges[:, 0] < g.edges[:, 1])
        key = g.edges[:, 0] * g.node_count + g.edges[:, 1]
        assert np.unique(key).size == key.size
        assert g.affinity.nnz == 2 * g.edges.shape[0]
        assert np.all(g.geodesic > 0)
        assert np.all(g.angular >= 0)
        w = g.affinity.data
        assert np.all(w > 0) and np.all(w <= 1.0)
        assert np.all(g.degree > 0)
        assert abs(g.affinity - g.affinity.T).max() == 0.0


def test_closed_convex_surface_is_all_convex():
    g = build_dual_graph(synthetic.uv_sphere(rings=10, segments=12))
    # every dihedral on a sphere bends outward, so the discount applies
    # everywhere and angular stays well below the concave scale
    assert g.angular.max() < 0.1


def test_torus_has_concave_edges():
    g = build_dual_graph(synthetic.torus(major_segments=16, minor_segments=10))
    assert g.angular.max() > g.angular.min() * 5


def test_disconnected_mesh_uses_largest_component():
    a = synthetic.box(center=(0.0, 0.0, 0.0))
    b = synthetic.box(size=(0.5, 0.5, 0.5), center=(3.0, 0.0, 0.0), divisions=2)
    verts = np.concatenate([a.vertices, b.vertices])
    faces = np.concatenate([a.faces, b.faces + len(a.vertices)])
    mesh = TriangleMesh(verts, faces)
    with pytest.warns(UserWarning, match="largest face component"):
        g = build_dual_graph(mesh)
    assert g.node_count == b.n_faces
    assert set(g.face_ids) == set(range(a.n_faces, a.n_faces + b.n_faces))


def test_zero_geodesic_raises():
    # degenerate collinear faces put both centroids on the shared edge
    # midpoint; only constructible with validation off
    vertices = np.array([
        [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.0, 0.0],
    ])
    faces = np.array([[0, 1, 2], [1, 0, 3]])
    mesh = TriangleMesh(vertices, faces, validate=False)
    with pytest.raises(GraphError):
        build_dual_graph(mesh)


def test_parallel_dual_edges_collapse():
    # two faces over the same three vertices share all three edges;
    # the dual graph must keep a single edge between them
    vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0]])
    faces = np.array([[0, 1, 2], [1, 0, 2]])
    mesh = TriangleMesh(vertices, faces, validate=False)
    g = build_dual_graph(mesh)
    assert g.node_count == 2
    assert g.edges.shape[0] == 1


def fin_wheel():
    """Three fins at 120 degrees around a shared non-manifold edge."""
    angles = [2.0 * np.pi * k / 3.0 for k in range(3)]
    vertices = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
        + [[0.5, np.cos(a), np.sin(a)] for a in angles])
    faces = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    return TriangleMesh(vertices, faces, validate=False)


def test_nonmanifold_edge_connects_all_incident_faces():
    # delta=1 sidesteps the angular term: fin pairs around a shared
    # edge sit exactly on the convex/concave decision boundary
    g = build_dual_graph(fin_wheel(), delta=1.0)
    assert g.node_count == 3
    assert g.edges.shape[0] == 3
    # congruent fins: one weight shared by every edge
    assert np.allclose(g.affinity.data, np.exp(-1.0), atol=1e-12)


def test_laplacian_two_nodes():
    g = build_dual_graph(hinge([0.5, -1.0, 0.0]))
    L = normalized_laplacian(g).toarray()
    assert np.allclose(L, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-12)


def test_laplacian_symmetric_k3():
    # equal-weight triangle graph: eigenvalues {0, 1.5, 1.5}
    L = normalized_laplacian(build_dual_graph(fin_wheel(), delta=1.0))
    lam = np.linalg.eigvalsh(L.toarray())
    assert np.allclose(lam, [0.0, 1.5, 1.5], atol=1e-9)


def test_laplacian_invariants():
    for mesh in (synthetic.uv_sphere(rings=8, segments=10),
                 synthetic.torus(major_segments=12, minor_segments=8)):
        g = build_dual_graph(mesh)
        L = normalized_laplacian(g)
        assert abs(L - L.T).max() == 0.0
        # sqrt(degree) spans the kernel of a connected graph
        null = np.sqrt(g.degree)
        assert np.linalg.norm(L @ null) <= 1e-12 * np.linalg.norm(null)
        lam = np.linalg.eigvalsh(L.toarray())
        assert lam.min() >= -1e-10
        assert lam.max() <= 2.0 + 1e-10


def test_isolated_face_raises():
    vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0]])
    mesh = TriangleMesh(vertices, np.array([[0, 1, 2]]))
    g = build_dual_graph(mesh)
    with pytest.raises(GraphError, match="face 0"):
        normalized_laplacian(g)
