import numpy as np
import pytest
from scipy.sparse import csr_matrix

import fabseg.eigen as eigen_module
from fabseg.dualgraph import build_dual_graph, normalized_laplacian
from fabseg.eigen import eigendecompose
from fabseg.errors import EigenConvergenceError
from fabseg import synthetic


def laplacian_of(mesh):
    return normalized_laplacian(build_dual_graph(mesh))


def test_single_node():
    s = eigendecompose(csr_matrix(np.zeros((1, 1))), 1)
    assert s.eigenvalues.shape == (1,)
    assert np.isclose(s.eigenvalues[0], 0.0)


def test_known_tridiagonal():
    # path graph Laplacian with analytic spectrum {0, 1, 3}
    L = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    s = eigendecompose(L, 3)
    assert np.allclose(s.eigenvalues, [0.0, 1.0, 3.0], atol=1e-9)


def test_window_statistics():
    vals = [0.0, 0.1, 0.12, 1.8, 1.9]
    s = eigendecompose(np.diag(vals), 5)
    mu = sum(vals) / 5.0
    sigma = np.sqrt(np.mean((np.asarray(vals) - mu) ** 2))
    assert np.isclose(s.mu, mu, atol=1e-12)
    assert np.isclose(s.sigma, sigma, atol=1e-12)
    assert s.m == 5


def test_iterative_matches_dense_on_degenerate_spectrum():
    # the sphere Laplacian carries exactly repeated eigenvalues, the
    # hardest case for a restarted Krylov method
    L = laplacian_of(synthetic.uv_sphere(segments=18, rings=14))
    assert L.shape[0] > eigen_module.DENSE_CUTOFF // 2
    it = eigendecompose(L, 24, seed=5, method="iterative")
    de = eigendecompose(L, 24, method="dense")
    assert np.abs(it.eigenvalues - de.eigenvalues).max() <= 1e-6


def test_iterative_matches_dense_across_seeds():
    L = laplacian_of(synthetic.uv_sphere(segments=18, rings=14))
    de = eigendecompose(L, 16, method="dense")
    for seed in range(5):
        it = eigendecompose(L, 16, seed=seed, method="iterative")
        assert np.abs(it.eigenvalues - de.eigenvalues).max() <= 1e-6


def test_auto_path_beyond_cutoff():
    mesh = synthetic.torus(major_segments=20, minor_segments=16)
    L = laplacian_of(mesh)
    assert L.shape[0] > eigen_module.DENSE_CUTOFF
    auto = eigendecompose(L, 32)
    de = eigendecompose(L, 32, method="dense")
    assert np.abs(auto.eigenvalues - de.eigenvalues).max() <= 1e-6


def test_residual_contract_both_paths():
    L = laplacian_of(synthetic.vase(segments=16, pieces=2))
    for method in ("dense", "iterative"):
        s = eigendecompose(L, 12, method=method)
        R = L @ s.eigenvectors - s.eigenvectors * s.eigenvalues
        assert np.linalg.norm(R, axis=0).max() <= 1e-6
        assert np.all(np.diff(s.eigenvalues) >= -1e-12)
        assert np.allclose(np.linalg.norm(s.eigenvectors, axis=0), 1.0, atol=1e-9)


def test_deterministic_for_fixed_seed():
    L = laplacian_of(synthetic.uv_sphere(segments=14, rings=10))
    a = eigendecompose(L, 10, seed=3, method="iterative")
    b = eigendecompose(L, 10, seed=3, method="iterative")
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_convergence_failure_reports_residual(monkeypatch):
    L = laplacian_of(synthetic.uv_sphere(rings=6, segments=8))
    monkeypatch.setattr(eigen_module, "RESIDUAL_TOL", -1.0)
    with pytest.raises(EigenConvergenceError) as exc:
        eigendecompose(L, 4, method="iterative")
    assert exc.value.residual >= 0.0


def test_input_validation():
    L = np.zeros((4, 4))
    with pytest.raises(ValueError):
        eigendecompose(np.zeros((3, 4)), 2)
    with pytest.raises(ValueError):
        eigendecompose(L, 0)
    with pytest.raises(ValueError):
        eigendecompose(L, 5)
    with pytest.raises(ValueError):
        eigendecompose(L, 2, seed=-1)
    with pytest.raises(ValueError):
        eigendecompose(L, 2, method="fast")
    skew = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        eigendecompose(skew, 1)
