import numpy as np
import pytest

from spectral2d.graph_core import Graph, degree_vector, normalized_laplacian, spmm
from spectral2d.spectral import EigenBasis, apply_operator, eig_sym, gft, igft

from conftest import laplacian_basis, random_graph


def test_diagonal_matrix_sorted_with_signed_permutation():
    basis = eig_sym(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(basis.lam, np.array([1.0, 2.0, 3.0]))
    expect = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.abs(basis.u - expect).max() < 1e-14


def test_two_node_laplacian_basis():
    lap = normalized_laplacian(Graph(2, ((0, 1),))).to_dense()
    basis = eig_sym(lap)
    assert np.abs(basis.lam - np.array([0.0, 2.0])).max() < 1e-12
    r = 1.0 / np.sqrt(2.0)
    assert np.abs(basis.u - np.array([[r, r], [r, -r]])).max() < 1e-12


def test_random_symmetric_reconstruction_and_orthonormality():
    rng = np.random.default_rng(0)
    for n in (2, 5, 16):
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2.0
        basis = eig_sym(a)
        assert np.abs(basis.u.T @ basis.u - np.eye(n)).max() < 1e-10
        recon = basis.u @ np.diag(basis.lam) @ basis.u.T
        assert np.abs(recon - a).max() < 1e-9
        assert np.all(np.diff(basis.lam) >= -1e-12)
        # eigenvalues cross-checked against an independent solver
        assert np.abs(basis.lam - np.linalg.eigvalsh(a)).max() < 1e-9


def test_eig_rejects_non_symmetric():
    with pytest.raises(ValueError, match="symmetric"):
        eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eig_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        eig_sym(np.ones((2, 3)))


def test_eig_deterministic_bits():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((12, 12))
    a = a + a.T
    b1 = eig_sym(a)
    b2 = eig_sym(a.copy())
    assert b1.u.tobytes() == b2.u.tobytes()
    assert b1.lam.tobytes() == b2.lam.tobytes()


def test_eig_sign_convention():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((9, 9))
    a = a + a.T
    basis = eig_sym(a)
    for k in range(9):
        col = basis.u[:, k]
        lead = np.nonzero(np.abs(col) > 1e-12)[0]
        assert col[lead[0]] > 0


def test_laplacian_spectrum_in_range():
    rng = np.random.default_rng(21)
    for _ in range(6):
        g = random_graph(rng, int(rng.integers(2, 28)))
        basis = laplacian_basis(g)
        assert basis.lam.min() > -1e-10
        assert basis.lam.max() < 2.0 + 1e-10


def test_gft_of_eigenvector_is_indicator():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 10)
    basis = laplacian_basis(g)
    k = 4
    coeffs = gft(basis, basis.u[:, k])
    expect = np.zeros(10)
    expect[k] = 1.0
    assert np.abs(coeffs - expect).max() < 1e-10


def test_gft_roundtrip_matrix():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 12)
    basis = laplacian_basis(g)
    f = rng.standard_normal((12, 3))
    assert np.abs(igft(basis, gft(basis, f)) - f).max() < 1e-10


def test_igft_zero_is_zero():
    basis = laplacian_basis(Graph(3, ((0, 1), (1, 2))))
    assert np.array_equal(igft(basis, np.zeros(3)), np.zeros(3))


def test_scaled_degree_vector_concentrates_on_zero_mode():
    # on a connected graph the kernel of the normalized Laplacian is spanned
    # by D^{1/2} 1, so that vector projects onto the first mode only
    rng = np.random.default_rng(17)
    for _ in range(5):
        g = random_graph(rng, int(rng.integers(3, 24)), p=0.5)
        basis = laplacian_basis(g)
        vec = np.sqrt(degree_vector(g))
        coeffs = gft(basis, vec)
        assert np.abs(coeffs[1:]).max() < 1e-9 * np.linalg.norm(vec)


def test_parseval():
    rng = np.random.default_rng(8)
    for _ in range(30):
        g = random_graph(rng, int(rng.integers(2, 30)))
        basis = laplacian_basis(g)
        f = rng.standard_normal(g.n_nodes)
        gap = abs(np.linalg.norm(f) - np.linalg.norm(gft(basis, f)))
        assert gap < 1e-10 * max(1.0, np.linalg.norm(f))


def test_apply_operator_all_ones_is_identity():
    rng = np.random.default_rng(4)
    g = random_graph(rng, 14)
    basis = laplacian_basis(g)
    f = rng.standard_normal((14, 2))
    assert np.abs(apply_operator(basis, np.ones(14), f) - f).max() < 1e-9


def test_apply_operator_with_eigenvalues_matches_sparse_product():
    rng = np.random.default_rng(6)
    g = random_graph(rng, 16)
    lap = normalized_laplacian(g)
    basis = eig_sym(lap.to_dense())
    f = rng.standard_normal(16)
    assert np.abs(apply_operator(basis, basis.lam, f) - spmm(lap, f)).max() < 1e-9


def test_apply_operator_indicator_is_projection():
    rng = np.random.default_rng(10)
    g = random_graph(rng, 9)
    basis = laplacian_basis(g)
    k = 3
    gmask = np.zeros(9)
    gmask[k] = 1.0
    f = rng.standard_normal(9)
    uk = basis.u[:, k]
    assert np.abs(apply_operator(basis, gmask, f) - uk * float(uk @ f)).max() < 1e-10


def test_polynomial_filter_matches_dense_polynomial():
    # p(lambda) applied in the spectral domain equals p(L) applied densely
    rng = np.random.default_rng(14)
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(3, 20)))
        lap = normalized_laplacian(g).to_dense()
        basis = eig_sym(lap)
        deg = int(rng.integers(0, 7))
        coeffs = rng.standard_normal(deg + 1)
        f = rng.standard_normal(g.n_nodes)
        gvals = np.zeros(g.n_nodes)
        dense = np.zeros_like(lap)
        power_vec = np.ones(g.n_nodes)
        power_mat = np.eye(g.n_nodes)
        for ck in coeffs:
            gvals = gvals + ck * power_vec
            dense = dense + ck * power_mat
            power_vec = power_vec * basis.lam
            power_mat = power_mat @ lap
        assert np.abs(apply_operator(basis, gvals, f) - dense @ f).max() < 1e-8


def test_dimension_mismatch_errors():
    basis = EigenBasis(u=np.eye(3), lam=np.zeros(3))
    with pytest.raises(ValueError):
        gft(basis, np.ones(4))
    with pytest.raises(ValueError):
        apply_operator(basis, np.ones(2), np.ones(3))
