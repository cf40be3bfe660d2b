import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator

from graphembed.graph import laplacian, load_edge_list
from graphembed.numerics import (
    ConvergenceError,
    fix_signs,
    grad_check,
    power_iteration_radius,
    spmv,
    symmetric_eigs,
    truncated_svd,
)
from graphembed.sgd import gf_grad, gf_loss


def random_symmetric(n, seed, density=None):
    rng = np.random.default_rng(seed)
    if density is None:
        A = rng.standard_normal((n, n))
        return (A + A.T) / 2
    A = sp.random(n, n, density=density, random_state=seed, data_rvs=rng.standard_normal)
    return ((A + A.T) / 2).tocsr()


# -- spmv ----------------------------------------------------------------------


def test_spmv_identity_and_zero():
    x = np.arange(5.0)
    assert np.array_equal(spmv(sp.identity(5, format="csr"), x), x)
    assert np.array_equal(spmv(sp.csr_matrix((5, 5)), x), np.zeros(5))


def test_spmv_matches_dense():
    rng = np.random.default_rng(1)
    A = sp.random(50, 50, density=0.1, random_state=2, format="csr")
    x = rng.standard_normal(50)
    assert np.max(np.abs(spmv(A, x) - A.toarray() @ x)) <= 1e-12


def test_spmv_dim_mismatch():
    with pytest.raises(ValueError):
        spmv(sp.identity(3, format="csr"), np.ones(4))


# -- eigensolver -----------------------------------------------------------------


def test_eigs_identity():
    res = symmetric_eigs(np.eye(3), 1, "smallest")
    assert np.isclose(res.eigenvalues[0], 1.0)


def test_eigs_path_laplacian():
    L = laplacian(load_edge_list("0 1\n1 2\n2 3"))
    res = symmetric_eigs(L, 2, "smallest")
    oracle = np.linalg.eigvalsh(L.toarray())[:2]
    assert np.allclose(res.eigenvalues, oracle, atol=1e-6)
    assert np.isclose(res.eigenvalues[1], 2 - np.sqrt(2), atol=1e-6)


@pytest.mark.parametrize("which", ["smallest", "largest"])
@pytest.mark.parametrize("seed", range(3))
def test_eigs_random_dense(which, seed):
    A = random_symmetric(30, seed)
    res = symmetric_eigs(A, 5, which, seed=seed)
    ev = np.linalg.eigvalsh(A)
    oracle = ev[:5] if which == "smallest" else ev[-5:]
    assert np.allclose(res.eigenvalues, oracle, atol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_eigs_residual_contract(seed):
    A = random_symmetric(200, seed, density=0.05)
    k, tol = 6, 1e-8
    res = symmetric_eigs(A, k, "smallest", tol=tol, seed=seed)
    V = res.eigenvectors
    norm1 = np.abs(A).sum(axis=0).max()
    assert np.max(np.abs(V.T @ V - np.eye(k))) <= 1e-8
    assert np.linalg.norm(A @ V - V * res.eigenvalues) <= tol * norm1 * np.sqrt(k)
    assert np.all(res.residuals <= tol * norm1 * 1.0001)
    assert np.all(np.diff(res.eigenvalues) >= 0)


def test_eigs_linear_operator():
    A = random_symmetric(80, 5, density=0.1)
    res = symmetric_eigs(aslinearoperator(A), 3, "largest")
    assert np.allclose(res.eigenvalues, np.linalg.eigvalsh(A.toarray())[-3:], atol=1e-6)


def test_eigs_degenerate_spectrum():
    # K5 Laplacian: eigenvalue 5 has multiplicity 4
    A = 5 * np.eye(5) - np.ones((5, 5))
    res = symmetric_eigs(A, 3, "largest")
    assert np.allclose(res.eigenvalues, 5.0, atol=1e-8)


def test_eigs_deterministic():
    A = random_symmetric(120, 3, density=0.05)
    a = symmetric_eigs(A, 4, seed=11)
    b = symmetric_eigs(A, 4, seed=11)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_eigs_nonsymmetric_rejected():
    A = np.triu(np.ones((6, 6)))
    with pytest.raises(ValueError):
        symmetric_eigs(A, 2)
    with pytest.raises(ValueError):
        symmetric_eigs(sp.csr_matrix(A), 2)


def test_eigs_nonconvergence_reports_residuals():
    A = random_symmetric(300, 7, density=0.05)
    with pytest.raises(ConvergenceError) as info:
        symmetric_eigs(A, 5, tol=1e-14, max_iter=2)
    assert info.value.result is not None
    assert len(info.value.result.residuals) == 5


def test_eigs_k_too_large():
    with pytest.raises(ValueError):
        symmetric_eigs(np.eye(4), 4)


# -- SVD -------------------------------------------------------------------------


def test_svd_diagonal():
    res = truncated_svd(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.allclose(res.singular_values, [3, 2])


def test_svd_rank_one():
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(12), rng.standard_normal(10)
    res = truncated_svd(np.outer(u, v), 2)
    assert np.isclose(res.singular_values[0], np.linalg.norm(u) * np.linalg.norm(v))
    assert res.singular_values[1] <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_svd_random_matches_oracle(seed):
    A = np.random.default_rng(seed).standard_normal((20, 20))
    res = truncated_svd(A, 5, seed=seed)
    assert np.max(np.abs(res.singular_values - np.linalg.svd(A, compute_uv=False)[:5])) <= 1e-8


@pytest.mark.parametrize("shape,d", [((64, 64), 8), ((60, 40), 5), ((30, 50), 12), ((200, 150), 10)])
def test_svd_contract(shape, d):
    rng = np.random.default_rng(shape[0])
    A = rng.standard_normal(shape) @ np.diag(np.linspace(1, 3, shape[1]) ** 2)
    tol = 1e-8
    res = truncated_svd(A, d, tol=tol)
    U, s, V = res.U, res.singular_values, res.V
    assert np.max(np.abs(U.T @ U - np.eye(d))) <= 1e-8
    assert np.max(np.abs(V.T @ V - np.eye(d))) <= 1e-8
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert np.all(np.linalg.norm(A @ V - U * s, axis=0) <= tol * s[0])
    if max(shape) <= 64:
        lhs = np.linalg.norm(A - (U * s) @ V.T) ** 2
        rhs = np.linalg.norm(A) ** 2 - np.sum(s**2)
        assert abs(lhs - rhs) <= 1e-6 * np.linalg.norm(A) ** 2


def test_svd_sparse_operator():
    A = sp.random(300, 200, density=0.05, random_state=1, format="csr")
    res = truncated_svd(A, 6)
    oracle = np.linalg.svd(A.toarray(), compute_uv=False)[:6]
    assert np.allclose(res.singular_values, oracle, rtol=1e-8)


def test_svd_bad_d():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 4)


# -- misc ------------------------------------------------------------------------


def test_spectral_radius_upper_bound():
    g = load_edge_list("0 1\n1 2\n2 3\n3 0\n0 2")
    A = g.adjacency_matrix()
    rho = power_iteration_radius(A)
    exact = np.max(np.abs(np.linalg.eigvals(A.toarray())))
    assert exact <= rho <= exact * (1 + 1e-8)


def test_fix_signs():
    V = np.array([[1.0, -3.0], [-2.0, 1.0]])
    assert np.array_equal(fix_signs(V), [[-1.0, 3.0], [2.0, -1.0]])


def test_grad_check_quadratic():
    x = np.random.default_rng(0).standard_normal(7)
    assert grad_check(lambda v: v @ v, lambda v: 2 * v, x) <= 1e-8


def test_grad_check_detects_wrong_gradient():
    x = np.array([0.3, -0.7, 1.1, 2.0])
    err = grad_check(lambda v: v @ v, lambda v: 4 * v, x)
    assert err == pytest.approx(0.5, abs=1e-6)


def test_grad_check_gf_k3():
    pairs = np.array([[0, 1], [0, 2], [1, 2]])
    w = np.ones(3)
    Y = np.random.default_rng(2).standard_normal((3, 2))
    err = grad_check(lambda y: gf_loss(y, pairs, w, 0.1), lambda y: gf_grad(y, pairs, w, 0.1), Y)
    assert err <= 1e-5
