import numpy as np
import pytest
import scipy.sparse as sp

from nlafem.eigensolve import b_orthonormalize, solve_lowest
from nlafem.errors import OperatorError, RankError
from nlafem.fem import assemble_stiffness, build_space, mass_matrix
from nlafem.mesh import DomainSpec, create_initial_mesh, uniform_refine


def _pencil(levels, degree=1):
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), levels)
    space = build_space(m, degree)
    idx = space.interior_dofs
    K = assemble_stiffness(space, 1.0)[np.ix_(idx, idx)].tocsr()
    M = mass_matrix(space)[np.ix_(idx, idx)].tocsr()
    return K, M


def test_laplacian_eigenvalues_dense_path():
    K, M = _pencil(3)
    res = solve_lowest(K, M, 3)
    exact = np.pi**2 * np.array([2.0, 5.0, 5.0])
    # discrete P1 eigenvalues from above, within O(h^2)
    assert np.all(res.eigenvalues >= exact - 1e-10)
    assert np.allclose(res.eigenvalues, exact, rtol=0.1)
    assert np.all(res.residual_norms <= 1e-8)


def test_laplacian_eigenvalues_lobpcg_path():
    K, M = _pencil(5)  # 961 interior dofs: iterative path
    res = solve_lowest(K, M, 2, tol=1e-8)
    assert res.iterations > 0
    exact = np.pi**2 * np.array([2.0, 5.0])
    assert np.allclose(res.eigenvalues, exact, rtol=0.01)


def test_b_orthonormality_of_returned_vectors():
    K, M = _pencil(4)
    res = solve_lowest(K, M, 4)
    G = res.eigenvectors.T @ (M @ res.eigenvectors)
    assert np.abs(G - np.eye(4)).max() < 1e-10


def test_shift_invariance():
    K, M = _pencil(3)
    base = solve_lowest(K, M, 2)
    shifted = solve_lowest(K + 7.5 * M, M, 2)
    assert np.allclose(shifted.eigenvalues, base.eigenvalues + 7.5, rtol=1e-10)


def test_monotonicity_under_refinement():
    prev = None
    for lev in (2, 3, 4):
        K, M = _pencil(lev)
        lam = solve_lowest(K, M, 1).eigenvalues[0]
        if prev is not None:
            assert lam <= prev + 1e-12  # nested spaces: discrete values decrease
        prev = lam
    assert prev >= 2 * np.pi**2 - 1e-12


def test_asymmetric_rejected():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    B = sp.identity(2, format="csr")
    with pytest.raises(OperatorError):
        solve_lowest(A, B, 1)


def test_rank_error_on_dependent_block():
    _, M = _pencil(2)
    n = M.shape[0]
    X = np.zeros((n, 2))
    X[:, 0] = 1.0
    X[:, 1] = 2.0  # linearly dependent
    with pytest.raises(RankError):
        b_orthonormalize(X, M)


def test_determinism_same_seed():
    K, M = _pencil(5)
    a = solve_lowest(K, M, 2, seed=123)
    b = solve_lowest(K, M, 2, seed=123)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
