import math

import numpy as np
import pytest

from nlafem.errors import WeightSingularError
from nlafem.fem import (
    assemble_stiffness,
    assemble_weighted_mass,
    build_space,
    interpolate,
    mass_matrix,
    norms,
)
from nlafem.mesh import DomainSpec, create_initial_mesh, uniform_refine
from nlafem.quadrature import interval_rule, triangle_rule


@pytest.mark.parametrize("order,deg", [(2, 2), (4, 4), (6, 6)])
def test_triangle_rule_exactness(order, deg):
    pts, w = triangle_rule(order)
    assert w.sum() == pytest.approx(0.5, rel=1e-14)
    # exact on reference triangle for all monomials x^i y^j, i+j <= deg
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            got = float(w @ (pts[:, 0] ** i * pts[:, 1] ** j))
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert got == pytest.approx(exact, rel=1e-12), (i, j)


def test_interval_rule():
    s, w = interval_rule(2)
    assert w.sum() == pytest.approx(1.0)
    for d in range(4):
        assert float(w @ s**d) == pytest.approx(1.0 / (d + 1), rel=1e-13)


def _reference_space():
    m = create_initial_mesh(DomainSpec.explicit([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]]))
    return build_space(m, 1)


def test_p1_reference_stiffness_and_mass():
    sp = _reference_space()
    K = assemble_stiffness(sp, 1.0).toarray()
    assert np.allclose(K, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]))
    M = mass_matrix(sp).toarray()
    assert np.allclose(M, np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0)


def test_dof_counts():
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 2)
    sp = build_space(m, 1)
    assert sp.dof_count == 25
    assert sp.interior_count == 9
    sp2 = build_space(create_initial_mesh(DomainSpec.unit_square()), 2)
    assert sp2.dof_count == 9  # 4 vertices + 5 edges


def test_matrices_symmetric_and_definite():
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 2)
    for deg in (1, 2):
        sp = build_space(m, deg)
        K = assemble_stiffness(sp, 1.0)
        M = mass_matrix(sp)
        assert abs(K - K.T).max() < 1e-13
        assert abs(M - M.T).max() < 1e-13
        idx = sp.interior_dofs
        evals = np.linalg.eigvalsh(M[np.ix_(idx, idx)].toarray())
        assert evals.min() > 0


def test_galerkin_identity_linear_function():
    # u = x is in every space; stiffness row sums against it give |grad u|^2 = area
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 2)
    for deg in (1, 2):
        sp = build_space(m, deg)
        u = interpolate(sp, lambda p: p[:, 0])
        K = assemble_stiffness(sp, 1.0)
        assert u @ (K @ u) == pytest.approx(1.0, rel=1e-12)
        assert norms(sp, u)["h1_semi"] == pytest.approx(1.0, rel=1e-12)


def test_p2_interpolates_quadratics_exactly():
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 1)
    sp = build_space(m, 2)
    u = interpolate(sp, lambda p: p[:, 0] ** 2 + 3 * p[:, 0] * p[:, 1] - p[:, 1])
    # L2 norm of x^2+3xy-y on the unit square, computed exactly:
    # int (x^2+3xy-y)^2 = 71/60 - ... do it numerically at high order instead
    sph = build_space(m, 2, quad_order=6)
    vals = sph.eval_at_quad(u)
    pts = sph.quad_physical().reshape(-1, 2)
    exact = (pts[:, 0] ** 2 + 3 * pts[:, 0] * pts[:, 1] - pts[:, 1]).reshape(vals.shape)
    assert np.abs(vals - exact).max() < 1e-12


def test_weighted_mass_matches_mass_for_unit_weight():
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 1)
    sp = build_space(m, 1)
    w = np.ones((m.num_elements, len(sp.qweights)))
    A = assemble_weighted_mass(sp, w)
    assert abs(A - mass_matrix(sp)).max() < 1e-14


def test_weight_singular_error():
    m = create_initial_mesh(DomainSpec.unit_square())
    sp = build_space(m, 1)
    w = np.full((m.num_elements, len(sp.qweights)), np.nan)
    with pytest.raises(WeightSingularError):
        assemble_weighted_mass(sp, w)


def test_dirichlet_mask_is_boundary():
    m = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 2)
    sp = build_space(m, 1)
    xy = sp.dof_coordinates()
    on_b = (
        np.isclose(xy[:, 0], 0) | np.isclose(xy[:, 0], 1)
        | np.isclose(xy[:, 1], 0) | np.isclose(xy[:, 1], 1)
    )
    assert np.array_equal(sp.dirichlet_mask, on_b)
