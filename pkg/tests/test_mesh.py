import numpy as np
import pytest

from nlafem.errors import GeometryError
from nlafem.mesh import (
    DomainSpec,
    create_initial_mesh,
    element_sizes,
    export_mesh,
    import_mesh,
    mesh_quality,
    refine,
    uniform_refine,
)


def test_unit_square_initial():
    m = create_initial_mesh(DomainSpec.unit_square())
    assert m.num_vertices == 4 and m.num_elements == 2
    q = mesh_quality(m)
    assert q.conforming
    assert q.max_ratio == pytest.approx(1.0 + np.sqrt(2.0), rel=1e-12)


def test_l_shape_initial():
    m = create_initial_mesh(DomainSpec.l_shape())
    assert m.num_vertices == 8 and m.num_elements == 6
    assert mesh_quality(m).conforming
    # the reentrant corner is a vertex
    assert any(np.allclose(v, (0.0, 0.0)) for v in m.vertices)


def test_single_mark_produces_conforming_four_triangles():
    m = create_initial_mesh(DomainSpec.unit_square())
    r = refine(m, {0})
    assert r.num_elements == 4
    assert mesh_quality(r).conforming


def test_uniform_refine_element_count():
    m = create_initial_mesh(DomainSpec.unit_square())
    r = uniform_refine(m, 3)
    assert r.num_elements == 2 * 4**3  # 128
    assert mesh_quality(r).conforming


def test_uniform_refine_halves_h():
    m = create_initial_mesh(DomainSpec.unit_square())
    h0 = element_sizes(m).max()
    r = uniform_refine(m, 1)
    assert element_sizes(r).max() == pytest.approx(h0 / 2.0, rel=1e-12)


def test_generation_and_parent_tracking():
    m = create_initial_mesh(DomainSpec.unit_square())
    r = refine(m, {0})
    assert r.generation.max() > 0
    # every new element knows an ancestor in the input mesh
    kids = np.flatnonzero(r.parent >= 0)
    assert len(kids) > 0
    assert set(r.parent[kids]) <= {0, 1}


def test_explicit_domain_validation():
    with pytest.raises(GeometryError):
        create_initial_mesh(
            DomainSpec.explicit([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])
        )  # degenerate triangle


def test_export_import_round_trip():
    m = refine(create_initial_mesh(DomainSpec.l_shape()), {0, 3})
    text = export_mesh(m)
    m2 = import_mesh(text)
    assert np.allclose(m.vertices, m2.vertices)
    assert np.array_equal(m.elements, m2.elements)
    assert np.array_equal(m.ref_edge, m2.ref_edge)


def test_random_marking_stays_conforming_and_shape_regular():
    rng = np.random.default_rng(11)
    m = create_initial_mesh(DomainSpec.l_shape())
    ratio0 = mesh_quality(m).max_ratio
    worst = ratio0
    for step in range(200):
        n = m.num_elements
        marked = set(rng.choice(n, size=max(1, n // 8), replace=False).tolist())
        m = refine(m, marked)
        if step % 20 == 0 or m.num_elements > 4000:
            q = mesh_quality(m)
            assert q.conforming, f"non-conforming after step {step}"
            worst = max(worst, q.max_ratio)
        if m.num_elements > 4000:
            break
    # newest-vertex bisection produces finitely many similarity classes
    assert worst <= 4.0 * ratio0


def test_refine_monotone_h():
    m = create_initial_mesh(DomainSpec.unit_square())
    h = element_sizes(m).max()
    for _ in range(6):
        m = refine(m, {int(np.argmax(element_sizes(m)))})
        h2 = element_sizes(m).max()
        assert h2 <= h + 1e-15
        h = h2
