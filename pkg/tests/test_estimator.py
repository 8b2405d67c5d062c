import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlafem.errors import SpaceTooSmall
from nlafem.estimator import (
    AfemOptions,
    IndicatorField,
    afem_run,
    compute_indicators,
    global_estimate,
    local_indicator,
    mark_dorfler,
    mark_maximum,
)
from nlafem.fem import build_space
from nlafem.mesh import DomainSpec, create_initial_mesh, element_sizes, refine, uniform_refine
from nlafem.physics import N1Preset, ProblemSpec
from nlafem.scf import DiscreteState, scf_solve


def _field(values):
    eta = np.asarray(values, dtype=float)
    return IndicatorField(eta=eta, residual_sq=eta**2, jump_sq=np.zeros_like(eta))


def test_hat_function_jump_hand_computed():
    # mesh: unit square split by the diagonal from (0,0) to (1,1) after one
    # marked bisection: 4 triangles meeting at the center vertex. Take the
    # P1 hat at the center: grad = +/- 2 along each diagonal direction.
    m = refine(create_initial_mesh(DomainSpec.unit_square()), {0})
    sp = build_space(m, 1)
    centre = int(np.argmin(np.hypot(*(sp.dof_coordinates() - 0.5).T)))
    phi = np.zeros(sp.dof_count)
    phi[centre] = 1.0
    state = DiscreteState(
        space=sp, phi=[phi], mu=np.array([0.0]), rho=phi * phi,
        energy=0.0, scf_iterations=1, scf_residual=0.0,
    )
    spec = ProblemSpec(kappa=1.0)
    ind = compute_indicators(sp, state, spec)
    # each interior edge (half-diagonal, length sqrt(2)/2) carries a constant
    # normal-gradient jump of magnitude 2 sqrt(2); ||J||^2 = 8 * sqrt(2)/2.
    he = np.sqrt(2.0) / 2.0
    per_edge = he * (8.0 * he)  # h_e * ||J||_{0,e}^2
    # every element touches exactly 2 interior edges, each added fully
    expected_jump = 2.0 * per_edge
    assert np.allclose(ind.jump_sq, expected_jump, rtol=1e-12)
    # residual part: -kappa*lap = 0 elementwise, mu=0 => (0 - 0)*phi... but
    # w*phi with w=0 gives 0, so eta^2 is the jump part alone
    assert np.allclose(ind.residual_sq, 0.0, atol=1e-14)
    assert global_estimate(ind) == pytest.approx(np.sqrt(4 * expected_jump))
    loc = local_indicator(sp, state, spec, 0)
    assert loc["eta"] == pytest.approx(np.sqrt(expected_jump))


def test_mark_maximum_contains_argmax_and_threshold():
    ind = _field([1.0, 3.0, 2.9, 0.1])
    got = mark_maximum(ind, 0.5)
    assert 1 in got
    assert got == {1, 2}  # eta >= 1.5
    assert mark_maximum(ind, 1.0) == {1}


def test_mark_maximum_zero_field_empty():
    assert mark_maximum(_field([0.0, 0.0]), 0.5) == set()


def test_mark_maximum_theta_validation():
    with pytest.raises(ValueError):
        mark_maximum(_field([1.0]), 0.0)
    with pytest.raises(ValueError):
        mark_maximum(_field([1.0]), 1.1)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=60),
    st.floats(min_value=0.01, max_value=1.0),
)
def test_mark_maximum_property(values, theta):
    ind = _field(values)
    got = mark_maximum(ind, theta)
    top = ind.eta.max()
    if top == 0.0:
        assert got == set()
    else:
        assert set(np.flatnonzero(ind.eta == top).tolist()) <= got
        for t in got:
            assert ind.eta[t] >= theta * top - 1e-30


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=60),
    st.floats(min_value=0.01, max_value=1.0),
)
def test_mark_dorfler_property(values, theta):
    ind = _field(values)
    got = mark_dorfler(ind, theta)
    sq = ind.eta**2
    if sq.sum() == 0:
        assert got == set()
    else:
        assert sum(sq[list(got)]) >= theta * sq.sum() - 1e-9 * sq.sum()


def test_afem_linear_run_monotone():
    hist = afem_run(
        ProblemSpec(kappa=1.0),
        uniform_refine(create_initial_mesh(DomainSpec.unit_square()), 2),
        AfemOptions(max_dof=400, max_iter=30),
    )
    h = [r.h_max for r in hist.records]
    assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))
    etas = [r.eta for r in hist.records]
    assert etas[-1] < etas[0]
    assert hist.stop_reason in ("max_dof", "max_iter")
    assert hist.to_csv().startswith("k,dofs,h_max,eta,energy,mu_1,marked,scf_iters,wall_ms")


def test_afem_too_coarse_initial_mesh():
    with pytest.raises(SpaceTooSmall, match="uniform pre-refinement"):
        afem_run(ProblemSpec(kappa=1.0), DomainSpec.unit_square())


def test_afem_gpe_smoke():
    spec = ProblemSpec(kappa=0.5, n1=N1Preset(variant="gpe", beta=10.0))
    m = refine(create_initial_mesh(DomainSpec.unit_square()), {0, 1})
    hist = afem_run(spec, m, AfemOptions(max_dof=300, max_iter=25))
    assert hist.final_state is not None
    assert hist.records[-1].h_max < hist.records[0].h_max
