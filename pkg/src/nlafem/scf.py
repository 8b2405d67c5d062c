"""Self-consistent-field solution of the discrete nonlinear eigenproblem on a
fixed mesh: damped fixed-point iteration over the density."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import physics
from .eigensolve import DEFAULT_SEED, b_orthonormalize, solve_lowest
from .errors import ScfConvergenceError, SpaceTooSmall
from .fem import (
    FESpace,
    assemble_stiffness,
    assemble_weighted_mass,
    mass_matrix,
    reference_basis,
)
from .physics import ProblemSpec


@dataclass
class DiscreteState:
    space: FESpace
    phi: list            # N dof vectors
    mu: np.ndarray       # ascending eigenvalues
    rho: np.ndarray      # nodal density coefficients
    energy: float
    scf_iterations: int
    scf_residual: float
    energy_terms: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)  # (iter, density_resid, eig_change, energy)


@dataclass
class ScfOptions:
    mixing: float = 0.3
    tol_density: float = 1e-7
    tol_eigen: float = 1e-8
    max_outer: int = 200
    eigen_tol: float = 1e-9
    eigen_max_iter: int = 2000
    poisson_tol: float = 1e-10
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")


def hamiltonian_weight(space, spec, rho_nodal, rho_quad=None, poisson_tol=1e-10):
    """Quadrature-point values of V + N1(rho) + W(rho) and the W coefficients."""
    if rho_quad is None:
        rho_quad = np.clip(space.eval_at_quad(rho_nodal), 0.0, None)
    vq = physics.eval_potential(spec, space.quad_physical().reshape(-1, 2)).reshape(rho_quad.shape)
    wq = vq + physics.eval_n1(spec.n1, rho_quad)
    W = np.zeros(space.dof_count)
    if spec.alpha != 0.0:
        W = physics.hartree_potential(space, rho_nodal, spec.alpha, poisson_tol)
        wq = wq + space.eval_at_quad(W)
    return wq, W


def assemble_hamiltonian(space, spec, rho_nodal, rho_quad=None, poisson_tol=1e-10):
    wq, _ = hamiltonian_weight(space, spec, rho_nodal, rho_quad, poisson_tol)
    return assemble_stiffness(space, spec.kappa) + assemble_weighted_mass(space, wq)


def apply_hamiltonian(space, spec, rho, x, poisson_tol=1e-10):
    """Weak action (H[rho] x)_i on interior DOFs; boundary entries are zero."""
    rho = np.asarray(rho, dtype=float)
    x = np.asarray(x, dtype=float)
    space._check_len(rho)
    space._check_len(x)
    A = assemble_hamiltonian(space, spec, rho, poisson_tol=poisson_tol)
    out = np.asarray(A @ x)
    out[space.dirichlet_mask] = 0.0
    return out


def _fix_signs(vecs):
    for j in range(vecs.shape[1]):
        i = np.argmax(np.abs(vecs[:, j]))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def prolong(old_space: FESpace, coeffs: np.ndarray, new_space: FESpace) -> np.ndarray:
    """Exact prolongation of an FE function onto a one-step refined mesh."""
    coeffs = np.asarray(coeffs, dtype=float)
    old_space._check_len(coeffs)
    if old_space.degree != new_space.degree:
        raise ValueError("prolongation requires equal degrees")
    new_mesh = new_space.mesh
    if old_space.degree == 1:
        out = np.empty(new_space.dof_count)
        old_nv = old_space.dof_count
        out[:old_nv] = coeffs
        for i in range(old_nv, new_mesh.num_vertices):
            a, b = new_mesh.vertex_parents[i]
            out[i] = 0.5 * (out[a] + out[b])
        return out
    # degree 2: evaluate the old quadratic inside the ancestor element
    old_mesh = old_space.mesh
    anc = np.where(new_mesh.parent >= 0, new_mesh.parent, -1)
    # carried-over elements map to themselves in the input mesh (same order)
    carried = np.flatnonzero(new_mesh.parent < 0)
    anc[carried] = _carried_indices(old_mesh, new_mesh, carried)
    out = np.empty(new_space.dof_count)
    node_coords = new_space.dof_coordinates()
    old_coords = old_mesh.element_coords()
    for e in range(new_mesh.num_elements):
        a = int(anc[e])
        v0 = old_coords[a, 0]
        J = np.stack([old_coords[a, 1] - v0, old_coords[a, 2] - v0], axis=1)
        Jinv = np.linalg.inv(J)
        dofs = new_space.element_dofs[e]
        ref = (node_coords[dofs] - v0) @ Jinv.T
        N, _ = reference_basis(2, ref)
        out[dofs] = N @ coeffs[old_space.element_dofs[a]]
    return out


def _carried_indices(old_mesh, new_mesh, carried):
    """Indices in the old mesh of elements carried over unchanged."""
    lookup = {}
    for i, tri in enumerate(old_mesh.elements):
        lookup[tuple(int(v) for v in tri)] = i
    return np.array(
        [lookup[tuple(int(v) for v in new_mesh.elements[e])] for e in carried],
        dtype=np.int64,
    )


def scf_solve(
    space: FESpace,
    spec: ProblemSpec,
    opts: ScfOptions | None = None,
    warm_start: DiscreteState | None = None,
) -> DiscreteState:
    opts = opts or ScfOptions()
    N = spec.n_states
    idx = space.interior_dofs
    if len(idx) < N:
        raise SpaceTooSmall(
            f"interior DOF count {len(idx)} < n_states {N}; refine the mesh first"
        )
    K = assemble_stiffness(space, spec.kappa)
    M = mass_matrix(space)
    Ki = K[np.ix_(idx, idx)].tocsr()
    Mi = M[np.ix_(idx, idx)].tocsr()

    initial = None
    if warm_start is not None:
        cols = []
        for p in warm_start.phi:
            q = p if warm_start.space is space else prolong(warm_start.space, p, space)
            cols.append(q[idx])
        initial = b_orthonormalize(np.stack(cols, axis=1), Mi)
        rho = physics.density(space, [_expand(space, idx, initial[:, j]) for j in range(N)])
    else:
        rho = np.zeros(space.dof_count)

    linear = spec.is_linear()
    mu_prev = None
    trace = []
    phi = None
    rho_in = rho
    iters = 0
    converged = False

    for outer in range(1, opts.max_outer + 1):
        iters = outer
        rho_in = rho
        wq, _ = hamiltonian_weight(space, spec, rho_in, poisson_tol=opts.poisson_tol)
        A = K + assemble_weighted_mass(space, wq)
        Ai = A[np.ix_(idx, idx)].tocsr()
        res = solve_lowest(
            Ai, Mi, N,
            tol=opts.eigen_tol,
            max_iter=opts.eigen_max_iter,
            initial=initial,
            seed=opts.seed,
        )
        vecs = _fix_signs(res.eigenvectors.copy())
        initial = vecs
        phi = [_expand(space, idx, vecs[:, j]) for j in range(N)]
        rho_new = physics.density(space, phi)
        d = rho_new - rho_in
        resid = float(np.sqrt(max(d @ (M @ d), 0.0)))
        eig_change = (
            float(np.abs(res.eigenvalues - mu_prev).max()) if mu_prev is not None else np.inf
        )
        mu_prev = res.eigenvalues
        trace.append((outer, resid, eig_change, float(res.eigenvalues[0])))
        if linear or (resid <= opts.tol_density and eig_change <= opts.tol_eigen):
            converged = True
            break
        rho = (1.0 - opts.mixing) * rho_in + opts.mixing * rho_new

    state = _finalize(space, spec, opts, phi, rho_in, iters, trace)
    if not converged:
        raise ScfConvergenceError(
            f"SCF did not converge in {opts.max_outer} iterations "
            f"(last density residual {trace[-1][1]:.3e})",
            state=state,
            residual_history=[t[1] for t in trace],
        )
    return state


def _expand(space, idx, interior_vec):
    out = np.zeros(space.dof_count)
    out[idx] = interior_vec
    return out


def _finalize(space, spec, opts, phi, rho_in, iters, trace):
    """Self-consistent final report: mu are Rayleigh quotients of H[rho(Phi)]."""
    rho_nodal = physics.density(space, phi)
    rho_quad = physics.density_at_quad(space, phi)
    K = assemble_stiffness(space, spec.kappa)
    wq, _ = hamiltonian_weight(
        space, spec, rho_nodal, rho_quad=rho_quad, poisson_tol=opts.poisson_tol
    )
    A = K + assemble_weighted_mass(space, wq)
    mu = np.array([p @ (A @ p) for p in phi])
    order = np.argsort(mu)
    mu = mu[order]
    phi = [phi[j] for j in order]
    M = mass_matrix(space)
    d = rho_nodal - rho_in
    resid = float(np.sqrt(max(d @ (M @ d), 0.0)))
    terms = physics._energy_terms(space, phi, spec, opts.poisson_tol)
    return DiscreteState(
        space=space,
        phi=phi,
        mu=mu,
        rho=rho_nodal,
        energy=terms["total"],
        scf_iterations=iters,
        scf_residual=resid,
        energy_terms=terms,
        trace=trace,
    )
