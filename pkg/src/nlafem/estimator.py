"""Residual + jump a posteriori error indicators, marking strategies, and the
Solve -> Estimate -> Mark -> Refine driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import physics
from .errors import SpaceTooSmall
from .fem import build_space, reference_basis
from .mesh import DomainSpec, Mesh, create_initial_mesh, element_sizes, refine
from .quadrature import interval_rule
from .scf import DiscreteState, ScfOptions, hamiltonian_weight, scf_solve


@dataclass
class IndicatorField:
    eta: np.ndarray          # per-element indicator
    residual_sq: np.ndarray  # h_tau^2 ||R_tau||^2 part
    jump_sq: np.ndarray      # sum over own edges of h_e ||J_e||^2

    @property
    def eta_global(self) -> float:
        return float(np.sqrt(self.eta @ self.eta))


def _interior_edge_adjacency(mesh: Mesh):
    """Arrays (edges, t1, loc1, t2, loc2) over interior edges."""
    inc = {}
    for t, tri in enumerate(mesh.elements):
        tt = [int(v) for v in tri]
        for loc in range(3):
            key = tuple(sorted((tt[(loc + 1) % 3], tt[(loc + 2) % 3])))
            inc.setdefault(key, []).append((t, loc))
    rows = [(k, v[0], v[1]) for k, v in sorted(inc.items()) if len(v) == 2]
    if not rows:
        return (np.empty((0, 2), dtype=np.int64),) + tuple(
            np.empty(0, dtype=np.int64) for _ in range(4)
        )
    edges = np.array([r[0] for r in rows], dtype=np.int64)
    t1 = np.array([r[1][0] for r in rows], dtype=np.int64)
    l1 = np.array([r[1][1] for r in rows], dtype=np.int64)
    t2 = np.array([r[2][0] for r in rows], dtype=np.int64)
    l2 = np.array([r[2][1] for r in rows], dtype=np.int64)
    return edges, t1, l1, t2, l2


def _edge_gradients(space, phis, edges, tsel, gauss_s):
    """Gradients of each phi on the given element side at edge Gauss points.

    Returns (nstate, nedge, ngauss, 2).
    """
    mesh = space.mesh
    va = mesh.vertices[edges[:, 0]]  # (nE,2)
    vb = mesh.vertices[edges[:, 1]]
    pts = va[:, None, :] + gauss_s[None, :, None] * (vb - va)[:, None, :]  # (nE,ng,2)
    v0 = mesh.vertices[mesh.elements[tsel, 0]]  # (nE,2)
    rel = pts - v0[:, None, :]
    ref = np.einsum("ekd,egd->egk", space.jinv[tsel], rel)  # xi = Jinv (p - v0)
    nE, ng = ref.shape[:2]
    _, dN = reference_basis(space.degree, ref.reshape(-1, 2))
    dN = dN.reshape(nE, ng, -1, 2)
    out = []
    for c in phis:
        ce = c[space.element_dofs[tsel]]  # (nE, nl)
        gref = np.einsum("egid,ei->egd", dN, ce)
        gphys = np.einsum("egd,edk->egk", gref, space.jinv[tsel])
        out.append(gphys)
    return np.stack(out, axis=0)


def compute_indicators(space, state: DiscreteState, spec) -> IndicatorField:
    mesh = space.mesh
    ne = mesh.num_elements
    h = element_sizes(mesh)
    phis = [np.asarray(p, dtype=float) for p in state.phi]
    mu = np.asarray(state.mu, dtype=float)

    rho_q = physics.density_at_quad(space, phis)
    wq, _ = hamiltonian_weight(space, spec, state.rho, rho_quad=rho_q)

    residual_sq = np.zeros(ne)
    for i, c in enumerate(phis):
        phi_q = space.eval_at_quad(c)
        lap = space.element_laplacian(c)  # elementwise constant (0 for degree 1)
        r = -spec.kappa * lap[:, None] + (wq - mu[i]) * phi_q
        residual_sq += np.einsum("q,e,eq->e", space.qweights, space.detj, r * r)
    residual_sq *= h * h

    jump_sq = np.zeros(ne)
    edges, t1, l1, t2, l2 = _interior_edge_adjacency(mesh)
    if len(edges):
        va = mesh.vertices[edges[:, 0]]
        vb = mesh.vertices[edges[:, 1]]
        d = vb - va
        he = np.hypot(d[:, 0], d[:, 1])
        n1 = np.stack([d[:, 1], -d[:, 0]], axis=1) / he[:, None]
        cent1 = mesh.element_coords()[t1].mean(axis=1)
        mid = 0.5 * (va + vb)
        flip = np.einsum("ek,ek->e", n1, mid - cent1) < 0
        n1[flip] = -n1[flip]

        gauss_s, gauss_w = interval_rule(2)
        g1 = _edge_gradients(space, phis, edges, t1, gauss_s)  # (N,nE,ng,2)
        g2 = _edge_gradients(space, phis, edges, t2, gauss_s)
        jump = spec.kappa * np.einsum("negk,ek->neg", g1 - g2, n1)
        # ||j||^2_{0,e} summed over states, then scaled by h_e
        norm_sq = he * np.einsum("g,neg->e", gauss_w, jump * jump)
        contrib = he * norm_sq
        np.add.at(jump_sq, t1, contrib)
        np.add.at(jump_sq, t2, contrib)

    eta = np.sqrt(residual_sq + jump_sq)
    return IndicatorField(eta=eta, residual_sq=residual_sq, jump_sq=jump_sq)


def local_indicator(space, state, spec, tau: int) -> dict:
    ind = compute_indicators(space, state, spec)
    return {
        "eta": float(ind.eta[tau]),
        "residual_part": float(np.sqrt(ind.residual_sq[tau])),
        "jump_part": float(np.sqrt(ind.jump_sq[tau])),
    }


def global_estimate(indicators: IndicatorField) -> float:
    return indicators.eta_global


def mark_maximum(indicators: IndicatorField, theta: float) -> set:
    """All elements with eta >= theta * max eta; empty iff all indicators vanish."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if len(indicators.eta) == 0:
        raise ValueError("empty indicator field")
    top = indicators.eta.max()
    if top == 0.0:
        return set()
    return set(np.flatnonzero(indicators.eta >= theta * top).tolist())


def mark_dorfler(indicators: IndicatorField, theta: float) -> set:
    """Smallest set (by greedy descent) with sum eta^2 >= theta * total."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    sq = indicators.eta**2
    total = sq.sum()
    if total == 0.0:
        return set()
    order = np.argsort(sq)[::-1]
    csum = np.cumsum(sq[order])
    count = int(np.searchsorted(csum, theta * total) + 1)
    return set(order[:count].tolist())


@dataclass
class AfemOptions:
    theta: float = 0.5
    degree: int = 1
    quad_order: int | None = None
    strategy: str = "maximum"  # maximum | dorfler
    scf: ScfOptions = field(default_factory=ScfOptions)
    eta_tol: float = 0.0
    max_dof: int = 20000
    max_iter: int = 100


@dataclass
class HistoryRecord:
    k: int
    dofs: int
    h_max: float
    eta: float
    energy: float
    mu: np.ndarray
    marked: int
    scf_iters: int
    wall_ms: float


@dataclass
class ConvergenceHistory:
    records: list = field(default_factory=list)
    final_mesh: Mesh | None = None
    final_state: DiscreteState | None = None
    stop_reason: str = ""

    def to_csv(self) -> str:
        if not self.records:
            return ""
        n = len(self.records[0].mu)
        head = "k,dofs,h_max,eta,energy," + ",".join(f"mu_{i+1}" for i in range(n))
        head += ",marked,scf_iters,wall_ms"
        lines = [head]
        for r in self.records:
            mus = ",".join(f"{m:.17g}" for m in r.mu)
            lines.append(
                f"{r.k},{r.dofs},{r.h_max:.17g},{r.eta:.17g},{r.energy:.17g},"
                f"{mus},{r.marked},{r.scf_iters},{r.wall_ms:.17g}"
            )
        return "\n".join(lines) + "\n"


def afem_run(spec, domain, opts: AfemOptions | None = None) -> ConvergenceHistory:
    opts = opts or AfemOptions()
    mesh = domain if isinstance(domain, Mesh) else create_initial_mesh(domain)
    marker = mark_maximum if opts.strategy == "maximum" else mark_dorfler
    history = ConvergenceHistory()
    prev_state = None
    k = 0
    while True:
        t0 = time.perf_counter()
        space = build_space(mesh, opts.degree, opts.quad_order)
        if space.interior_count < spec.n_states:
            if k == 0:
                raise SpaceTooSmall(
                    "initial space has too few interior DOFs for "
                    f"{spec.n_states} states; apply a uniform pre-refinement"
                )
            raise SpaceTooSmall("refined space unexpectedly too small")
        try:
            state = scf_solve(space, spec, opts.scf, warm_start=prev_state)
        except Exception as err:
            err.history = history
            raise
        ind = compute_indicators(space, state, spec)
        eta = ind.eta_global
        marked = marker(ind, opts.theta)
        wall_ms = (time.perf_counter() - t0) * 1e3
        history.records.append(
            HistoryRecord(
                k=k,
                dofs=space.dof_count,
                h_max=float(element_sizes(mesh).max()),
                eta=eta,
                energy=state.energy,
                mu=np.array(state.mu),
                marked=len(marked),
                scf_iters=state.scf_iterations,
                wall_ms=wall_ms,
            )
        )
        history.final_mesh = mesh
        history.final_state = state
        if opts.eta_tol > 0.0 and eta <= opts.eta_tol:
            history.stop_reason = "eta_tol"
            break
        if not marked:
            history.stop_reason = "all indicators zero"
            break
        if space.dof_count > opts.max_dof:
            history.stop_reason = "max_dof"
            break
        if k >= opts.max_iter:
            history.stop_reason = "max_iter"
            break
        mesh = refine(mesh, marked)
        prev_state = state
        k += 1
    return history
