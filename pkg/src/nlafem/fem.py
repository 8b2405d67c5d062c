"""Lagrange finite element spaces (degree 1 and 2) and operator assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DimensionError, WeightSingularError
from .mesh import Mesh
from .quadrature import triangle_rule

_P1_DN = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_BARY_GRADS = _P1_DN  # gradients of barycentric coordinates on the reference triangle


def reference_basis(degree: int, pts: np.ndarray):
    """Basis values (npts, nl) and gradients (npts, nl, 2) at reference points."""
    x, y = pts[:, 0], pts[:, 1]
    l = np.stack([1.0 - x - y, x, y], axis=1)  # (npts, 3)
    if degree == 1:
        N = l
        dN = np.broadcast_to(_P1_DN, (len(pts), 3, 2)).copy()
        return N, dN
    if degree == 2:
        N = np.empty((len(pts), 6))
        dN = np.empty((len(pts), 6, 2))
        for i in range(3):
            N[:, i] = l[:, i] * (2.0 * l[:, i] - 1.0)
            dN[:, i, :] = (4.0 * l[:, i, None] - 1.0) * _BARY_GRADS[i]
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            N[:, 3 + i] = 4.0 * l[:, j] * l[:, k]
            dN[:, 3 + i, :] = 4.0 * (
                l[:, j, None] * _BARY_GRADS[k] + l[:, k, None] * _BARY_GRADS[j]
            )
        return N, dN
    raise ValueError("degree must be 1 or 2")


def reference_hessians(degree: int) -> np.ndarray:
    """Constant reference-space Hessians (nl, 2, 2) of the basis functions."""
    if degree == 1:
        return np.zeros((3, 2, 2))
    H = np.empty((6, 2, 2))
    for i in range(3):
        g = _BARY_GRADS[i]
        H[i] = 4.0 * np.outer(g, g)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        gj, gk = _BARY_GRADS[j], _BARY_GRADS[k]
        H[3 + i] = 4.0 * (np.outer(gj, gk) + np.outer(gk, gj))
    return H


@dataclass
class FESpace:
    mesh: Mesh
    degree: int
    quad_order: int
    dof_count: int
    element_dofs: np.ndarray    # (ne, nl)
    dirichlet_mask: np.ndarray  # (dof,) bool
    edges: np.ndarray           # (nedge, 2) sorted vertex pairs, lexicographic order
    edge_index: dict            # (a, b) sorted tuple -> edge id
    qpoints: np.ndarray         # (nq, 2) reference quadrature points
    qweights: np.ndarray        # (nq,)
    basis: np.ndarray           # (nq, nl)
    basis_grad: np.ndarray      # (nq, nl, 2)
    jinv: np.ndarray            # (ne, 2, 2)
    detj: np.ndarray            # (ne,)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def interior_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask)

    @property
    def interior_count(self) -> int:
        return int((~self.dirichlet_mask).sum())

    def quad_physical(self) -> np.ndarray:
        """Physical quadrature points, shape (ne, nq, 2)."""
        coords = self.mesh.element_coords()  # (ne, 3, 2)
        v0 = coords[:, 0]
        J = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=2)  # (ne,2,2) cols
        return v0[:, None, :] + np.einsum("edk,qk->eqd", J, self.qpoints)

    def eval_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        """FE function values at all quadrature points, shape (ne, nq)."""
        self._check_len(coeffs)
        return np.einsum("qi,ei->eq", self.basis, coeffs[self.element_dofs])

    def grad_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        """FE function gradients at quadrature points, shape (ne, nq, 2)."""
        self._check_len(coeffs)
        grads = np.einsum("qid,edk->eqik", self.basis_grad, self.jinv)
        return np.einsum("eqik,ei->eqk", grads, coeffs[self.element_dofs])

    def element_gradient(self, coeffs: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
        """Gradients at given reference points for every element, (ne, npts, 2)."""
        self._check_len(coeffs)
        _, dN = reference_basis(self.degree, ref_pts)
        grads = np.einsum("qid,edk->eqik", dN, self.jinv)
        return np.einsum("eqik,ei->eqk", grads, coeffs[self.element_dofs])

    def element_laplacian(self, coeffs: np.ndarray) -> np.ndarray:
        """Elementwise-constant Laplacian of the FE function, shape (ne,)."""
        self._check_len(coeffs)
        H = reference_hessians(self.degree)  # (nl,2,2)
        lap = np.einsum("eab,iac,ecb->ei", self.jinv, H, self.jinv)
        # lap[e,i] = trace(Jinv^T H_i Jinv)
        return np.einsum("ei,ei->e", lap, coeffs[self.element_dofs])

    def integrate(self, vals: np.ndarray) -> float:
        """Integrate a field given by values at quadrature points (ne, nq)."""
        return float(np.einsum("q,e,eq->", self.qweights, self.detj, vals))

    def dof_coordinates(self) -> np.ndarray:
        pts = np.array(self.mesh.vertices)
        if self.degree == 1:
            return pts
        mids = 0.5 * (pts[self.edges[:, 0]] + pts[self.edges[:, 1]])
        return np.vstack([pts, mids])

    def _check_len(self, coeffs):
        if len(coeffs) != self.dof_count:
            raise DimensionError(
                f"coefficient vector length {len(coeffs)} != dof_count {self.dof_count}"
            )


def build_space(mesh: Mesh, degree: int, quad_order: int | None = None) -> FESpace:
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if quad_order is None:
        quad_order = 4 if degree == 1 else 6
    if quad_order < 2 * degree:
        raise ValueError(f"quad_order {quad_order} < 2*degree")

    edge_set = set()
    for tri in mesh.elements:
        t = [int(v) for v in tri]
        for loc in range(3):
            edge_set.add(tuple(sorted((t[(loc + 1) % 3], t[(loc + 2) % 3]))))
    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    edge_index = {tuple(e): i for i, e in enumerate(map(tuple, edges))}

    nv = mesh.num_vertices
    if degree == 1:
        dof_count = nv
        element_dofs = np.array(mesh.elements, dtype=np.int64)
    else:
        dof_count = nv + len(edges)
        element_dofs = np.empty((mesh.num_elements, 6), dtype=np.int64)
        element_dofs[:, :3] = mesh.elements
        for t, tri in enumerate(mesh.elements):
            tt = [int(v) for v in tri]
            for loc in range(3):
                key = tuple(sorted((tt[(loc + 1) % 3], tt[(loc + 2) % 3])))
                element_dofs[t, 3 + loc] = nv + edge_index[key]

    dirichlet = np.zeros(dof_count, dtype=bool)
    for a, b in mesh.boundary_edges:
        dirichlet[int(a)] = dirichlet[int(b)] = True
        if degree == 2:
            dirichlet[nv + edge_index[tuple(sorted((int(a), int(b))))]] = True

    qp, qw = triangle_rule(quad_order)
    N, dN = reference_basis(degree, qp)

    coords = mesh.element_coords()
    v0 = coords[:, 0]
    J = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=2)  # columns e1, e2
    detj = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    jinv = np.empty_like(J)
    jinv[:, 0, 0] = J[:, 1, 1] / detj
    jinv[:, 0, 1] = -J[:, 0, 1] / detj
    jinv[:, 1, 0] = -J[:, 1, 0] / detj
    jinv[:, 1, 1] = J[:, 0, 0] / detj

    return FESpace(
        mesh=mesh,
        degree=degree,
        quad_order=quad_order,
        dof_count=dof_count,
        element_dofs=element_dofs,
        dirichlet_mask=dirichlet,
        edges=edges,
        edge_index=edge_index,
        qpoints=qp,
        qweights=qw,
        basis=N,
        basis_grad=dN,
        jinv=jinv,
        detj=detj,
    )


def _scatter(space: FESpace, local: np.ndarray) -> sp.csr_matrix:
    ed = space.element_dofs
    nl = ed.shape[1]
    rows = np.repeat(ed, nl, axis=1).ravel()
    cols = np.tile(ed, (1, nl)).ravel()
    A = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.dof_count, space.dof_count)
    ).tocsr()
    A.sum_duplicates()
    return A


def assemble_stiffness(space: FESpace, kappa: float) -> sp.csr_matrix:
    """Entries kappa * (grad psi_i, grad psi_j)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    local = kernels.stiffness_local(
        np.ascontiguousarray(space.basis_grad),
        np.ascontiguousarray(space.qweights),
        np.ascontiguousarray(space.jinv),
        np.ascontiguousarray(space.detj),
        float(kappa),
    )
    return _scatter(space, np.asarray(local))


def assemble_weighted_mass(space: FESpace, weight) -> sp.csr_matrix:
    """Entries sum_q w_q weight(x_q) psi_i(x_q) psi_j(x_q).

    `weight` is either a callable on (npts, 2) coordinate arrays or a
    precomputed (ne, nq) value array.
    """
    if callable(weight):
        pts = space.quad_physical()
        vals = np.asarray(weight(pts.reshape(-1, 2)), dtype=float).reshape(
            space.mesh.num_elements, len(space.qweights)
        )
    else:
        vals = np.asarray(weight, dtype=float)
        if vals.shape != (space.mesh.num_elements, len(space.qweights)):
            raise DimensionError(
                f"weight array shape {vals.shape} != "
                f"{(space.mesh.num_elements, len(space.qweights))}"
            )
    bad = ~np.isfinite(vals)
    if bad.any():
        e, q = np.argwhere(bad)[0]
        pt = space.quad_physical()[e, q]
        raise WeightSingularError(pt, vals[e, q])
    local = kernels.weighted_mass_local(
        np.ascontiguousarray(space.basis),
        np.ascontiguousarray(space.qweights),
        np.ascontiguousarray(space.detj),
        np.ascontiguousarray(vals),
    )
    return _scatter(space, np.asarray(local))


def mass_matrix(space: FESpace) -> sp.csr_matrix:
    if "mass" not in space._cache:
        space._cache["mass"] = assemble_weighted_mass(
            space, np.ones((space.mesh.num_elements, len(space.qweights)))
        )
    return space._cache["mass"]


def unit_stiffness(space: FESpace) -> sp.csr_matrix:
    if "stiff1" not in space._cache:
        space._cache["stiff1"] = assemble_stiffness(space, 1.0)
    return space._cache["stiff1"]


def norms(space: FESpace, coeffs: np.ndarray) -> dict:
    coeffs = np.asarray(coeffs, dtype=float)
    space._check_len(coeffs)
    M = mass_matrix(space)
    K = unit_stiffness(space)
    return {
        "l2": float(np.sqrt(max(coeffs @ (M @ coeffs), 0.0))),
        "h1_semi": float(np.sqrt(max(coeffs @ (K @ coeffs), 0.0))),
    }


def interpolate(space: FESpace, f) -> np.ndarray:
    """Nodal interpolant of a callable f on (npts, 2) arrays."""
    pts = space.dof_coordinates()
    return np.asarray(f(pts), dtype=float)
