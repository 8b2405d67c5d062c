"""Problem definitions: external potential, local nonlinearity presets,
the nonlocal Coulomb (Hartree) term, density, and total energy.

The Hartree term is realized through the Poisson problem -lap W = 4*pi*alpha*rho
with W = 0 on the boundary, not by direct kernel quadrature; on a bounded
domain this differs from the volume integral by a harmonic correction and is
accepted as the model at desk scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DimensionError, LinearSolveError
from .fem import FESpace, assemble_weighted_mass, mass_matrix, unit_stiffness

log = logging.getLogger(__name__)

_N1_VARIANTS = ("none", "gpe", "tfdw", "x_alpha", "pz_lda", "vwn_lda")

# Vosko-Wilk-Nusair parameters
_VWN_A = 0.0621814
_VWN_T0 = -0.409286
_VWN_B = 13.0720
_VWN_C = 42.7198


@dataclass
class Potential:
    kind: str = "none"  # none | constant | harmonic | coulomb
    value: float = 0.0
    gammas: tuple[float, float] = (1.0, 1.0)
    charges: tuple[float, ...] = ()
    centers: tuple[tuple[float, float], ...] = ()
    eps: float = 0.1

    def __post_init__(self):
        if self.kind not in ("none", "constant", "harmonic", "coulomb"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and any(g <= 0 for g in self.gammas):
            raise ValueError("harmonic coefficients must be positive")
        if self.kind == "coulomb":
            if self.eps <= 0:
                raise ValueError("coulomb regularization eps must be positive")
            if len(self.charges) != len(self.centers):
                raise ValueError("charges and centers must have equal length")


@dataclass
class N1Preset:
    variant: str = "none"
    beta: float = 0.0          # gpe
    beta1: float = 0.0         # tfdw
    beta2: float = 0.0
    nu: float = 1.0            # tfdw exponent, rational in [1, 2]
    alpha_x: float = 2.0 / 3.0  # x_alpha
    sign: float = 1.0          # overall multiplier for x_alpha (printed sign is +)
    floor: float = 1e-12       # density floor before fractional powers / logs

    def __post_init__(self):
        if self.variant not in _N1_VARIANTS:
            raise ValueError(f"unknown N1 variant {self.variant!r}")
        if self.variant == "tfdw" and not (1.0 <= self.nu <= 2.0):
            raise ValueError("tfdw exponent nu must lie in [1, 2]")
        if self.variant == "x_alpha" and not (2.0 / 3.0 - 1e-12 <= self.alpha_x <= 1.0):
            raise ValueError("x_alpha coefficient must lie in [2/3, 1]")

    def is_trivial(self) -> bool:
        """True when the preset contributes identically zero."""
        if self.variant == "none":
            return True
        if self.variant == "gpe" and self.beta == 0.0:
            return True
        if self.variant == "tfdw" and self.beta1 == 0.0 and self.beta2 == 0.0:
            return True
        return False


@dataclass
class ProblemSpec:
    kappa: float = 1.0
    potential: Potential = field(default_factory=Potential)
    n1: N1Preset = field(default_factory=N1Preset)
    alpha: float = 0.0
    n_states: int = 1

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")

    def is_linear(self) -> bool:
        return self.alpha == 0.0 and self.n1.is_trivial()


def eval_potential(spec: ProblemSpec, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pot = spec.potential
    if pot.kind == "none":
        return np.zeros(len(pts))
    if pot.kind == "constant":
        return np.full(len(pts), pot.value)
    if pot.kind == "harmonic":
        g1, g2 = pot.gammas
        return g1 * pts[:, 0] ** 2 + g2 * pts[:, 1] ** 2
    out = np.zeros(len(pts))
    for Z, (cx, cy) in zip(pot.charges, pot.centers):
        r2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        out -= Z / np.sqrt(r2 + pot.eps**2)
    return out


def _pz_lda(rho: np.ndarray) -> np.ndarray:
    rs = (3.0 / (4.0 * np.pi * rho)) ** (1.0 / 3.0)
    exch = -((9.0 / (4.0 * np.pi**2)) ** (1.0 / 3.0)) / rs
    srs = np.sqrt(rs)
    high = -(0.1423 + 0.0633 * rs + 0.1748 * srs) / (1.0 + 1.0529 * srs + 0.3334 * rs) ** 2
    lnrs = np.log(rs)
    low = 0.0311 * lnrs - 0.0584 + 0.0013 * rs * lnrs - 0.0084 * rs
    return np.where(rs >= 1.0, high, low) + exch


def _vwn_lda(rho: np.ndarray) -> np.ndarray:
    rs = (3.0 / (4.0 * np.pi * rho)) ** (1.0 / 3.0)
    t = np.sqrt(rs)
    X = t**2 + _VWN_B * t + _VWN_C
    X0 = _VWN_T0**2 + _VWN_B * _VWN_T0 + _VWN_C
    Q = np.sqrt(4.0 * _VWN_C - _VWN_B**2)
    atan_term = np.arctan(Q / (2.0 * t + _VWN_B))
    return (_VWN_A / 2.0) * (
        np.log(t**2 / X)
        + (2.0 * _VWN_B / Q) * atan_term
        - (_VWN_B * _VWN_T0 / X0)
        * (np.log((t - _VWN_T0) ** 2 / X) + (2.0 * (_VWN_B + 2.0 * _VWN_T0) / Q) * atan_term)
    )


def eval_n1(preset: N1Preset, rho) -> np.ndarray:
    rho = np.maximum(np.asarray(rho, dtype=float), preset.floor)
    if preset.variant == "none":
        return np.zeros_like(rho)
    if preset.variant == "gpe":
        return preset.beta * rho
    if preset.variant == "tfdw":
        return preset.beta1 * rho ** (preset.nu - 1.0) - preset.beta2 * rho ** (1.0 / 3.0)
    if preset.variant == "x_alpha":
        return preset.sign * 1.5 * preset.alpha_x * (3.0 * rho / np.pi) ** (1.0 / 3.0)
    if preset.variant == "pz_lda":
        return _pz_lda(rho)
    return _vwn_lda(rho)


def n1_antiderivative(preset: N1Preset, rho) -> np.ndarray:
    """Integral of N1 from 0 to rho, closed form where available.

    pz_lda / vwn_lda fall back to Gauss quadrature on [floor, rho]; the
    caller is expected to flag this in reports (it is never an error).
    """
    rho = np.maximum(np.asarray(rho, dtype=float), preset.floor)
    if preset.variant == "none":
        return np.zeros_like(rho)
    if preset.variant == "gpe":
        return 0.5 * preset.beta * rho**2
    if preset.variant == "tfdw":
        return preset.beta1 * rho**preset.nu / preset.nu - 0.75 * preset.beta2 * rho ** (4.0 / 3.0)
    if preset.variant == "x_alpha":
        return preset.sign * (9.0 * preset.alpha_x / 8.0) * (3.0 / np.pi) ** (1.0 / 3.0) * rho ** (4.0 / 3.0)
    # numeric: 64-point Gauss-Legendre per point, vectorized
    x, w = np.polynomial.legendre.leggauss(64)
    a = preset.floor
    half = 0.5 * (rho - a)
    mid = 0.5 * (rho + a)
    pts = mid[..., None] + half[..., None] * x  # (..., 64)
    vals = eval_n1(preset, pts.ravel()).reshape(pts.shape)
    return half * (vals @ w)


def density(space: FESpace, phi) -> np.ndarray:
    """Nodal coefficients of sum_i phi_i^2 (exact at Lagrange nodes)."""
    phi = [np.asarray(p, dtype=float) for p in phi]
    if not phi:
        raise DimensionError("need at least one state")
    for p in phi:
        if len(p) != space.dof_count:
            raise DimensionError("state vector length mismatch")
    return np.sum([p * p for p in phi], axis=0)


def density_at_quad(space: FESpace, phi) -> np.ndarray:
    """sum_i phi_i^2 evaluated from the phi products at quadrature points."""
    vals = np.zeros((space.mesh.num_elements, len(space.qweights)))
    for p in phi:
        v = space.eval_at_quad(np.asarray(p, dtype=float))
        vals += v * v
    return vals


def hartree_potential(
    space: FESpace,
    rho_coeffs: np.ndarray,
    alpha: float,
    poisson_tol: float = 1e-10,
    max_iter: int = 5000,
) -> np.ndarray:
    """Coefficients of W with (grad W, grad v) = 4 pi alpha (rho, v), W=0 on bdry.

    Solved by Jacobi-preconditioned conjugate gradients.
    """
    rho_coeffs = np.asarray(rho_coeffs, dtype=float)
    space._check_len(rho_coeffs)
    W = np.zeros(space.dof_count)
    if alpha == 0.0 or not np.any(rho_coeffs):
        return W
    K = unit_stiffness(space)
    M = mass_matrix(space)
    idx = space.interior_dofs
    rhs = 4.0 * np.pi * alpha * (M @ rho_coeffs)[idx]
    A = K[np.ix_(idx, idx)].tocsr()
    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda x: x / diag)
    x, info = spla.cg(A, rhs, rtol=poisson_tol, atol=0.0, maxiter=max_iter, M=precond)
    if info != 0:
        raise LinearSolveError(f"CG for the Hartree potential failed (info={info})")
    W[idx] = x
    return W


def hartree_energy(space: FESpace, rho_quad: np.ndarray, w_coeffs: np.ndarray, alpha: float) -> float:
    """(alpha/2) * (rho, W) with rho given at quadrature points."""
    if alpha == 0.0:
        return 0.0
    wq = space.eval_at_quad(w_coeffs)
    return 0.5 * space.integrate(rho_quad * wq)


def energy(space: FESpace, state, spec: ProblemSpec, poisson_tol: float = 1e-10) -> float:
    """Total energy of a DiscreteState (kinetic + external + local + Hartree)."""
    phi = state.phi
    M = mass_matrix(space)
    gram = np.array([[pi @ (M @ pj) for pj in phi] for pi in phi])
    if np.abs(gram - np.eye(len(phi))).max() > 1e-8:
        raise ValueError("state is not orthonormal within 1e-8")
    if spec.n1.variant in ("pz_lda", "vwn_lda"):
        log.info("energy: %s antiderivative evaluated by numeric quadrature", spec.n1.variant)
    return _energy_terms(space, phi, spec, poisson_tol)["total"]


def _energy_terms(space: FESpace, phi, spec: ProblemSpec, poisson_tol: float = 1e-10) -> dict:
    K = unit_stiffness(space)
    kinetic = spec.kappa * float(sum(p @ (K @ p) for p in phi))
    rho_q = density_at_quad(space, phi)
    vq = eval_potential(spec, space.quad_physical().reshape(-1, 2)).reshape(rho_q.shape)
    external = space.integrate(vq * rho_q)
    local = space.integrate(n1_antiderivative(spec.n1, rho_q))
    hart = 0.0
    if spec.alpha != 0.0:
        rho_nodal = density(space, phi)
        w = hartree_potential(space, rho_nodal, spec.alpha, poisson_tol)
        hart = hartree_energy(space, rho_q, w, spec.alpha)
    total = kinetic + external + local + hart
    return {
        "kinetic": kinetic,
        "external": external,
        "local": local,
        "hartree": hart,
        "total": total,
    }
