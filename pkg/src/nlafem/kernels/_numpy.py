"""Vectorized numpy implementation of the element assembly kernels."""

import numpy as np


def stiffness_local(dN, w, jinv, detj, kappa):
    """Per-element local stiffness matrices.

    dN: (nq, nl, 2) reference gradients; w: (nq,); jinv: (ne, 2, 2);
    detj: (ne,). Returns (ne, nl, nl).
    """
    grads = np.einsum("qid,edk->eqik", dN, jinv)
    return kappa * np.einsum("q,e,eqik,eqjk->eij", w, detj, grads, grads)


def weighted_mass_local(N, w, detj, wvals):
    """Per-element local weighted mass matrices.

    N: (nq, nl) reference basis values; wvals: (ne, nq) weight at the
    physical quadrature points. Returns (ne, nl, nl).
    """
    return np.einsum("q,e,eq,qi,qj->eij", w, detj, wvals, N, N)
