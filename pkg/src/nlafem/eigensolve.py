"""Lowest-N generalized symmetric eigenpairs of sparse pencils (A, B).

Blocked LOBPCG with a Jacobi preconditioner; dense fallback for small
problems doubles as an exact oracle. Deterministic given the recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigenConvergenceError, OperatorError, RankError

DENSE_THRESHOLD = 200
DEFAULT_SEED = 20240817


@dataclass
class EigenResult:
    eigenvalues: np.ndarray     # ascending, (n,)
    eigenvectors: np.ndarray    # (dim, n), B-orthonormal
    iterations: int
    residual_norms: np.ndarray
    seed: int | None = None


def b_orthonormalize(X, B) -> np.ndarray:
    """B-orthonormalize the columns of X by Gram-Schmidt with one extra pass."""
    X = np.array(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim == 2 and X.shape[0] < X.shape[1]:
        pass  # caller's responsibility; columns are the vectors
    scale = max(np.abs(X).max(), 1.0)
    Q = np.empty_like(X)
    for _pass in range(2):
        src = X if _pass == 0 else Q
        for j in range(X.shape[1]):
            v = src[:, j].copy()
            for i in range(j):
                v -= (Q[:, i] @ (B @ v)) * Q[:, i]
            nrm = np.sqrt(max(v @ (B @ v), 0.0))
            if nrm < 1e-12 * scale:
                raise RankError(f"column {j} is numerically dependent (pivot {nrm:.3e})")
            Q[:, j] = v / nrm
    return Q


def _residuals(A, B, vals, vecs):
    out = np.empty(len(vals))
    for i, lam in enumerate(vals):
        x = vecs[:, i]
        r = A @ x - lam * (B @ x)
        xb = np.sqrt(max(x @ (B @ x), 1e-300))
        out[i] = np.linalg.norm(r) / xb
    return out


def solve_lowest(
    A,
    B,
    n: int,
    tol: float = 1e-9,
    max_iter: int = 2000,
    initial: np.ndarray | None = None,
    seed: int = DEFAULT_SEED,
) -> EigenResult:
    """Return the n algebraically smallest eigenpairs of A x = lambda B x."""
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    dim = A.shape[0]
    if n > dim:
        raise ValueError(f"requested {n} pairs from dimension {dim}")
    if abs(A - A.T).max() > 1e-10 * max(abs(A).max(), 1e-300):
        raise OperatorError("A is not symmetric")

    rng = np.random.default_rng(seed)
    probe = rng.standard_normal(dim)
    if probe @ (B @ probe) <= 0:
        raise OperatorError("B is not positive definite (negative v^T B v)")

    block = min(dim, n + min(n, 5))
    if dim <= max(DENSE_THRESHOLD, 5 * block):
        vals, vecs = la.eigh(A.toarray(), B.toarray())
        vals, vecs = vals[:n], vecs[:, :n]
        return EigenResult(vals, vecs, 0, _residuals(A, B, vals, vecs), seed)

    if initial is not None:
        X = np.array(initial, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] < block:
            X = np.hstack([X, rng.standard_normal((dim, block - X.shape[1]))])
    else:
        X = rng.standard_normal((dim, block))
    X = b_orthonormalize(X, B)

    diag = A.diagonal()
    diag = np.where(np.abs(diag) > 1e-300, diag, 1.0)
    precond = sp.diags(1.0 / diag).tocsr()

    import warnings

    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore")  # residuals are re-checked below
        vals, vecs, hist = spla.lobpcg(
            A,
            X,
            B=B,
            M=precond,
            tol=0.5 * tol,
            maxiter=max_iter,
            largest=False,
            retResidualNormsHistory=True,
        )
    iterations = len(hist)
    order = np.argsort(vals)
    vals, vecs = vals[order][:n], vecs[:, order][:, :n]
    vecs = b_orthonormalize(vecs, B)
    vals = np.array([x @ (A @ x) for x in vecs.T])
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = _residuals(A, B, vals, vecs)
    result = EigenResult(vals, vecs, iterations, res, seed)
    if np.any(res > tol):
        raise EigenConvergenceError(
            f"LOBPCG residuals {res.max():.3e} exceed tol {tol:.1e}", result=result
        )
    return result
