"""Preconditioned conjugate gradients for sparse SPD / SPSD systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import NumericError


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    def is_symmetric(self, rtol=1e-12):
        d = abs(self.matrix - self.matrix.T)
        return d.max() <= rtol * abs(self.matrix).max() if d.nnz else True


def conjugate_gradient(
    system, tol=1e-10, max_iters=None, precond=None, x0=None, zero_mean=False, return_info=False
):
    """Solve ``A x = b`` by preconditioned CG.

    ``precond`` is ``None`` (Jacobi), ``"none"``, or a callable r -> M^{-1} r.
    With ``zero_mean`` the iteration is confined to the complement of the
    constants, which solves a consistent singular system whose kernel is
    the constants; the returned solution has zero mean. ``return_info``
    adds the iteration count to the result.

    Raises :class:`NumericError` (with the final relative residual) when the
    iteration cap is reached.
    """
    A, b = system.matrix, np.asarray(system.rhs, dtype=np.float64)
    n = len(b)
    if max_iters is None:
        max_iters = 10 * n
    if precond is None:
        d = A.diagonal()
        inv = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 1.0)
        M = lambda r: inv * r
    elif precond == "none":
        M = lambda r: r
    else:
        M = precond

    proj = (lambda v: v - v.mean()) if zero_mean else (lambda v: v)
    b = proj(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else proj(np.array(x0, dtype=np.float64))
    if bnorm == 0.0:
        return (x, 0) if return_info else x
    r = b - A @ x if x0 is not None else b.copy()
    r = proj(r)
    z = proj(M(r))
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= max_iters:
            raise NumericError(
                f"CG did not converge in {max_iters} iterations (relative residual {res:.3e})",
                residual=res,
            )
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NumericError("matrix is not positive definite on the search space", residual=res)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if zero_mean:
            r = proj(r)
        res = np.linalg.norm(r) / bnorm
        z = proj(M(r))
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    x = proj(x)
    return (x, it) if return_info else x
