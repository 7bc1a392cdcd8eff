"""P1 assembly and solvers for -div(A grad u) = f on structured meshes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import EllipticityError, NumericError, UsageError
from .cg import SparseSystem, conjugate_gradient
from .mesh import Mesh

# above this many unknowns 2D systems go to AMG-preconditioned CG
DIRECT_LIMIT = 250_000


@dataclass
class FemSolution:
    mesh: Mesh
    values: np.ndarray
    bc: str = "dirichlet"

    def __call__(self, points):
        return self.evaluate(points)

    def evaluate(self, points):
        """P1 interpolant at ``points`` (shape (M, dim), or (M,) in 1D)."""
        m = self.mesh
        pts = np.asarray(points, dtype=np.float64)
        if m.dim == 1:
            return np.interp(pts.reshape(-1), m.nodes[:, 0], self.values)
        pts = pts.reshape(-1, 2)
        nx, ny = m.n
        hx, hy = m.h
        s = (pts[:, 0] - m.lo[0]) / hx
        t = (pts[:, 1] - m.lo[1]) / hy
        i = np.clip(np.floor(s).astype(int), 0, nx - 1)
        j = np.clip(np.floor(t).astype(int), 0, ny - 1)
        xi, eta = s - i, t - j
        v = self.values
        k00 = j * (nx + 1) + i
        u00, u10 = v[k00], v[k00 + 1]
        u01, u11 = v[k00 + nx + 1], v[k00 + nx + 2]
        lower = xi >= eta
        return np.where(
            lower,
            u00 + xi * (u10 - u00) + eta * (u11 - u10),
            u00 + eta * (u01 - u00) + xi * (u11 - u01),
        )

    def element_gradients(self):
        g = self.mesh.gradients()
        return np.einsum("ead,ea->ed", g, self.values[self.mesh.elements])

    def l2_norm(self, ref=None):
        """L2 norm of (self - ref) with an accurate element quadrature."""
        m = self.mesh
        pts, w, lam = m.quadrature("accurate")
        uh = np.einsum("qa,ea->eq", lam, self.values[m.elements])
        if ref is not None:
            uh = uh - np.asarray(ref(pts.reshape(-1, m.dim))).reshape(uh.shape)
        return float(np.sqrt(np.sum(m.measures() * (uh**2 @ w))))

    def to_csv(self, path_or_buf):
        cols = ["x1", "x2"][: self.mesh.dim] + ["value"]
        data = np.column_stack([self.mesh.nodes, self.values])
        np.savetxt(path_or_buf, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")

    def save(self, path):
        m = self.mesh
        np.savez(
            path,
            dim=m.dim,
            lo=np.array(m.lo),
            hi=np.array(m.hi),
            n=np.array(m.n),
            values=self.values,
            bc=np.array(self.bc),
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as d:
            lo, hi, n = tuple(d["lo"]), tuple(d["hi"]), tuple(int(k) for k in d["n"])
            mesh = Mesh.interval(lo[0], hi[0], n[0]) if int(d["dim"]) == 1 else Mesh.box(lo, hi, n)
            return cls(mesh, d["values"].copy(), str(d["bc"]))


def element_coefficient(mesh, coef):
    """Quadrature-averaged coefficient per element, shape (E, dim).

    ``coef`` maps points (M, dim) to scalars (M,) or diagonal entries
    (M, dim). Raises :class:`EllipticityError` if any sample is <= 0.
    """
    pts, w, _ = mesh.quadrature("assembly")
    e, q, d = pts.shape
    a = np.asarray(coef(pts.reshape(-1, d)), dtype=np.float64)
    a = a.reshape(e, q, -1)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        bad = np.argwhere(~(a > 0))[0]
        raise EllipticityError(
            f"coefficient not positive at quadrature point {pts[bad[0], bad[1]].tolist()}"
        )
    a = np.einsum("eqk,q->ek", a, w)
    if a.shape[1] == 1 and d > 1:
        a = np.repeat(a, d, axis=1)
    return a


def stiffness(mesh, a_elem, dofmap=None, n_dofs=None):
    """Global stiffness matrix (CSR) from per-element diagonal coefficients."""
    g = mesh.gradients()
    meas = mesh.measures()
    ke = np.einsum("e,ed,ead,ebd->eab", meas, a_elem, g, g)
    el = mesh.elements if dofmap is None else dofmap[mesh.elements]
    n = mesh.n_nodes if n_dofs is None else n_dofs
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))


def load_vector(mesh, f):
    if f is None:
        return np.zeros(mesh.n_nodes)
    pts, w, lam = mesh.quadrature("assembly")
    fq = np.asarray(f(pts.reshape(-1, mesh.dim)), dtype=np.float64).reshape(pts.shape[:2])
    fe = mesh.measures()[:, None] * np.einsum("eq,q,qa->ea", fq, w, lam)
    return np.bincount(mesh.elements.ravel(), fe.ravel(), minlength=mesh.n_nodes)


def flux_load(mesh, a_elem, direction, dofmap=None, n_dofs=None):
    """Load vector of -div(A e_i): entries -int A e_i . grad(phi_k)."""
    g = mesh.gradients()
    fe = -(mesh.measures() * a_elem[:, direction])[:, None] * g[:, :, direction]
    el = mesh.elements if dofmap is None else dofmap[mesh.elements]
    n = mesh.n_nodes if n_dofs is None else n_dofs
    return np.bincount(el.ravel(), fe.ravel(), minlength=n)


def solve_spd(K, F, dim=2, tol=1e-10):
    """Solve a sparse SPD system; banded direct in 1D, sparse direct or
    AMG-preconditioned CG in 2D. Verifies the residual."""
    n = K.shape[0]
    if n == 0:
        return np.zeros(0)
    if dim == 1:
        ab = np.zeros((2, n))
        ab[1] = K.diagonal()
        ab[0, 1:] = K.diagonal(1)
        x = sla.solveh_banded(ab, F)
    elif n <= DIRECT_LIMIT:
        x = spla.spsolve(K.tocsc(), F)
    else:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(K.tocsr(), symmetry="symmetric")
        prec = ml.aspreconditioner(cycle="V")
        x = conjugate_gradient(SparseSystem(K, F), tol=tol, precond=lambda r: prec @ r, max_iters=2000)
    # normwise backward error; plain relative residuals of exact solves grow
    # with the condition number on fine 1D meshes
    scale = spla.norm(K, np.inf) * np.linalg.norm(x, np.inf) + np.linalg.norm(F, np.inf)
    res = np.linalg.norm(K @ x - F, np.inf) / (scale if scale > 0 else 1.0)
    if not np.all(np.isfinite(x)) or res > max(1e3 * tol, 1e-8):
        raise NumericError(f"linear solve failed (backward error {res:.3e})", residual=res)
    return x


def _check_resolution(mesh, eps):
    if eps is None:
        return
    per = min(eps / hk for hk in mesh.h)
    if per < 8:
        warnings.warn(
            f"mesh resolves only {per:.1f} elements per period eps={eps:g}", RuntimeWarning, stacklevel=3
        )


def solve_dirichlet(mesh, A, f, g=None, eps=None):
    """P1 Galerkin solution of -div(A grad u) = f, u = g on the boundary.

    ``A`` is scalar or diagonal-tensor valued; ``g`` defaults to zero.
    """
    _check_resolution(mesh, eps)
    a = element_coefficient(mesh, A)
    K = stiffness(mesh, a)
    F = load_vector(mesh, f)
    bnd = mesh.boundary_mask()
    u = np.zeros(mesh.n_nodes)
    if g is not None:
        u[bnd] = np.asarray(g(mesh.nodes[bnd]), dtype=np.float64).reshape(-1)
    inner = ~bnd
    Kii = K[inner][:, inner]
    rhs = F[inner] - K[inner][:, bnd] @ u[bnd]
    u[inner] = solve_spd(Kii, rhs, mesh.dim)
    return FemSolution(mesh, u, "dirichlet")


def solve_cell_problem(cell_mesh, A_frozen, direction, tol=1e-12, a_elem=None):
    """Periodic corrector chi^i on the cell: div(A grad chi) = -div(A e^i).

    The constant kernel is removed by working in the zero-mean subspace.
    Returns the corrector on all mesh nodes (periodic copies included).
    """
    if direction >= cell_mesh.dim:
        raise UsageError("direction exceeds the cell dimension")
    a = element_coefficient(cell_mesh, A_frozen) if a_elem is None else a_elem
    dmap, nd = cell_mesh.periodic_map()
    K = stiffness(cell_mesh, a, dmap, nd)
    b = flux_load(cell_mesh, a, direction, dmap, nd)
    chi = conjugate_gradient(SparseSystem(K, b), tol=tol, zero_mean=True, max_iters=20 * nd)
    return FemSolution(cell_mesh, chi[dmap], "periodic")

