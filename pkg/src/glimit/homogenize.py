"""Reference G-limits: closed forms, periodic cell problems, Monte Carlo
averaging for ergodic media and patch upscaling for non-periodic 2D media."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, EllipticityError
from .fem import Mesh, element_coefficient, flux_load, solve_cell_problem, stiffness

STRUCTURES = ("locally_periodic_1d", "weak_limit_known_1d", "nonperiodic_2d", "ergodic_1d")
PROVENANCES = ("analytic", "cell_problem", "monte_carlo", "patch_upscaling", "learned")


@dataclass
class CoefficientField:
    """Multiscale coefficient A^eps(x) with its ellipticity window.

    ``evaluator`` maps points of shape (M, dim) to values (M,). ``separated``
    is the two-scale form A(x, y), Y-periodic in y, when one exists.
    """

    evaluator: Callable
    eps: float
    alpha: float
    beta: float
    structure: str
    dim: int = 1
    separated: Callable | None = None
    domain: tuple = ((0.0,), (1.0,))

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ConfigurationError(f"unknown structure tag {self.structure!r}")
        if not 0 < self.alpha <= self.beta:
            raise ConfigurationError("need 0 < alpha <= beta")

    def __call__(self, points):
        return self.evaluator(np.asarray(points, dtype=np.float64).reshape(-1, self.dim))

    def probe(self, n=1000, seed=0):
        """Values on a probe set: a uniform grid in 1D, random points in 2D."""
        lo, hi = np.asarray(self.domain[0]), np.asarray(self.domain[1])
        if self.dim == 1:
            pts = np.linspace(lo[0], hi[0], n)[:, None]
        else:
            pts = lo + (hi - lo) * np.random.default_rng(seed).random((n, self.dim))
        return self(pts)

    def check_bounds(self, n=1000):
        v = self.probe(n)
        lo, hi = float(v.min()), float(v.max())
        if lo < self.alpha - 1e-12 or hi > self.beta + 1e-12:
            raise EllipticityError(
                f"coefficient range [{lo:.6g}, {hi:.6g}] leaves [{self.alpha}, {self.beta}]"
            )
        return lo, hi


@dataclass
class GLimitField:
    """G-limit sampled on a grid of one coordinate (x in 1D, x2 in 2D).

    ``values`` has shape (M,) for a scalar limit or (M, 2) for the diagonal
    of a 2D limit. ``formula``, when set, is evaluated exactly instead of
    interpolating. ``axis`` names the input column the field depends on.
    """

    grid: np.ndarray
    values: np.ndarray
    provenance: str
    stderr: np.ndarray | None = None
    formula: Callable | None = None
    axis: int = 0
    tensor: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"unknown provenance {self.provenance!r}")
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self._spline = None

    def __call__(self, points):
        """Evaluate at points (M, dim) or coordinates (M,)."""
        p = np.asarray(points, dtype=np.float64)
        t = p[:, self.axis] if p.ndim == 2 else p
        if self.formula is not None:
            return self.formula(t)
        if self._spline is None:
            self._spline = CubicSpline(self.grid, self.values, axis=0)
        return self._spline(t)

    def within(self, alpha, beta, tol=1e-12):
        return bool(np.all(self.values >= alpha - tol) and np.all(self.values <= beta + tol))

    def to_csv(self, path):
        v = self.values.reshape(len(self.grid), -1)
        names = ["A"] if v.shape[1] == 1 else [f"A{i + 1}{i + 1}" for i in range(v.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + names + ["provenance", "stderr"])
            for k, x in enumerate(self.grid):
                se = "" if self.stderr is None else repr(float(np.ravel(self.stderr[k])[0]))
                w.writerow([repr(float(x))] + [repr(float(a)) for a in v[k]] + [self.provenance, se])

    @classmethod
    def from_csv(cls, path, axis=0):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        ncol = len(head) - 3
        grid = np.array([float(r[0]) for r in body])
        vals = np.array([[float(a) for a in r[1 : 1 + ncol]] for r in body])
        vals = vals[:, 0] if ncol == 1 else vals
        se = [r[-1] for r in body]
        stderr = np.array([float(s) for s in se]) if all(se) else None
        return cls(grid, vals, body[0][-2] if body else "analytic", stderr, axis=axis)


def glimit_harmonic_mean_1d(A, x_grid, n_quad=10_000):
    """A*(x) = 1 / int_0^1 dy / A(x, y) by the periodic midpoint rule.

    ``A(x, y)`` takes broadcastable arrays.
    """
    if n_quad < 10_000:
        raise ConfigurationError("use at least 10^4 quadrature points")
    x = np.asarray(x_grid, dtype=np.float64)
    y = (np.arange(n_quad) + 0.5) / n_quad
    out = np.empty_like(x)
    for s in range(0, len(x), 256):
        vals = A(x[s : s + 256, None], y[None, :])
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise EllipticityError("non-positive coefficient in the cell average")
        out[s : s + 256] = 1.0 / np.mean(1.0 / vals, axis=1)
    return GLimitField(x, out, "cell_problem", meta={"method": "harmonic_mean"})


def _cell_tensor(mesh, a_elem, correctors):
    """A*_ij = |Y|^-1 int_Y A (delta_ij + d chi^j / dy_i) from the correctors."""
    d = mesh.dim
    meas = mesh.measures()
    vol = meas.sum()
    out = np.empty((d, d))
    for j in range(d):
        grad = correctors[j].element_gradients()
        for i in range(d):
            integrand = a_elem[:, i] * ((i == j) + grad[:, i])
            out[i, j] = np.sum(meas * integrand) / vol
    return out


def cell_glimit(A_frozen, resolution, dim=2, cell=None):
    """Homogenized tensor of one Y-periodic coefficient ``A_frozen(y)``.

    ``cell`` gives the periodic cell's side lengths (unit cube by default).
    """
    cell = (1.0,) * dim if cell is None else tuple(cell)
    if dim == 1:
        mesh = Mesh.interval(0.0, cell[0], resolution)
    else:
        mesh = Mesh.box((0.0, 0.0), cell, resolution)
    a = element_coefficient(mesh, A_frozen)
    chis = [solve_cell_problem(mesh, A_frozen, i, a_elem=a) for i in range(dim)]
    return _cell_tensor(mesh, a, chis)


def glimit_cell(A, x_slices, cell_resolution, dim=2, cell=None, axis=0):
    """G-limit from periodic cell problems at frozen slow variables.

    ``A(x, y)`` gets the frozen slow coordinate (scalar) and fast points
    y of shape (M, dim). Returns the diagonal entries; the full tensors
    are kept in ``.tensor``.
    """
    xs = np.asarray(x_slices, dtype=np.float64)
    tensors = np.array(
        [cell_glimit(lambda y, x=x: A(x, y), cell_resolution, dim, cell) for x in xs]
    )
    for t in tensors:
        if np.any(np.linalg.eigvalsh(0.5 * (t + t.T)) <= 0):
            raise EllipticityError("cell tensor is not positive definite")
    diag = tensors[:, 0, 0] if dim == 1 else np.stack([tensors[:, i, i] for i in range(dim)], axis=1)
    return GLimitField(xs, diag, "cell_problem", tensor=tensors, axis=axis)


def glimit_cell_2d(A, x_slices, cell_resolution, cell=None, axis=0):
    return glimit_cell(A, x_slices, cell_resolution, dim=2, cell=cell, axis=axis)


def _omega_samples(n, seed, method, replicates):
    """Replicate sets of points in [0,1]^2; stratified sets hold one jittered
    point per cell of an m x m grid."""
    rng = np.random.default_rng(seed)
    if method == "iid":
        return rng.random((replicates, -(-n // replicates), 2))
    if method != "stratified":
        raise ConfigurationError(f"unknown sampling method {method!r}")
    m = int(np.ceil(np.sqrt(n / replicates)))
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    cells = np.stack([i.ravel(), j.ravel()], axis=1)
    return (cells[None] + rng.random((replicates, m * m, 2))) / m


def glimit_ergodic_mc(A, x_grid, n_samples=200_000, seed=0, chunk=16, method="stratified", replicates=10):
    """A*(x) = 1 / E[1 / A(x, omega)], omega ~ U[0,1]^2.

    The expectation is estimated from ``replicates`` independent sample
    sets (jittered-stratified by default, or plain iid), shared by all x.
    The spread of the replicate means gives the standard errors, carried
    to A* by the delta method and returned in ``.stderr``.
    """
    if n_samples < 10_000:
        raise ConfigurationError("use at least 10^4 Monte Carlo samples")
    if replicates < 2:
        raise ConfigurationError("need at least two replicates for a standard error")
    x = np.asarray(x_grid, dtype=np.float64)
    omega = _omega_samples(n_samples, seed, method, replicates)
    w1, w2 = omega[..., 0].ravel(), omega[..., 1].ravel()
    est = np.empty_like(x)
    se = np.empty_like(x)
    for s in range(0, len(x), chunk):
        vals = A(x[s : s + chunk, None], w1[None, :], w2[None, :])
        if np.any(vals <= 0):
            raise EllipticityError("non-positive coefficient sample")
        reps = (1.0 / vals).reshape(len(vals), replicates, -1).mean(axis=2)
        m = reps.mean(axis=1)
        est[s : s + chunk] = 1.0 / m
        se[s : s + chunk] = reps.std(axis=1, ddof=1) / np.sqrt(replicates) / m**2
    meta = {"n_samples": int(omega.shape[0] * omega.shape[1]), "seed": seed, "method": method,
            "replicates": replicates}
    return GLimitField(x, est, "monte_carlo", stderr=se, meta=meta)


def patch_glimit(A_eps, center, delta, resolution):
    """Diagonal effective coefficient of one square patch.

    Solves -div(A grad v) = 0 with v = x_i on the patch boundary and returns
    the averaged fluxes |P|^-1 int A dv/dx_i for i = 1, 2.
    """
    c = np.asarray(center, dtype=np.float64)
    mesh = Mesh.box(c - delta / 2, c + delta / 2, resolution)
    a = element_coefficient(mesh, A_eps)
    K = stiffness(mesh, a)
    inner = ~mesh.boundary_mask()
    lu = spla.splu(K[inner][:, inner].tocsc())
    g = mesh.gradients()
    meas = mesh.measures()
    out = np.empty(2)
    for i in range(2):
        # v = x_i + w, w = 0 on the boundary
        b = flux_load(mesh, a, i)
        w = np.zeros(mesh.n_nodes)
        w[inner] = lu.solve(b[inner])
        dw = np.einsum("ea,ea->e", g[:, :, i], w[mesh.elements])
        out[i] = np.sum(meas * a[:, i] * (1.0 + dw)) / meas.sum()
    return out


def glimit_patch_upscale_2d(
    A_eps, x2_slices, delta, resolution, eps, x1_center=1.5, domain=((1.0, 1.0), (2.0, 2.0))
):
    """Diagonal G-limit as a function of x2 by upscaling delta-patches.

    Patch centres are clamped so patches stay inside the domain; the
    cubic-spline evaluator extrapolates the last half patch.
    """
    if delta < 8 * eps:
        raise ConfigurationError(f"patch size {delta:g} below 8 eps = {8 * eps:g}")
    if delta > 0.25:
        raise ConfigurationError("patch size must not exceed 1/4")
    lo, hi = domain
    x1c = float(np.clip(x1_center, lo[0] + delta / 2, hi[0] - delta / 2))
    xs = np.asarray(x2_slices, dtype=np.float64)
    centres = np.clip(xs, lo[1] + delta / 2, hi[1] - delta / 2)
    centres = np.unique(centres)
    vals = np.array([patch_glimit(A_eps, (x1c, c2), delta, resolution) for c2 in centres])
    return GLimitField(
        centres,
        vals,
        "patch_upscaling",
        axis=1,
        meta={"delta": delta, "resolution": resolution, "eps": eps, "x1_center": x1c},
    )


def weak_limit_formula(x):
    s = 1.0 + np.sin(x)
    return np.expm1(s) / s


def weak_limit_glimit_1d(x_grid=None):
    """Closed-form limit (e^{1+sin x} - 1) / (1 + sin x)."""
    x = np.linspace(0.0, 1.0, 1001) if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    return GLimitField(x, weak_limit_formula(x), "analytic", formula=weak_limit_formula)
