"""Structured meshes of intervals and rectangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Mesh:
    """Uniform P1 mesh of a box.

    2D nodes are numbered row by row (x1 fastest). Every grid cell is split
    along its (0,0)-(1,1) diagonal into two counter-clockwise triangles.
    """

    dim: int
    lo: tuple
    hi: tuple
    n: tuple
    nodes: np.ndarray
    elements: np.ndarray

    @classmethod
    def interval(cls, a, b, n):
        nodes = np.linspace(a, b, n + 1)[:, None]
        el = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        return cls(1, (float(a),), (float(b),), (int(n),), nodes, el)

    @classmethod
    def box(cls, lo, hi, n):
        nx, ny = (n, n) if np.isscalar(n) else n
        x = np.linspace(lo[0], hi[0], nx + 1)
        y = np.linspace(lo[1], hi[1], ny + 1)
        X, Y = np.meshgrid(x, y)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        v00 = (j * (nx + 1) + i).ravel()
        v10 = v00 + 1
        v01 = v00 + nx + 1
        v11 = v01 + 1
        el = np.concatenate(
            [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)]
        )
        return cls(2, tuple(map(float, lo)), tuple(map(float, hi)), (int(nx), int(ny)), nodes, el)

    @property
    def h(self):
        return tuple((b - a) / n for a, b, n in zip(self.lo, self.hi, self.n))

    @property
    def n_nodes(self):
        return len(self.nodes)

    def measures(self):
        if self.dim == 1:
            x = self.nodes[:, 0]
            return x[self.elements[:, 1]] - x[self.elements[:, 0]]
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_mask(self):
        tol = 1e-12 * max(abs(b - a) for a, b in zip(self.lo, self.hi))
        m = np.zeros(self.n_nodes, dtype=bool)
        for k in range(self.dim):
            m |= np.abs(self.nodes[:, k] - self.lo[k]) < tol
            m |= np.abs(self.nodes[:, k] - self.hi[k]) < tol
        return m

    def periodic_map(self):
        """Node -> periodic dof index (opposite faces identified)."""
        if self.dim == 1:
            n = self.n[0]
            idx = np.arange(n + 1)
            idx[n] = 0
            return idx, n
        nx, ny = self.n
        i = np.arange(self.n_nodes) % (nx + 1)
        j = np.arange(self.n_nodes) // (nx + 1)
        return (j % ny) * nx + (i % nx), nx * ny

    def gradients(self):
        """Constant basis gradients per element, shape (E, dim+1, dim)."""
        if self.dim == 1:
            h = self.measures()
            g = np.empty((len(h), 2, 1))
            g[:, 0, 0] = -1.0 / h
            g[:, 1, 0] = 1.0 / h
            return g
        p = self.nodes[self.elements]
        area2 = 2.0 * self.measures()
        g = np.empty((len(p), 3, 2))
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            g[:, a, 0] = (p[:, b, 1] - p[:, c, 1]) / area2
            g[:, a, 1] = (p[:, c, 0] - p[:, b, 0]) / area2
        return g

    def quadrature(self, rule="assembly"):
        """Quadrature points (E, q, dim), weights (q,) as fractions of the
        element measure, and basis values (q, dim+1) at those points.

        ``assembly``: midpoint (1D) or edge midpoints (2D).
        ``accurate``: 3-point Gauss (1D) or 6-point degree-4 rule (2D).
        """
        if self.dim == 1:
            if rule == "assembly":
                lam = np.array([[0.5, 0.5]])
                w = np.array([1.0])
            else:
                r = np.sqrt(3.0 / 5.0)
                t = 0.5 * (1 + np.array([-r, 0.0, r]))
                lam = np.column_stack([1 - t, t])
                w = np.array([5.0, 8.0, 5.0]) / 18.0
        else:
            if rule == "assembly":
                lam = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
                w = np.full(3, 1.0 / 3.0)
            else:
                a, b = 0.445948490915965, 0.091576213509771
                wa, wb = 0.223381589678011, 0.109951743655322
                lam = np.array(
                    [
                        [a, a, 1 - 2 * a],
                        [a, 1 - 2 * a, a],
                        [1 - 2 * a, a, a],
                        [b, b, 1 - 2 * b],
                        [b, 1 - 2 * b, b],
                        [1 - 2 * b, b, b],
                    ]
                )
                w = np.array([wa, wa, wa, wb, wb, wb])
        p = self.nodes[self.elements]
        pts = np.einsum("qa,ead->eqd", lam, p)
        return pts, w, lam
