"""Relative L2 errors on evaluation grids and the per-run error report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import UsageError


def trapezoid_weights(coords):
    """Composite trapezoidal weights for sorted 1D nodes."""
    x = np.asarray(coords, dtype=np.float64)
    if len(x) < 2:
        raise UsageError("need at least two grid nodes")
    dx = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def grid_weights(grid):
    """Trapezoidal weights on a 1D grid (M, 1) or tensor grid (M, 2).

    2D grids must list every (x1, x2) pair of the two axes, in any order.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[1] == 1:
        order = np.argsort(g[:, 0], kind="stable")
        w = np.empty(len(g))
        w[order] = trapezoid_weights(g[order, 0])
        return w
    ax = [np.unique(g[:, k]) for k in range(g.shape[1])]
    if len(g) != np.prod([len(a) for a in ax]):
        raise UsageError("2D evaluation grid is not a tensor grid")
    ws = [trapezoid_weights(a) for a in ax]
    idx = [np.searchsorted(a, g[:, k]) for k, a in enumerate(ax)]
    return ws[0][idx[0]] * ws[1][idx[1]]


def _values(f, grid):
    v = f(grid) if callable(f) else f
    v = np.asarray(v, dtype=np.float64)
    return v.reshape(len(grid), -1)


def relative_l2(f_hat, f_ref, grid):
    """||f_hat - f_ref|| / ||f_ref|| with trapezoidal weights.

    Fields are callables on the grid points or precomputed arrays; several
    columns (the diagonal entries of a tensor) are aggregated in the
    Frobenius sense.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    w = grid_weights(g)
    a, b = _values(f_hat, g), _values(f_ref, g)
    if a.shape != b.shape:
        raise UsageError(f"field shapes differ: {a.shape} vs {b.shape}")
    den = float(np.sum(w[:, None] * b * b))
    if not den > 0:
        raise UsageError("reference has zero norm on the grid")
    num = float(np.sum(w[:, None] * (a - b) ** 2))
    return float(np.sqrt(num / den))


REPORT_COLUMNS = (
    "benchmark",
    "eps",
    "noise",
    "n_data",
    "n_res",
    "seed",
    "e_A",
    "e_u0",
    "grid_h",
    "grid_points",
    "grid_override",
    "ref_A",
    "ref_u0",
    "config_hash",
)


@dataclass
class ErrorReport:
    """Relative errors of one run together with where they were measured."""

    e_A: float
    e_u0: float
    grid: dict
    references: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.e_A >= 0 and self.e_u0 >= 0):
            raise UsageError("errors must be non-negative")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def save_json(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))

    def csv_row(self):
        m = self.meta
        return {
            "benchmark": m.get("benchmark", ""),
            "eps": m.get("eps", ""),
            "noise": m.get("noise", ""),
            "n_data": m.get("n_data", ""),
            "n_res": m.get("n_res", ""),
            "seed": m.get("seed", ""),
            "e_A": repr(self.e_A),
            "e_u0": repr(self.e_u0),
            "grid_h": self.grid.get("h", ""),
            "grid_points": self.grid.get("points", ""),
            "grid_override": self.grid.get("override", False),
            "ref_A": self.references.get("A", ""),
            "ref_u0": self.references.get("u0", ""),
            "config_hash": m.get("config_hash", ""),
        }

    def to_csv(self, path=None, header=True):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        if header:
            w.writeheader()
        w.writerow(self.csv_row())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()
