"""Training sets sampled from multiscale solutions: data points T_d and
residual (collocation) points T_r."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

HEADER = "# glimit-dataset v1"


@dataclass
class SampleSet:
    points: np.ndarray
    values: np.ndarray
    noise_level: float = 0.0
    seed: int | None = None
    provenance: dict = field(default_factory=dict)
    clean: np.ndarray | None = None

    def __len__(self):
        return len(self.values)

    @property
    def dim(self):
        return self.points.shape[1]

    def subset(self, idx):
        return SampleSet(
            self.points[idx],
            self.values[idx],
            self.noise_level,
            self.seed,
            self.provenance,
            None if self.clean is None else self.clean[idx],
        )

    def to_csv(self, path):
        p = self.provenance
        meta = [
            f"eps={p.get('eps', '')}",
            f"h={p.get('h', '')}",
            f"noise={self.noise_level!r}",
            f"seed={'' if self.seed is None else self.seed}",
        ]
        cols = ["x", "u"] if self.dim == 1 else ["x1", "x2", "u"]
        with open(path, "w") as fh:
            fh.write(HEADER + "; " + "; ".join(meta) + "\n")
            fh.write(",".join(cols) + "\n")
            for x, u in zip(self.points, self.values):
                fh.write(",".join(repr(float(v)) for v in (*x, u)) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            first = fh.readline().rstrip("\n")
            if not first.startswith(HEADER):
                raise UsageError(f"{path}: not a glimit dataset")
            meta = dict(
                item.strip().split("=", 1) for item in first[len(HEADER) :].split(";") if "=" in item
            )
            cols = fh.readline().strip().split(",")
            rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
        arr = np.array(rows, dtype=np.float64).reshape(-1, len(cols))
        prov = {}
        for k in ("eps", "h"):
            if meta.get(k):
                prov[k] = float(meta[k])
        seed = int(meta["seed"]) if meta.get("seed") else None
        return cls(arr[:, :-1].copy(), arr[:, -1].copy(), float(meta.get("noise", 0.0)), seed, prov)


@dataclass
class CollocationSet:
    points: np.ndarray
    mode: str = "grid"
    seed: int | None = None

    def __len__(self):
        return len(self.points)


def _interior_grid(lo, hi, m):
    k = np.arange(1, m + 1) / (m + 1)
    return lo + (hi - lo) * k


def _box_grid(lo, hi, n, dim):
    if dim == 1:
        return _interior_grid(lo[0], hi[0], n)[:, None]
    m = math.isqrt(n)
    if m * m != n:
        raise UsageError("2D grid sampling needs a perfect square count")
    xs = _interior_grid(lo[0], hi[0], m)
    ys = _interior_grid(lo[1], hi[1], m)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def sample_equispaced(solution, n, provenance=None):
    """Sample ``n`` values on a uniform interior grid by P1 interpolation."""
    mesh = solution.mesh
    if n < (2 if mesh.dim == 1 else 1):
        raise UsageError("need at least two samples")
    per_axis = n if mesh.dim == 1 else math.isqrt(n)
    if per_axis > min(mesh.n):
        warnings.warn("more samples per axis than mesh elements", RuntimeWarning, stacklevel=2)
    pts = _box_grid(mesh.lo, mesh.hi, n, mesh.dim)
    vals = np.asarray(solution.evaluate(pts), dtype=np.float64)
    prov = {"h": min(mesh.h)}
    prov.update(provenance or {})
    return SampleSet(pts, vals, 0.0, None, prov, vals.copy())


def add_noise(samples, level, seed):
    """Add iid N(0, (level * rms)^2) noise, rms taken over the clean values."""
    if not 0.0 <= level <= 0.2:
        raise UsageError("noise level must lie in [0, 0.2]")
    clean = samples.values if samples.clean is None else samples.clean
    if level == 0.0:
        return SampleSet(samples.points, clean.copy(), 0.0, seed, dict(samples.provenance), clean.copy())
    rms = float(np.sqrt(np.mean(clean**2)))
    xi = np.random.default_rng(seed).standard_normal(len(clean))
    noisy = clean + level * rms * xi
    return SampleSet(samples.points, noisy, float(level), seed, dict(samples.provenance), clean.copy())


def make_collocation(domain, n, mode="grid", seed=0):
    """Residual points strictly inside ``domain = (lo, hi)``."""
    if n < 1:
        raise UsageError("need at least one collocation point")
    lo, hi = (np.asarray(d, dtype=np.float64) for d in domain)
    dim = len(lo)
    if mode == "grid":
        pts = _box_grid(lo, hi, n, dim)
    elif mode == "uniform_random":
        rng = np.random.default_rng(seed)
        pts = np.empty((0, dim))
        while len(pts) < n:
            cand = lo + (hi - lo) * rng.random((n, dim))
            inside = np.all((cand > lo) & (cand < hi), axis=1)
            pts = np.concatenate([pts, cand[inside]])[:n]
    else:
        raise UsageError(f"unknown collocation mode {mode!r}")
    return CollocationSet(pts, mode, seed if mode != "grid" else None)


def write_manifest(path, dataset_file, fem_run, config_hash, extra=None):
    doc = {"dataset": str(dataset_file), "fem_run": fem_run, "config_hash": config_hash}
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return doc
