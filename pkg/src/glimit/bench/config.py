"""Run configuration: JSON file plus command-line overrides, with a stable hash."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ConfigurationError
from .registry import REGISTRY, get_benchmark

OUTPUT_ENV = "GLIMIT_OUTPUT_ROOT"
THREADS_ENV = "GLIMIT_THREADS"

# TrainConfig fields that may be overridden from a run config
TRAIN_KEYS = (
    "u_depth",
    "u_width",
    "a_depth",
    "a_width",
    "lr",
    "epochs",
    "batch_size",
    "lbfgs_iters",
    "cycles",
    "adaptive",
    "coef_floor",
    "plateau_patience",
)


@dataclass
class RunConfig:
    benchmark: str = "locper1d"
    eps: float | None = None
    noise: float = 0.0
    n_data: int | None = None
    n_res: int | None = None
    data_seed: int = 0
    init_seed: int = 0
    noise_seed: int = 0
    omega: tuple = (0.5, 0.5)
    mesh_h: float | None = None
    full_scale: bool = False
    restarts: int = 5
    collocation: str = "grid"
    eval_h: float | None = None
    train: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if self.benchmark not in REGISTRY:
            raise ConfigurationError(f"unknown benchmark {self.benchmark!r}; choose from {sorted(REGISTRY)}")
        b = get_benchmark(self.benchmark)
        if self.eps is None:
            self.eps = b.default_eps
        if self.n_data is None:
            self.n_data = b.n_data
        if self.n_res is None:
            self.n_res = b.n_res
        self.eps = float(self.eps)
        self.noise = float(self.noise)
        self.omega = tuple(float(w) for w in self.omega)
        self.validate()

    def validate(self):
        b = get_benchmark(self.benchmark)
        if not 0 < self.eps <= 1:
            raise ConfigurationError("eps must lie in (0, 1]")
        if not 0 <= self.noise <= 0.2:
            raise ConfigurationError("noise must lie in [0, 0.2]")
        if self.n_data < 2 or self.n_res < 1 or self.restarts < 1:
            raise ConfigurationError("n_data >= 2, n_res >= 1 and restarts >= 1 are required")
        if self.collocation not in ("grid", "uniform_random"):
            raise ConfigurationError("collocation must be 'grid' or 'uniform_random'")
        if len(self.omega) != 2:
            raise ConfigurationError("omega needs two components")
        unknown = set(self.train) - set(TRAIN_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown training overrides {sorted(unknown)}")
        if b.dim == 2 and not self.full_scale and self.eps < 2.0**-4:
            raise ConfigurationError("2D runs with eps < 2^-4 need --full-scale")
        if b.dim == 2 and self.n_data != round(self.n_data**0.5) ** 2:
            raise ConfigurationError("2D n_data must be a perfect square")
        if b.dim == 2 and self.collocation == "grid" and self.n_res != round(self.n_res**0.5) ** 2:
            raise ConfigurationError("2D grid collocation needs a perfect square n_res")

    # derived settings

    @property
    def bench(self):
        return get_benchmark(self.benchmark)

    def data_h(self):
        return self.mesh_h if self.mesh_h is not None else self.bench.desk_h(self.eps, self.full_scale)

    def train_settings(self):
        d = self.bench.train_defaults()
        d.update(self.train)
        d["restarts"] = self.restarts
        return d

    # serialization

    def to_dict(self):
        d = asdict(self)
        d["omega"] = list(self.omega)
        return d

    def hash(self):
        """Short SHA-256 of the canonical JSON form (output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(d)

    def with_overrides(self, **kw):
        d = self.to_dict()
        for k, v in kw.items():
            if v is None:
                continue
            if k in TRAIN_KEYS:
                d["train"] = {**d["train"], k: v}
            else:
                d[k] = v
        return RunConfig.from_dict(d)

    def run_dir(self):
        root = Path(self.output_dir or os.environ.get(OUTPUT_ENV, "glimit-runs"))
        return root / f"{self.benchmark}-{self.hash()}"
