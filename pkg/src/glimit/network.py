"""Tanh feed-forward networks, the hard Dirichlet wrapper and the PINN model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Jet, Tape, softplus, tanh, value_of
from .autodiff.jet import linear
from .errors import ConfigurationError, UsageError


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    depth: int
    width: int

    def __post_init__(self):
        if self.input_dim not in (1, 2):
            raise ConfigurationError("input_dim must be 1 or 2")
        if self.output_dim < 1 or self.depth < 1 or self.width < 1:
            raise ConfigurationError("output_dim, depth and width must be positive")

    @property
    def sizes(self):
        return [self.input_dim] + [self.width] * self.depth + [self.output_dim]

    @property
    def n_params(self):
        s = self.sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


@dataclass
class Params:
    """Per-layer weights (fan_in x fan_out) and biases."""

    weights: list
    biases: list

    def flatten(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ravel(value_of(w)))
            parts.append(np.ravel(value_of(b)))
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, spec, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != spec.n_params:
            raise UsageError(f"expected {spec.n_params} parameters, got {flat.size}")
        s = spec.sizes
        ws, bs, k = [], [], 0
        for i in range(len(s) - 1):
            n = s[i] * s[i + 1]
            ws.append(flat[k : k + n].reshape(s[i], s[i + 1]))
            k += n
            bs.append(flat[k : k + s[i + 1]].copy())
            k += s[i + 1]
        return cls(ws, bs)

    def leaves(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def on_tape(self, tape):
        """Copy of these params registered as tape variables."""
        return Params(
            [tape.variable(w) for w in self.weights],
            [tape.variable(b) for b in self.biases],
        )


def init_glorot(spec, seed):
    """Glorot-normal weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    s = spec.sizes
    ws, bs = [], []
    for i in range(len(s) - 1):
        std = np.sqrt(2.0 / (s[i] + s[i + 1]))
        ws.append(rng.normal(0.0, std, size=(s[i], s[i + 1])))
        bs.append(np.zeros(s[i + 1]))
    return Params(ws, bs)


def mlp_eval(spec, params, x):
    """Evaluate the network on ``x`` of shape (B, input_dim).

    ``x`` may be an array, a tape Var or a :class:`Jet` seeded on the
    inputs; the output has the matching kind with shape (B, output_dim).
    """
    width = np.shape(value_of(x.value if isinstance(x, Jet) else x))[-1]
    if width != spec.input_dim:
        raise UsageError(f"network expects {spec.input_dim} inputs, got {width}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = linear(h, w, b)
        if i < last:
            h = tanh(h)
    return h


@dataclass
class BoundaryWrapper:
    """Hard Dirichlet constraint on the box ``[lo, hi]``: u = g + l * raw."""

    lo: tuple
    hi: tuple
    g: Callable | None = None

    @classmethod
    def cube(cls, a, b, dim, g=None):
        return cls((float(a),) * dim, (float(b),) * dim, g)

    @property
    def dim(self):
        return len(self.lo)

    def check_inside(self, x, tol=1e-12):
        xv = np.asarray(value_of(x.value if isinstance(x, Jet) else x))
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if np.any(xv < lo - tol) or np.any(xv > hi + tol):
            raise UsageError("point outside the domain")

    def bubble(self, x):
        """l(x) = prod_k (x_k - lo_k)(hi_k - x_k); jet-aware."""
        out = None
        for k in range(self.dim):
            xk = x[..., k : k + 1]
            f = (xk - self.lo[k]) * (self.hi[k] - xk)
            out = f if out is None else out * f
        return out

    def apply(self, x, raw):
        self.check_inside(x)
        u = self.bubble(x) * raw
        if self.g is not None:
            u = u + self.g(x)
        return u


def constrained_solution(wrapper, raw, x):
    return wrapper.apply(x, raw)


@dataclass
class PinnModel:
    """Solution network with hard boundary wrapper plus coefficient network.

    ``coef_inputs`` selects the columns of x fed to the coefficient net
    (the 2D benchmark uses only x2). ``coef_floor`` is the positivity floor;
    ``None`` leaves the coefficient output unconstrained.
    """

    u_spec: MlpSpec
    a_spec: MlpSpec
    wrapper: BoundaryWrapper
    u_params: Params
    a_params: Params
    coef_inputs: tuple = (0,)
    coef_floor: float | None = 1e-3
    meta: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, u_spec, a_spec, wrapper, seed, coef_inputs=(0,), coef_floor=1e-3):
        ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).generate_state(2, dtype=np.uint64)
        return cls(
            u_spec,
            a_spec,
            wrapper,
            init_glorot(u_spec, int(ss[0])),
            init_glorot(a_spec, int(ss[1])),
            tuple(coef_inputs),
            coef_floor,
            {"seed": int(seed)},
        )

    @property
    def n_params(self):
        return self.u_spec.n_params + self.a_spec.n_params

    def flat(self):
        return np.concatenate([self.u_params.flatten(), self.a_params.flatten()])

    def with_flat(self, flat):
        n = self.u_spec.n_params
        return PinnModel(
            self.u_spec,
            self.a_spec,
            self.wrapper,
            Params.unflatten(self.u_spec, flat[:n]),
            Params.unflatten(self.a_spec, flat[n:]),
            self.coef_inputs,
            self.coef_floor,
            dict(self.meta),
        )

    def solution(self, x, params=None):
        params = params or self.u_params
        return self.wrapper.apply(x, mlp_eval(self.u_spec, params, x))

    def coefficient(self, x, params=None):
        """Diagonal G-limit entries at x, shape (B, a_spec.output_dim)."""
        params = params or self.a_params
        cols = self.coef_inputs
        xw = np.shape(value_of(x.value if isinstance(x, Jet) else x))[-1]
        if cols == tuple(range(xw)):
            xa = x
        elif len(cols) == 1:
            xa = x[..., cols[0] : cols[0] + 1]
        else:
            raise ConfigurationError("coefficient inputs must be one column or all of them")
        raw = mlp_eval(self.a_spec, params, xa)
        if self.coef_floor is None:
            return raw
        return softplus(raw) + self.coef_floor

    # plain-array conveniences

    def predict_solution(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.u_spec.input_dim:
            x = x.T
        return np.asarray(self.solution(x))[:, 0]

    def predict_coefficient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.u_spec.input_dim:
            x = x.T
        return np.asarray(self.coefficient(x))

    # checkpoints

    def to_dict(self, step=0):
        return {
            "format": "glimit-checkpoint v1",
            "u_spec": asdict(self.u_spec),
            "a_spec": asdict(self.a_spec),
            "domain": {"lo": list(self.wrapper.lo), "hi": list(self.wrapper.hi)},
            "coef_inputs": list(self.coef_inputs),
            "coef_floor": self.coef_floor,
            "seed": self.meta.get("seed"),
            "step": int(step),
            "params": self.flat().tolist(),
        }

    @classmethod
    def from_dict(cls, d, g=None):
        if d.get("format") != "glimit-checkpoint v1":
            raise UsageError("not a glimit checkpoint")
        u_spec = MlpSpec(**d["u_spec"])
        a_spec = MlpSpec(**d["a_spec"])
        wrapper = BoundaryWrapper(tuple(d["domain"]["lo"]), tuple(d["domain"]["hi"]), g)
        flat = np.asarray(d["params"], dtype=np.float64)
        n = u_spec.n_params
        return cls(
            u_spec,
            a_spec,
            wrapper,
            Params.unflatten(u_spec, flat[:n]),
            Params.unflatten(a_spec, flat[n:]),
            tuple(d["coef_inputs"]),
            d["coef_floor"],
            {"seed": d.get("seed"), "step": d.get("step", 0)},
        )

    def save(self, path, step=0):
        with open(path, "w") as fh:
            json.dump(self.to_dict(step), fh)

    @classmethod
    def load(cls, path, g=None):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), g)


def params_on_tape(model, tape: Tape):
    """Register both networks' parameters on ``tape``; returns (u, a, leaves)."""
    up = model.u_params.on_tape(tape)
    ap = model.a_params.on_tape(tape)
    return up, ap, up.leaves() + ap.leaves()
