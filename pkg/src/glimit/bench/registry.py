"""The four benchmark problems: coefficients, sources, references and
default hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConfigurationError
from ..homogenize import (
    CoefficientField,
    GLimitField,
    glimit_ergodic_mc,
    glimit_patch_upscale_2d,
    weak_limit_formula,
)

TWO_PI = 2.0 * math.pi


# locally periodic 1D

def locper_coefficient(x, eps):
    return (1.0 + x**2) / (2.0 + np.sin(TWO_PI * x / eps))


def locper_glimit(x):
    return 0.5 * (x**2 + 1.0)


# heavily oscillatory 1D, A^eps(x) = int_0^1 (1 + sin((y + s(x))^2) / 2) e^{y c(x)} dy

def _gauss_panels(panels=64, order=4):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.arange(panels) / panels
    y = (edges[:, None] + (t[None, :] + 1.0) / (2 * panels)).ravel()
    return y, np.tile(w / (2 * panels), panels)


_OSC_Y, _OSC_W = _gauss_panels()


def oscil_coefficient(x, eps, chunk=4096):
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    y, w = _OSC_Y[None, :], _OSC_W
    for s in range(0, len(flat), chunk):
        xs = flat[s : s + chunk, None]
        shift = np.sin(math.pi * math.sqrt(2.0 / eps) * xs) / (2.0 * eps)
        integrand = (1.0 + 0.5 * np.sin((y + shift) ** 2)) * np.exp(y * (1.0 + np.sin(xs)))
        out[s : s + chunk] = integrand @ w
    return out.reshape(x.shape)


# non-periodic 2D

def nonper_coefficient(x1, x2, eps):
    return 1.0 + 0.9 * np.sin(TWO_PI * x1 / eps) * np.sin(TWO_PI * x2**2 / eps)


# ergodic 1D

def ergodic_A(x, w1, w2):
    """A(x, omega) = 3.1 + (x + 1) sin(2 pi w1) + sin(2 pi w2)."""
    return 3.1 + (x + 1.0) * np.sin(TWO_PI * w1) + np.sin(TWO_PI * w2)


def ergodic_coefficient(x, eps, omega=(0.5, 0.5)):
    return ergodic_A(x, omega[0] + x / eps, omega[1] + math.sqrt(2.0) * x / eps)


@dataclass
class BenchmarkDef:
    """One benchmark problem.

    ``defaults`` follows the published hyperparameter table (depth counts
    hidden layers); ``n_data``/``n_res`` are the default training set sizes.
    """

    id: str
    dim: int
    domain: tuple
    source: Callable
    coefficient_fn: Callable
    structure: str
    alpha: float
    beta: float
    defaults: dict
    n_data: int
    n_res: int
    default_eps: float
    eval_h: float
    g: Callable | None = None
    coef_inputs: tuple = (0,)
    a_outputs: int = 1
    needs_omega: bool = False
    reference: Callable | None = None

    def coefficient(self, eps, omega=None):
        if not eps > 0:
            raise ConfigurationError("eps must be positive")
        if self.needs_omega:
            om = tuple(omega) if omega is not None else (0.5, 0.5)
            ev = lambda p: self.coefficient_fn(p, eps, om)
        else:
            ev = lambda p: self.coefficient_fn(p, eps)
        return CoefficientField(ev, eps, self.alpha, self.beta, self.structure, self.dim, domain=self.domain)

    def desk_h(self, eps, full_scale=False):
        """Mesh size for synthesizing multiscale data."""
        if full_scale:
            return 1e-5 if self.dim == 1 else 1.0 / 8000
        if self.id == "oscil1d":
            return 2.0**-17
        if self.id == "ergodic1d":
            return min(2.0**-15, eps / 64)
        if self.dim == 1:
            return min(2.0**-15, eps / 256)
        return 2.0**-10

    def eval_grid(self, h=None):
        h = self.eval_h if h is None else h
        lo, hi = self.domain
        n = int(round((hi[0] - lo[0]) / h))
        axes = [np.linspace(lo[k], hi[k], n + 1) for k in range(self.dim)]
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(*axes)
        return np.column_stack([X.ravel(), Y.ravel()])

    def train_defaults(self):
        d = dict(self.defaults)
        d.setdefault("coef_inputs", list(self.coef_inputs))
        d.setdefault("a_outputs", self.a_outputs)
        return d


def _p1(f):
    """Lift a function of the first coordinate to points (M, 1)."""
    return lambda p: f(np.asarray(p)[:, 0])


def _locper_reference(eps, options):
    grid = np.linspace(0.0, 1.0, 1001)
    return GLimitField(grid, locper_glimit(grid), "analytic", formula=locper_glimit)


def _oscil_reference(eps, options):
    grid = np.linspace(0.0, 1.0, 1001)
    return GLimitField(grid, weak_limit_formula(grid), "analytic", formula=weak_limit_formula)


def _ergodic_reference(eps, options):
    h = options.get("ref_h", 1.0 / 2000)
    grid = np.linspace(0.0, 1.0, int(round(1.0 / h)) + 1)
    return glimit_ergodic_mc(ergodic_A, grid, options.get("mc_samples", 200_000), options.get("mc_seed", 0))


def nonper_patch_reference(eps_ref=2.0**-9, delta=1.0 / 64, resolution=256, slices=33):
    """Patch-upscaled diagonal G-limit of the 2D coefficient, as a function of x2.

    The limit does not depend on eps, so the patch problems use a finer
    ``eps_ref`` than the data, which lets the patch hold 8 periods while
    staying small against the x2 variation.
    """
    A = lambda p: nonper_coefficient(p[:, 0], p[:, 1], eps_ref)
    x2 = np.linspace(1.0, 2.0, slices)
    return glimit_patch_upscale_2d(A, x2, delta, resolution, eps_ref)


def _nonper_reference(eps, options):
    return nonper_patch_reference(
        options.get("eps_ref", 2.0**-9),
        options.get("delta", 1.0 / 64),
        options.get("patch_resolution", 256),
        options.get("slices", 33),
    )


REGISTRY = {
    "locper1d": BenchmarkDef(
        id="locper1d",
        dim=1,
        domain=((0.0,), (1.0,)),
        source=_p1(lambda x: np.cos(math.pi * x)),
        coefficient_fn=lambda p, eps: locper_coefficient(p[:, 0], eps),
        structure="locally_periodic_1d",
        alpha=1.0 / 3.0,
        beta=2.0,
        defaults=dict(u_depth=3, u_width=30, a_depth=3, a_width=30, lr=1e-3, epochs=40_000, batch_size=64),
        n_data=160,
        n_res=190,
        default_eps=2.0**-7,
        eval_h=1e-5,
        reference=_locper_reference,
    ),
    "oscil1d": BenchmarkDef(
        id="oscil1d",
        dim=1,
        domain=((0.0,), (1.0,)),
        source=_p1(lambda x: 3.0 + np.sin(x)),
        coefficient_fn=lambda p, eps: oscil_coefficient(p[:, 0], eps),
        structure="weak_limit_known_1d",
        alpha=0.5,
        beta=1.5 * math.expm1(2.0) / 2.0,
        defaults=dict(u_depth=3, u_width=50, a_depth=3, a_width=50, lr=1e-4, epochs=80_000, batch_size=64),
        n_data=160,
        n_res=190,
        default_eps=2.0**-7,
        eval_h=1e-5,
        reference=_oscil_reference,
    ),
    "nonper2d": BenchmarkDef(
        id="nonper2d",
        dim=2,
        domain=((1.0, 1.0), (2.0, 2.0)),
        source=lambda p: np.ones(len(p)),
        coefficient_fn=lambda p, eps: nonper_coefficient(p[:, 0], p[:, 1], eps),
        structure="nonperiodic_2d",
        alpha=0.1,
        beta=1.9,
        defaults=dict(u_depth=4, u_width=45, a_depth=2, a_width=40, lr=1e-3, epochs=100_000, batch_size=200),
        n_data=1600,
        n_res=1600,
        default_eps=2.0**-4,
        eval_h=1.0 / 128,
        coef_inputs=(1,),
        a_outputs=2,
        reference=_nonper_reference,
    ),
    "ergodic1d": BenchmarkDef(
        id="ergodic1d",
        dim=1,
        domain=((0.0,), (1.0,)),
        source=lambda p: np.ones(len(p)),
        coefficient_fn=lambda p, eps, om: ergodic_coefficient(p[:, 0], eps, om),
        structure="ergodic_1d",
        alpha=0.1,
        beta=6.1,
        defaults=dict(u_depth=3, u_width=30, a_depth=2, a_width=10, lr=1e-3, epochs=60_000, batch_size=64),
        n_data=160,
        n_res=180,
        default_eps=2.0**-10,
        eval_h=1.0 / 2000,
        needs_omega=True,
        reference=_ergodic_reference,
    ),
}


def get_benchmark(name):
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigurationError(f"unknown benchmark {name!r}; choose from {sorted(REGISTRY)}") from None


def reference_glimit(bench, eps, options=None) -> GLimitField:
    return bench.reference(eps, options or {})
