"""Forward-over-reverse differentiation for small networks.

Spatial derivatives (up to second order, at most two inputs) propagate as
:class:`Jet` values; parameter gradients come from one reverse sweep over a
:class:`Tape`. Jet components recorded on a tape are differentiable, so
the parameter gradient of a loss built from input derivatives is exact.
"""

from .jet import Jet, cos, exp, forward_hessian, linear, log, softplus, sin, sqrt, square, tanh
from .tape import Tape, Var, value_of


def parameter_gradient(loss, tape, params, retain=False):
    """Gradient of the recorded scalar ``loss`` w.r.t. each Var in ``params``."""
    return tape.gradient(loss, params, retain=retain)


__all__ = [
    "Jet",
    "Tape",
    "Var",
    "cos",
    "exp",
    "forward_hessian",
    "linear",
    "log",
    "parameter_gradient",
    "sin",
    "softplus",
    "sqrt",
    "square",
    "tanh",
    "value_of",
]
