"""Second-order forward-mode jets over spatial inputs.

A :class:`Jet` carries a value together with its first and second partial
derivatives with respect to up to two tracked inputs. Components may be
plain arrays or :class:`~glimit.autodiff.tape.Var` nodes, so a jet built
from recorded parameters is itself differentiable in reverse mode; this is
how parameter gradients reach through the PDE residual.

``None`` marks a structurally zero component and is skipped in arithmetic.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, UsageError
from . import tape as T
from .tape import Tape, Var, value_of


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _sub(a, b):
    if b is None:
        return a
    if a is None:
        return -b
    return a - b


def _mul(a, b):
    if a is None or b is None:
        return None
    return a * b


def _neg(a):
    return None if a is None else -a


def _pairs_for(n, hessian):
    if hessian == "full":
        return tuple((i, j) for i in range(n) for j in range(i, n))
    if hessian == "diag":
        return tuple((i, i) for i in range(n))
    if hessian == "none":
        return ()
    raise ConfigurationError(f"unknown hessian mode {hessian!r}")


class Jet:
    """Value with gradient and (partial) Hessian w.r.t. ``n`` inputs.

    ``hess`` maps index pairs ``(i, j)`` with ``i <= j`` to components; only
    the pairs listed in ``pairs`` are propagated.
    """

    __slots__ = ("value", "grad", "hess", "pairs")
    __array_priority__ = 2000.0
    is_jet = True

    def __init__(self, value, grad, hess=None, pairs=None):
        self.value = value
        self.grad = tuple(grad)
        if pairs is None:
            pairs = _pairs_for(len(self.grad), "full")
        self.pairs = tuple(pairs)
        hess = dict(hess or {})
        self.hess = {p: hess.get(p) for p in self.pairs}

    @classmethod
    def constant(cls, value, n, pairs):
        return cls(value, (None,) * n, {}, pairs)

    @classmethod
    def inputs(cls, x, hessian="full"):
        """Seed jets for the columns of ``x`` (shape (B, n) or (n,)).

        Returns one jet per column, each tracking all ``n`` columns.
        """
        n = x.shape[-1] if isinstance(x, Var) else np.shape(x)[-1]
        if n > 2:
            raise UsageError("at most two tracked inputs are supported")
        pairs = _pairs_for(n, hessian)
        out = []
        for k in range(n):
            col = T.getitem(x, (..., slice(k, k + 1))) if np.ndim(value_of(x)) > 1 else T.getitem(x, k)
            grad = [None] * n
            grad[k] = 1.0
            out.append(cls(col, grad, {}, pairs))
        return out

    @classmethod
    def seed(cls, x, hessian="full"):
        """Jet of the row vectors of ``x`` (shape (B, n)): every row tracks
        its own coordinates, so ``grad[k]`` is the k-th unit row."""
        n = np.shape(value_of(x))[-1]
        if n > 2:
            raise UsageError("at most two tracked inputs are supported")
        eye = np.eye(n)
        return cls(x, [eye[k : k + 1] for k in range(n)], {}, _pairs_for(n, hessian))

    @property
    def n(self):
        return len(self.grad)

    def hessian(self):
        """Symmetric n x n nested list; untracked entries are ``None``."""
        h = [[None] * self.n for _ in range(self.n)]
        for (i, j), c in self.hess.items():
            h[i][j] = c
            h[j][i] = c
        return h

    def __repr__(self):
        return f"Jet(n={self.n}, pairs={self.pairs})"

    def _lift(self, other):
        if isinstance(other, Jet):
            if other.n != self.n or other.pairs != self.pairs:
                raise UsageError("jets track different inputs")
            return other
        return Jet.constant(other, self.n, self.pairs)

    # arithmetic

    def __add__(self, o):
        o = self._lift(o)
        return Jet(
            self.value + o.value,
            [_add(a, b) for a, b in zip(self.grad, o.grad)],
            {p: _add(self.hess[p], o.hess[p]) for p in self.pairs},
            self.pairs,
        )

    __radd__ = __add__

    def __sub__(self, o):
        o = self._lift(o)
        return Jet(
            self.value - o.value,
            [_sub(a, b) for a, b in zip(self.grad, o.grad)],
            {p: _sub(self.hess[p], o.hess[p]) for p in self.pairs},
            self.pairs,
        )

    def __rsub__(self, o):
        return self._lift(o) - self

    def __neg__(self):
        return Jet(
            -self.value,
            [_neg(a) for a in self.grad],
            {p: _neg(c) for p, c in self.hess.items()},
            self.pairs,
        )

    def __mul__(self, o):
        if not isinstance(o, Jet):
            # scaling by a constant keeps structural zeros
            return Jet(
                self.value * o,
                [_mul(a, o) for a in self.grad],
                {p: _mul(c, o) for p, c in self.hess.items()},
                self.pairs,
            )
        o = self._lift(o)
        av, bv = self.value, o.value
        grad = [_add(_mul(da, bv), _mul(av, db)) for da, db in zip(self.grad, o.grad)]
        hess = {}
        for i, j in self.pairs:
            h = _add(_mul(self.hess[(i, j)], bv), _mul(av, o.hess[(i, j)]))
            h = _add(h, _mul(self.grad[i], o.grad[j]))
            h = _add(h, _mul(self.grad[j], o.grad[i]))
            hess[(i, j)] = h
        return Jet(av * bv, grad, hess, self.pairs)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if not isinstance(o, Jet):
            return self * (1.0 / o)
        return self * reciprocal(o)

    def __rtruediv__(self, o):
        return self._lift(o) * reciprocal(self)

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise ConfigurationError("power with a jet exponent is not supported")
        v = self.value
        if p == 2:
            return self * self
        f1 = p * v ** (p - 1)
        f2 = p * (p - 1) * v ** (p - 2)
        return _chain(self, v**p, f1, f2)

    def __getitem__(self, key):
        def g(c):
            if c is None or not np.ndim(value_of(c)):
                return c
            c = c[key]
            # slicing a seed can leave an all-zero constant block
            if isinstance(c, np.ndarray) and not c.any():
                return None
            return c

        return Jet(
            self.value[key],
            [g(a) for a in self.grad],
            {p: g(c) for p, c in self.hess.items()},
            self.pairs,
        )

    def __matmul__(self, w):
        return linear(self, w)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            raise ConfigurationError(f"unsupported primitive: {ufunc.__name__}.{method}")
        name = ufunc.__name__
        if name in _UNARY:
            return _UNARY[name](inputs[0])
        if len(inputs) != 2:
            raise ConfigurationError(f"unsupported primitive: {name}")
        a, b = inputs
        if name == "add":
            return _as_jet(a, b) + b
        if name == "subtract":
            return _as_jet(a, b) - b
        if name == "multiply":
            return _as_jet(a, b) * b
        if name in ("true_divide", "divide"):
            return _as_jet(a, b) / b
        if name == "power":
            return a**b
        raise ConfigurationError(f"unsupported primitive: {name}")


def _as_jet(a, b):
    return a if isinstance(a, Jet) else b._lift(a)


def _chain(x, f0, f1, f2):
    """Jet of g(x) given g(v), g'(v), g''(v) at v = x.value."""
    grad = [_mul(f1, d) for d in x.grad]
    hess = {}
    for i, j in x.pairs:
        h = _mul(f1, x.hess[(i, j)])
        gi, gj = x.grad[i], x.grad[j]
        if gi is not None and gj is not None:
            h = _add(h, f2 * gi * gj)
        hess[(i, j)] = h
    return Jet(f0, grad, hess, x.pairs)


def tanh(x):
    if not isinstance(x, Jet):
        return T.tanh(x)
    t = T.tanh(x.value)
    t1 = 1.0 - t * t
    return _chain(x, t, t1, -2.0 * t * t1)


def sin(x):
    if not isinstance(x, Jet):
        return T.sin(x)
    s, c = T.sin(x.value), T.cos(x.value)
    return _chain(x, s, c, -s)


def cos(x):
    if not isinstance(x, Jet):
        return T.cos(x)
    s, c = T.sin(x.value), T.cos(x.value)
    return _chain(x, c, -s, -c)


def exp(x):
    if not isinstance(x, Jet):
        return T.exp(x)
    e = T.exp(x.value)
    return _chain(x, e, e, e)


def log(x):
    if not isinstance(x, Jet):
        return T.log(x)
    r = 1.0 / x.value
    return _chain(x, T.log(x.value), r, -(r * r))


def sqrt(x):
    if not isinstance(x, Jet):
        return T.sqrt(x)
    return x**0.5


def reciprocal(x):
    r = 1.0 / x.value
    r2 = r * r
    return _chain(x, r, -r2, 2.0 * r2 * r)


def softplus(x):
    if not isinstance(x, Jet):
        return T.softplus(x)
    s = T.sigmoid(x.value)
    return _chain(x, T.softplus(x.value), s, s * (1.0 - s))


def square(x):
    return x * x


def linear(x, w, b=None):
    """``x @ w + b`` applied componentwise (w, b are constants or Vars)."""
    if not isinstance(x, Jet):
        out = T.matmul(x, w)
        return out if b is None else out + b
    mm = lambda c: None if c is None else T.matmul(c, w)
    value = T.matmul(x.value, w)
    if b is not None:
        value = value + b
    return Jet(value, [mm(a) for a in x.grad], {p: mm(c) for p, c in x.hess.items()}, x.pairs)


_UNARY = {
    "tanh": tanh,
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "negative": lambda x: -x,
    "square": square,
}


def forward_hessian(f, x):
    """Value, gradient and Hessian of ``f`` at the point ``x``.

    ``f`` receives one jet per coordinate of ``x`` (one or two) and must
    return a jet. Non-finite intermediates raise
    :class:`~glimit.errors.NumericError` naming the tape node.

    >>> forward_hessian(lambda x: x * x, 3.0)
    (9.0, array([6.]), array([[2.]]))
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1 or not 1 <= x.size <= 2:
        raise UsageError("x must be a point with one or two coordinates")
    if not np.all(np.isfinite(x)):
        raise UsageError("x must be finite")
    with Tape(check_finite=True) as tape:
        xv = tape.variable(x)
        out = f(*Jet.inputs(xv))
        if not isinstance(out, Jet):
            raise ConfigurationError("f must be built from supported primitives and return a jet")
    n = x.size
    value = float(value_of(out.value))
    grad = np.array([0.0 if c is None else float(value_of(c)) for c in out.grad])
    hess = np.zeros((n, n))
    for (i, j), c in out.hess.items():
        hess[i, j] = hess[j, i] = 0.0 if c is None else float(value_of(c))
    return value, grad, hess
