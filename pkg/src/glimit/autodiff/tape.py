"""Reverse-mode differentiation over numpy arrays.

A :class:`Tape` records every primitive applied to a :class:`Var` in
evaluation order. :meth:`Tape.gradient` runs one reverse sweep from a
scalar output back to the requested leaves. Each Var holds a whole array,
so one node covers a batch of points; the sweep stays cheap even when the
recorded expression is a jet of network outputs.
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ConfigurationError, NumericError, UsageError

_state = threading.local()


def active_tape():
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Linear record of primitive operations.

    Use as a context manager; parameters enter through :meth:`variable`.
    A tape is single-use: :meth:`gradient` consumes it unless ``retain``.
    """

    def __init__(self, check_finite=False):
        self.nodes = []
        self.check_finite = check_finite
        self.consumed = False

    def __enter__(self):
        if not hasattr(_state, "stack"):
            _state.stack = []
        _state.stack.append(self)
        return self

    def __exit__(self, *exc):
        _state.stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def variable(self, value):
        """Register a leaf (a parameter array or a tracked input)."""
        return self._record(np.array(value, dtype=np.float64), (), None)

    def _record(self, value, parents, vjp):
        if self.consumed:
            raise UsageError("tape already consumed")
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NumericError(
                f"non-finite value at tape node {len(self.nodes)}",
                node=len(self.nodes),
            )
        v = Var(value, self, len(self.nodes), parents, vjp)
        self.nodes.append(v)
        return v

    def gradient(self, output, wrt, retain=False):
        """Return d(output)/d(w) for every Var in ``wrt``.

        ``output`` must be a scalar Var recorded on this tape. Leaves that
        do not influence the output get a zero array.
        """
        if self.consumed:
            raise UsageError("tape already consumed")
        if not isinstance(output, Var) or output.tape is not self:
            raise UsageError("output was not recorded on this tape")
        if np.ndim(output.value) != 0:
            raise UsageError("gradient needs a scalar output")
        adj = [None] * len(self.nodes)
        adj[output.index] = np.float64(1.0)
        nodes = self.nodes
        for i in range(output.index, -1, -1):
            g = adj[i]
            if g is None:
                continue
            node = nodes[i]
            if node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if parent is None or pg is None:
                    continue
                j = parent.index
                adj[j] = pg if adj[j] is None else adj[j] + pg
            if i != output.index:
                adj[i] = None
        out = []
        for w in wrt:
            g = adj[w.index] if w.index != output.index else np.float64(1.0)
            out.append(np.zeros_like(w.value) if g is None else np.broadcast_to(g, w.value.shape).copy())
        if not retain:
            self.consumed = True
        return out


def _unbroadcast(g, shape):
    if np.shape(g) == shape:
        return g
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise UsageError("operands recorded on different tapes")
    return tape


def _val(x):
    return x.value if isinstance(x, Var) else x


def _binary(a, b, value, ga, gb):
    """Record ``value = op(a, b)``; ``ga``/``gb`` map the output adjoint to
    adjoints of ``a``/``b`` before unbroadcasting."""
    tape = _tape_of(a, b)
    if tape is None:
        return value
    pa = a if isinstance(a, Var) else None
    pb = b if isinstance(b, Var) else None
    sa = np.shape(_val(a))
    sb = np.shape(_val(b))

    def vjp(g):
        return (
            _unbroadcast(ga(g), sa) if pa is not None else None,
            _unbroadcast(gb(g), sb) if pb is not None else None,
        )

    return tape._record(np.asarray(value), (pa, pb), vjp)


def _unary(x, value, gx):
    if not isinstance(x, Var):
        return value
    return x.tape._record(np.asarray(value), (x,), lambda g: (gx(g),))


def add(a, b):
    return _binary(a, b, _val(a) + _val(b), lambda g: g, lambda g: g)


def sub(a, b):
    return _binary(a, b, _val(a) - _val(b), lambda g: g, lambda g: -g)


def mul(a, b):
    va, vb = _val(a), _val(b)
    return _binary(a, b, va * vb, lambda g: g * vb, lambda g: g * va)


def div(a, b):
    va, vb = _val(a), _val(b)
    out = va / vb
    return _binary(a, b, out, lambda g: g / vb, lambda g: -g * out / vb)


def neg(a):
    return _unary(a, -_val(a), lambda g: -g)


def power(a, p):
    if isinstance(p, Var):
        raise ConfigurationError("power with a tracked exponent is not supported")
    va = _val(a)
    return _unary(a, va**p, lambda g: g * p * va ** (p - 1))


def matmul(a, b):
    va, vb = _val(a), _val(b)
    tape = _tape_of(a, b)
    out = va @ vb
    if tape is None:
        return out
    pa = a if isinstance(a, Var) else None
    pb = b if isinstance(b, Var) else None

    def vjp(g):
        ga = _unbroadcast(g @ vb.T, va.shape) if pa is not None else None
        gb = va.T @ g if pb is not None else None
        return ga, gb

    return tape._record(out, (pa, pb), vjp)


def tanh(x):
    t = np.tanh(_val(x))
    return _unary(x, t, lambda g: g * (1.0 - t * t))


def sin(x):
    v = _val(x)
    return _unary(x, np.sin(v), lambda g: g * np.cos(v))


def cos(x):
    v = _val(x)
    return _unary(x, np.cos(v), lambda g: -g * np.sin(v))


def exp(x):
    e = np.exp(_val(x))
    return _unary(x, e, lambda g: g * e)


def log(x):
    v = _val(x)
    return _unary(x, np.log(v), lambda g: g / v)


def sqrt(x):
    s = np.sqrt(_val(x))
    return _unary(x, s, lambda g: 0.5 * g / s)


def sigmoid(x):
    v = _val(x)
    s = 0.5 * (1.0 + np.tanh(0.5 * v))
    return _unary(x, s, lambda g: g * s * (1.0 - s))


def softplus(x):
    v = _val(x)
    sp = np.logaddexp(0.0, v)
    return _unary(x, sp, lambda g: g * 0.5 * (1.0 + np.tanh(0.5 * v)))


def total(x, axis=None):
    """Sum over ``axis`` (all axes by default)."""
    v = _val(x)
    out = np.sum(v, axis=axis)
    if not isinstance(x, Var):
        return out
    shape = v.shape

    def gx(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    return _unary(x, out, gx)


def mean(x, axis=None):
    n = np.size(_val(x)) if axis is None else np.shape(_val(x))[axis]
    return total(x, axis) * (1.0 / n)


def getitem(x, key):
    v = _val(x)
    out = v[key]
    if not isinstance(x, Var):
        return out

    def gx(g):
        z = np.zeros_like(v)
        z[key] = g
        return z

    return _unary(x, out, gx)


def reshape(x, shape):
    v = _val(x)
    return _unary(x, v.reshape(shape), lambda g: np.reshape(g, v.shape))


# numpy ufunc name -> (primitive, arity)
_UFUNCS = {
    "add": (add, 2),
    "subtract": (sub, 2),
    "multiply": (mul, 2),
    "true_divide": (div, 2),
    "divide": (div, 2),
    "negative": (neg, 1),
    "tanh": (tanh, 1),
    "sin": (sin, 1),
    "cos": (cos, 1),
    "exp": (exp, 1),
    "log": (log, 1),
    "sqrt": (sqrt, 1),
    "square": (lambda x: mul(x, x), 1),
    "matmul": (matmul, 2),
}


class Var:
    """A recorded array value. Created only by a :class:`Tape`."""

    __slots__ = ("value", "tape", "index", "parents", "vjp")
    __array_priority__ = 1000.0

    def __init__(self, value, tape, index, parents, vjp):
        self.value = value
        self.tape = tape
        self.index = index
        self.parents = parents
        self.vjp = vjp

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            raise ConfigurationError(f"unsupported primitive: {ufunc.__name__}.{method}")
        try:
            fn, arity = _UFUNCS[ufunc.__name__]
        except KeyError:
            raise ConfigurationError(f"unsupported primitive: {ufunc.__name__}") from None
        if ufunc.__name__ == "power":
            return power(*inputs)
        return fn(*inputs[:arity])

    def __add__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return add(self, o)

    def __radd__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return add(o, self)

    def __sub__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return sub(self, o)

    def __rsub__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return sub(o, self)

    def __mul__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return mul(self, o)

    def __rmul__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return mul(o, self)

    def __truediv__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return div(self, o)

    def __rtruediv__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return matmul(self, o)

    def __rmatmul__(self, o):
        if getattr(o, "is_jet", False):
            return NotImplemented
        return matmul(o, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None):
        return total(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)


_UFUNCS["power"] = (power, 2)


def value_of(x):
    """Strip tracking: the plain ndarray/float behind ``x``."""
    return x.value if isinstance(x, Var) else x
