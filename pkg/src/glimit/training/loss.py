"""PINN loss: PDE residual on collocation points plus data misfit."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import Jet, Tape, value_of
from ..errors import NumericError, UsageError
from ..network import params_on_tape


@dataclass
class LossState:
    """Loss weights. Only ``lambda_d`` adapts; ``lambda_r`` stays at 1."""

    lambda_d: float = 1.0
    lambda_r: float = 1.0
    alpha_w: float = 0.1
    period: int = 10
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lambda_d > 0:
            raise UsageError("lambda_d must be positive")


@dataclass
class LossResult:
    total: float
    L_r: float
    L_d: float
    grad: np.ndarray
    grad_r: np.ndarray | None = None
    grad_d: np.ndarray | None = None


def update_adaptive_weights(state, grad_Lr, grad_Ld):
    """lambda_d <- (1 - a) lambda_d + a * max|grad_Lr| / mean|grad_Ld|."""
    gr = np.abs(np.asarray(grad_Lr, dtype=np.float64))
    gd = np.abs(np.asarray(grad_Ld, dtype=np.float64))
    if not (np.all(np.isfinite(gr)) and np.all(np.isfinite(gd))):
        raise NumericError("non-finite gradient in the adaptive weight update")
    denom = float(np.mean(gd)) if gd.size else 0.0
    if denom == 0.0:
        return state
    lam_hat = float(np.max(gr)) / denom
    new = (1.0 - state.alpha_w) * state.lambda_d + state.alpha_w * lam_hat
    return replace(state, lambda_d=new)


def residual(model, x, f_values, up=None, ap=None):
    """div(A grad u) + f at points x (B, dim); returns shape (B, 1).

    The divergence is expanded as sum_i d_i A_ii d_i u + A_ii d_ii u so only
    the diagonal of the solution Hessian is propagated.
    """
    ju = Jet.seed(x, hessian="diag")
    ja = Jet.seed(x, hessian="none")
    u = model.solution(ju, up)
    A = model.coefficient(ja, ap)
    dim = x.shape[1]
    k = np.shape(value_of(A.value))[-1]
    out = np.asarray(f_values, dtype=np.float64).reshape(-1, 1)
    for i in range(dim):
        Ai = A if k == 1 else A[..., i : i + 1]
        if Ai.grad[i] is not None and u.grad[i] is not None:
            out = Ai.grad[i] * u.grad[i] + out
        if u.hess[(i, i)] is not None:
            out = Ai.value * u.hess[(i, i)] + out
    return out


def _check_finite(values, points, what):
    v = np.asarray(value_of(values)).reshape(-1)
    bad = ~np.isfinite(v)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericError(f"non-finite {what} at point {np.asarray(points)[k].tolist()}", node=k)


def _flat_grad(grads):
    return np.concatenate([np.ravel(g) for g in grads])


def evaluate_loss(model, xd, ud, xr, fr, state, flat=None, split=False):
    """Loss terms and flat parameter gradient on the given points.

    With ``split`` the gradients of L_r and L_d are also returned
    separately (for the adaptive weight update).
    """
    if flat is not None:
        model = model.with_flat(flat)
    xd = np.asarray(xd, dtype=np.float64)
    xr = np.asarray(xr, dtype=np.float64)
    if xd.shape[1] != model.u_spec.input_dim or xr.shape[1] != model.u_spec.input_dim:
        raise UsageError("point dimension does not match the model")
    with Tape() as tape:
        up, ap, leaves = params_on_tape(model, tape)
        r = residual(model, xr, fr, up, ap)
        _check_finite(r, xr, "residual")
        Lr = (r * r).mean()
        diff = model.solution(xd, up) - np.asarray(ud, dtype=np.float64).reshape(-1, 1)
        _check_finite(diff, xd, "data misfit")
        Ld = (diff * diff).mean()
        lr_, ld_ = float(value_of(Lr)), float(value_of(Ld))
        if split:
            gr = _flat_grad(tape.gradient(Lr, leaves, retain=True))
            gd = _flat_grad(tape.gradient(Ld, leaves))
            g = state.lambda_r * gr + state.lambda_d * gd
            total = state.lambda_r * lr_ + state.lambda_d * ld_
            return LossResult(total, lr_, ld_, g, gr, gd)
        tot = state.lambda_r * Lr + state.lambda_d * Ld
        g = _flat_grad(tape.gradient(tot, leaves))
    total = state.lambda_r * lr_ + state.lambda_d * ld_
    return LossResult(total, lr_, ld_, g)


def loss(model, source, T_d, T_r, state, split=False):
    """Full-batch loss for a sample set and a collocation set.

    ``source`` maps points (M, dim) to f values (M,).
    """
    xr = T_r.points
    return evaluate_loss(model, T_d.points, T_d.values, xr, source(xr), state, split=split)
