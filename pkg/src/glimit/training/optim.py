"""ADAM and L-BFGS on flat float64 parameter vectors."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError


@dataclass
class AdamState:
    n: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.n)
        if self.v is None:
            self.v = np.zeros(self.n)


def adam_step(params, grad, state):
    """One bias-corrected ADAM update; updates ``state`` in place."""
    if grad.shape != state.m.shape or params.shape != grad.shape:
        raise UsageError("parameter, gradient and moment shapes differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1 - b1) * grad
    state.v = b2 * state.v + (1 - b2) * grad * grad
    mhat = state.m / (1 - b1**state.step)
    vhat = state.v / (1 - b2**state.step)
    return params - state.lr * mhat / (np.sqrt(vhat) + state.eps)


@dataclass
class LbfgsState:
    memory: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-8
    ftol: float = 1e-12
    max_trials: int = 50
    curvature_eps: float = 1e-12
    # "relative" tests s.y > eps |s| |y|; "absolute" tests s.y > eps, which
    # rejects every pair once steps get small
    curvature_rule: str = "relative"
    pairs: deque = field(default_factory=deque)

    def push(self, s, y):
        sy = float(s @ y)
        bound = self.curvature_eps
        if self.curvature_rule == "relative":
            bound *= float(np.linalg.norm(s) * np.linalg.norm(y))
        if not sy > bound or sy <= 0.0:
            return False
        self.pairs.append((s, y, 1.0 / sy))
        while len(self.pairs) > self.memory:
            self.pairs.popleft()
        return True


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    evaluations: int
    reason: str
    line_search_failed: bool = False
    history: list = field(default_factory=list)


def _direction(g, pairs):
    """Two-loop recursion: -H g."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _cubic_min(a, fa, da, b, fb, db):
    """Minimiser of the cubic through (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    t = b - (b - a) * (db + d2 - d1) / (db - da + 2 * d2)
    return t if np.isfinite(t) else None


def strong_wolfe(fg, x, d, f0, g0, alpha, c1=1e-4, c2=0.9, max_trials=50):
    """Bracketing/zoom line search for the strong Wolfe conditions.

    Returns ``(alpha, f, g, evaluations, ok)``. On failure the best point
    with ``f < f0`` is returned, or ``alpha = 0`` when there is none.
    """
    dphi0 = float(g0 @ d)
    best = (0.0, f0, g0)
    evals = 0

    def phi(a):
        nonlocal best, evals
        f, g = fg(x + a * d)
        evals += 1
        if np.isfinite(f) and f < best[1]:
            best = (a, f, g)
        return f, g, float(g @ d)

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        while evals < max_trials:
            a = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            lo_b, hi_b = min(lo, hi), max(lo, hi)
            margin = 0.1 * (hi_b - lo_b)
            if a is None or not (lo_b + margin <= a <= hi_b - margin):
                a = 0.5 * (lo + hi)
            f, g, dphi = phi(a)
            if not np.isfinite(f) or f > f0 + c1 * a * dphi0 or f >= flo:
                hi, fhi, dhi = a, f, dphi
                if not np.isfinite(f):
                    fhi, dhi = np.inf, 0.0
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return a, f, g, True
                if dphi * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = a, f, dphi
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        return None

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = alpha
    for i in range(max_trials):
        f, g, dphi = phi(a)
        if not np.isfinite(f):
            a = 0.5 * (a_prev + a)
            continue
        if f > f0 + c1 * a * dphi0 or (i > 0 and f >= f_prev):
            r = zoom(a_prev, f_prev, d_prev, a, f, dphi)
            break
        if abs(dphi) <= -c2 * dphi0:
            return a, f, g, evals, True
        if dphi >= 0:
            r = zoom(a, f, dphi, a_prev, f_prev, d_prev)
            break
        a_prev, f_prev, d_prev = a, f, dphi
        a = 2.0 * a
        if evals >= max_trials:
            r = None
            break
    else:
        r = None
    if r is not None:
        return r[0], r[1], r[2], evals, True
    return best[0], best[1], best[2], evals, False


def lbfgs_run(x0, fg, state=None, max_iters=1000, callback=None):
    """Minimise ``fg(x) -> (f, grad)`` with L-BFGS and strong-Wolfe steps.

    Stops when ``max|grad| < gtol``, the relative decrease drops below
    ``ftol``, or after ``max_iters`` iterations. A rejected curvature pair
    or a non-descent direction falls back to steepest descent.
    """
    state = state or LbfgsState()
    x = np.array(x0, dtype=np.float64)
    f, g = fg(x)
    evals = 1
    history = [f]
    failed = False
    reason = "max_iters"
    it = 0
    if np.max(np.abs(g), initial=0.0) < state.gtol:
        return LbfgsResult(x, f, g, 0, evals, "gtol", False, history)
    steepest = not state.pairs
    while it < max_iters:
        d = -g if steepest else _direction(g, state.pairs)
        if float(g @ d) >= 0:
            d = -g
            steepest = True
        alpha = min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300)) if steepest else 1.0
        a, fn, gn, ne, ok = strong_wolfe(fg, x, d, f, g, alpha, state.c1, state.c2, state.max_trials)
        evals += ne
        it += 1
        if a == 0.0:
            failed = True
            reason = "line_search"
            break
        s = a * d
        y = gn - g
        steepest = not state.push(s, y)
        x = x + s
        f_old, f, g = f, fn, gn
        history.append(f)
        if callback is not None:
            callback(it, x, f, g)
        if not ok:
            failed = True
        if np.max(np.abs(g)) < state.gtol:
            reason = "gtol"
            break
        if abs(f_old - f) <= state.ftol * max(abs(f_old), abs(f), 1e-300):
            reason = "ftol"
            break
    return LbfgsResult(x, f, g, it, evals, reason, failed, history)
