"""Multi-restart training: minibatch ADAM with plateau decay, then
full-batch L-BFGS, keeping the restart with the lowest final loss."""

from __future__ import annotations

import csv
import math
import time
import warnings
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..network import BoundaryWrapper, MlpSpec, PinnModel
from .loss import LossState, evaluate_loss, update_adaptive_weights
from .optim import AdamState, LbfgsState, adam_step, lbfgs_run

LOG_COLUMNS = ("restart", "phase", "epoch", "L_r", "L_d", "lambda_d", "lr", "wall_ms")


@dataclass
class TrainConfig:
    """Network sizes and optimizer settings. ``*_depth`` counts hidden layers."""

    u_depth: int = 3
    u_width: int = 30
    a_depth: int = 3
    a_width: int = 30
    a_outputs: int = 1
    coef_inputs: tuple = (0,)
    coef_floor: float | None = 1e-3
    lr: float = 1e-3
    epochs: int = 10_000
    batch_size: int = 64
    lbfgs_iters: int = 2000
    cycles: int = 1
    adaptive: bool = True
    weight_period: int = 10
    weight_rate: float = 0.1
    lambda_d0: float = 1.0
    plateau_patience: int = 2000
    plateau_tol: float = 1e-3
    plateau_factor: float = 0.5
    min_lr_ratio: float = 0.01
    restarts: int = 5
    single_thread: bool = True

    def __post_init__(self):
        self.coef_inputs = tuple(self.coef_inputs)
        if self.epochs < 0 or self.lbfgs_iters < 0 or self.cycles < 1:
            raise ConfigurationError("epochs and lbfgs_iters must be >= 0, cycles >= 1")
        if self.batch_size < 1 or self.restarts < 1 or not self.lr > 0:
            raise ConfigurationError("batch_size, restarts and lr must be positive")

    def to_dict(self):
        d = asdict(self)
        d["coef_inputs"] = list(self.coef_inputs)
        return d


@dataclass
class RestartSummary:
    index: int
    seed: int
    final_loss: float
    L_r: float = math.nan
    L_d: float = math.nan
    lambda_d: float = math.nan
    diverged: bool = False
    lbfgs_reason: str = ""
    line_search_warning: bool = False
    error: str = ""


@dataclass
class TrainResult:
    model: PinnModel
    best: int
    restarts: list
    log: list = field(default_factory=list)

    @property
    def final_loss(self):
        return self.restarts[self.best].final_loss

    def write_log(self, path):
        write_log_csv(path, self.log)


def write_log_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], str) else repr(r[c]) for c in LOG_COLUMNS])


def restart_seeds(seed, n):
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _thread_limit(single):
    if not single:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(1)


def build_model(config, problem, seed):
    dim = len(problem.domain[0])
    u_spec = MlpSpec(dim, 1, config.u_depth, config.u_width)
    a_spec = MlpSpec(len(config.coef_inputs), config.a_outputs, config.a_depth, config.a_width)
    lo, hi = problem.domain
    wrapper = BoundaryWrapper(tuple(lo), tuple(hi), getattr(problem, "g", None))
    return PinnModel.initialize(u_spec, a_spec, wrapper, seed, config.coef_inputs, config.coef_floor)


class _Plateau:
    """Halve the learning rate when the best loss stalls for ``patience`` epochs."""

    def __init__(self, lr0, patience, tol, factor, min_ratio):
        self.lr = lr0
        self.floor = lr0 * min_ratio
        self.patience, self.tol, self.factor = patience, tol, factor
        self.best = math.inf
        self.since = 0

    def update(self, epoch_loss):
        if epoch_loss < self.best * (1.0 - self.tol):
            self.best = epoch_loss
            self.since = 0
            return self.lr
        if epoch_loss < self.best:
            self.best = epoch_loss
        self.since += 1
        if self.since >= self.patience:
            self.lr = max(self.lr * self.factor, self.floor)
            self.since = 0
        return self.lr


def _run_one(index, seed, config, problem, xd, ud, xr, fr, log):
    model = build_model(config, problem, seed)
    rng = np.random.default_rng(seed)
    state = LossState(lambda_d=config.lambda_d0, alpha_w=config.weight_rate, period=config.weight_period)
    theta = model.flat()
    nd, nr = len(xd), len(xr)
    nb = max(1, math.ceil(nd / config.batch_size))
    sched = _Plateau(config.lr, config.plateau_patience, config.plateau_tol, config.plateau_factor,
                     config.min_lr_ratio)
    epoch = 0
    lb = None
    t0 = time.perf_counter()
    for _cycle in range(config.cycles):
        adam = AdamState(len(theta), lr=sched.lr)
        for _ in range(config.epochs):
            pd, pr = rng.permutation(nd), rng.permutation(nr)
            bd, br = np.array_split(pd, nb), np.array_split(pr, nb)
            sr = sd = 0.0
            for k in range(nb):
                split = config.adaptive and k == 0 and epoch % config.weight_period == 0
                res = evaluate_loss(model, xd[bd[k]], ud[bd[k]], xr[br[k]], fr[br[k]], state, theta, split)
                grad = res.grad
                if split:
                    state = update_adaptive_weights(state, res.grad_r, res.grad_d)
                    grad = state.lambda_r * res.grad_r + state.lambda_d * res.grad_d
                theta = adam_step(theta, grad, adam)
                sr += res.L_r
                sd += res.L_d
            L_r, L_d = sr / nb, sd / nb
            if not (math.isfinite(L_r) and math.isfinite(L_d)):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            log.append(dict(restart=index, phase="adam", epoch=epoch, L_r=L_r, L_d=L_d,
                            lambda_d=state.lambda_d, lr=adam.lr,
                            wall_ms=round((time.perf_counter() - t0) * 1e3, 3)))
            adam.lr = sched.update(state.lambda_r * L_r + state.lambda_d * L_d)
            epoch += 1
            if not np.all(np.isfinite(theta)):
                raise NumericError(f"non-finite parameters at epoch {epoch}")

        if config.lbfgs_iters > 0:
            cache = {}

            def fg(th):
                try:
                    r = evaluate_loss(model, xd, ud, xr, fr, state, th)
                except NumericError:
                    return math.inf, np.zeros_like(th)
                if len(cache) > 64:
                    cache.clear()
                cache[th.tobytes()] = r
                return r.total, r.grad

            def record(it, th, f, g):
                r = cache.get(th.tobytes())
                log.append(dict(restart=index, phase="lbfgs", epoch=epoch + it - 1,
                                L_r=r.L_r if r else math.nan, L_d=r.L_d if r else math.nan,
                                lambda_d=state.lambda_d, lr=math.nan,
                                wall_ms=round((time.perf_counter() - t0) * 1e3, 3)))

            lb = lbfgs_run(theta, fg, LbfgsState(), config.lbfgs_iters, callback=record)
            theta = lb.x
            epoch += lb.iterations
            if lb.line_search_failed:
                warnings.warn(f"restart {index}: line search failed ({lb.reason})", RuntimeWarning,
                              stacklevel=2)

    final = evaluate_loss(model, xd, ud, xr, fr, state, theta)
    if not math.isfinite(final.total):
        raise NumericError("non-finite final loss")
    trained = model.with_flat(theta)
    trained.meta.update(seed=seed, step=epoch, lambda_d=state.lambda_d)
    summary = RestartSummary(index, seed, final.total, final.L_r, final.L_d, state.lambda_d,
                             lbfgs_reason=lb.reason if lb else "",
                             line_search_warning=bool(lb and lb.line_search_failed))
    return trained, summary


def train(config, problem, T_d, T_r, restarts=None, seed=0, seeds=None):
    """Train ``restarts`` independently initialized models; keep the best.

    ``problem`` supplies ``domain = (lo, hi)``, ``source(points)`` and an
    optional boundary function ``g``. ``seeds`` overrides the per-restart
    seeds derived from ``seed``.
    """
    R = config.restarts if restarts is None else int(restarts)
    seeds = list(seeds) if seeds is not None else restart_seeds(seed, R)
    if len(seeds) != R:
        raise ConfigurationError("need one seed per restart")
    xd = np.asarray(T_d.points, dtype=np.float64)
    ud = np.asarray(T_d.values, dtype=np.float64)
    xr = np.asarray(T_r.points, dtype=np.float64)
    fr = np.asarray(problem.source(xr), dtype=np.float64).reshape(-1)
    log, models, summaries = [], [], []
    with _thread_limit(config.single_thread):
        for i, s in enumerate(seeds):
            try:
                m, summ = _run_one(i, s, config, problem, xd, ud, xr, fr, log)
            except NumericError as exc:
                m, summ = None, RestartSummary(i, s, math.inf, diverged=True, error=str(exc))
            models.append(m)
            summaries.append(summ)
    ok = [i for i, s in enumerate(summaries) if not s.diverged]
    if not ok:
        raise NumericError("all restarts diverged: " + "; ".join(s.error for s in summaries))
    best = min(ok, key=lambda i: summaries[i].final_loss)
    return TrainResult(models[best], best, summaries, log)
