"""End-to-end steps behind the CLI: data synthesis, references, training,
evaluation, sweeps and tidy CSV exports. Every step writes into the run
directory of its config and stamps the config hash on its outputs."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np

from ..data import CollocationSet, SampleSet, add_noise, make_collocation, sample_equispaced, write_manifest
from ..errors import ConfigurationError, GlimitError, NumericError
from ..fem import FemSolution, Mesh, solve_dirichlet
from ..homogenize import GLimitField
from ..metrics import ErrorReport, relative_l2
from ..network import PinnModel
from ..training import TrainConfig, train
from .registry import reference_glimit

DATA_FILE = "data.csv"
COLLOCATION_FILE = "collocation.csv"
REF_A_FILE = "reference_glimit.csv"
REF_U_FILE = "reference_u0.npz"
MODEL_FILE = "model.json"
LOG_FILE = "train_log.csv"
REPORT_JSON = "error_report.json"
REPORT_CSV = "error_report.csv"
SWEEP_COLUMNS = ("axis", "value", "seed", "e_A", "e_u0", "wall_s", "status", "error")


def _dir(config):
    d = config.run_dir()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest(path, config, step, files, extra=None):
    doc = {"step": step, "config_hash": config.hash(), "config": config.to_dict(), "files": files}
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def _mesh(bench, h):
    n = int(round((bench.domain[1][0] - bench.domain[0][0]) / h))
    if bench.dim == 1:
        return Mesh.interval(bench.domain[0][0], bench.domain[1][0], n)
    return Mesh.box(bench.domain[0], bench.domain[1], n)


def fem_run_id(config):
    key = json.dumps(
        [config.benchmark, config.eps, config.data_h(), list(config.omega) if config.bench.needs_omega else None]
    )
    return hashlib.sha256(key.encode()).hexdigest()[:12]


# generate

def generate(config):
    """Solve the multiscale problem, sample T_d (with noise) and T_r."""
    b = config.bench
    out = _dir(config)
    h = config.data_h()
    coef = b.coefficient(config.eps, config.omega)
    lo, hi = coef.check_bounds()
    sol = solve_dirichlet(_mesh(b, h), coef, b.source, eps=config.eps)
    prov = {"eps": config.eps, "h": h, "fem_run": fem_run_id(config)}
    clean = sample_equispaced(sol, config.n_data, prov)
    data = add_noise(clean, config.noise, config.noise_seed)
    data.to_csv(out / DATA_FILE)
    colloc = make_collocation(b.domain, config.n_res, config.collocation, config.data_seed)
    np.savetxt(out / COLLOCATION_FILE, colloc.points, delimiter=",", fmt="%.17g",
               header=",".join(["x1", "x2"][: b.dim]), comments="")
    extra = {"eps": config.eps, "h": h, "coefficient_range": [lo, hi]}
    if b.needs_omega:
        extra["omega"] = list(config.omega)
    write_manifest(out / "data_manifest.json", DATA_FILE, prov["fem_run"], config.hash(), extra)
    return data, colloc.points


def load_data(config):
    out = config.run_dir()
    if not (out / DATA_FILE).exists() or not (out / COLLOCATION_FILE).exists():
        return generate(config)
    data = SampleSet.from_csv(out / DATA_FILE)
    pts = np.loadtxt(out / COLLOCATION_FILE, delimiter=",", skiprows=1, ndmin=2)
    return data, pts


# reference

def _coef_from_glimit(field, dim):
    if dim == 1:
        return lambda p: field(p)
    return lambda p: np.asarray(field(p)).reshape(len(p), -1)


def reference(config):
    """Reference G-limit and the FEM homogenized solution driven by it."""
    b = config.bench
    out = _dir(config)
    opts = dict(config.reference)
    field = reference_glimit(b, config.eps, opts)
    field.to_csv(out / REF_A_FILE)
    if b.dim == 1:
        ref_h = opts.get("u0_h", 2.0**-15 if not config.full_scale else 1e-5)
    else:
        ref_h = opts.get("u0_h", 1.0 / 512)
    u0 = solve_dirichlet(_mesh(b, ref_h), _coef_from_glimit(field, b.dim), b.source)
    u0.save(out / REF_U_FILE)
    _manifest(out / "reference_manifest.json", config, "reference", [REF_A_FILE, REF_U_FILE],
              {"provenance": field.provenance, "u0_h": ref_h, "options": opts, "meta": field.meta})
    return field, u0


def load_reference(config):
    out = config.run_dir()
    if not (out / REF_A_FILE).exists() or not (out / REF_U_FILE).exists():
        return reference(config)
    b = config.bench
    field = GLimitField.from_csv(out / REF_A_FILE, axis=b.coef_inputs[0])
    if field.provenance == "analytic":
        # exact closed forms are re-attached rather than interpolated
        field = reference_glimit(b, config.eps, dict(config.reference))
    return field, FemSolution.load(out / REF_U_FILE)


# train / evaluate

def train_config(config):
    return TrainConfig(**config.train_settings())


def run_train(config, evaluate_after=True):
    b = config.bench
    out = _dir(config)
    data, colloc = load_data(config)
    tcfg = train_config(config)
    result = train(tcfg, b, data, CollocationSet(colloc), seed=config.init_seed)
    result.model.save(out / MODEL_FILE, step=result.model.meta.get("step", 0))
    result.write_log(out / LOG_FILE)
    summary = {
        "config_hash": config.hash(),
        "best": result.best,
        "restarts": [vars(s) for s in result.restarts],
        "train": tcfg.to_dict(),
    }
    with open(out / "restarts.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
    report = evaluate(config, result.model, result) if evaluate_after else None
    return result, report


def evaluate(config, model=None, result=None):
    b = config.bench
    out = _dir(config)
    if model is None:
        if not (out / MODEL_FILE).exists():
            raise ConfigurationError(f"no trained model in {out}; run train first")
        model = PinnModel.load(out / MODEL_FILE, b.g)
    field, u0 = load_reference(config)
    grid = b.eval_grid(config.eval_h)
    A_hat = model.predict_coefficient(grid)
    A_ref = np.asarray(field(grid)).reshape(len(grid), -1)
    e_A = relative_l2(A_hat, A_ref, grid)
    e_u = relative_l2(model.predict_solution(grid), u0.evaluate(grid), grid)
    if not (math.isfinite(e_A) and math.isfinite(e_u)):
        raise NumericError("non-finite error on the evaluation grid")
    meta = {
        "benchmark": config.benchmark,
        "eps": config.eps,
        "noise": config.noise,
        "n_data": config.n_data,
        "n_res": config.n_res,
        "seed": config.init_seed,
        "noise_seed": config.noise_seed,
        "restarts": config.restarts,
        "config_hash": config.hash(),
        "A_range": [float(A_hat.min()), float(A_hat.max())],
    }
    if b.needs_omega:
        meta["omega"] = list(config.omega)
    if result is not None:
        meta["best_restart"] = result.best
        meta["final_loss"] = result.final_loss
    h = b.eval_h if config.eval_h is None else config.eval_h
    report = ErrorReport(
        e_A,
        e_u,
        {"h": h, "points": len(grid), "override": config.eval_h is not None},
        {"A": field.provenance, "u0": "fem"},
        meta,
    )
    report.save_json(out / REPORT_JSON)
    report.to_csv(out / REPORT_CSV)
    return report


def run_all(config):
    return run_train(config)[1]


# sweep

AXES = {"eps": "eps", "noise": "noise", "ndata": "n_data"}


def _sweep_job(args):
    base, axis, value, seed = args
    t0 = time.perf_counter()
    try:
        over = {AXES[axis]: value}
        if seed is not None:
            over.update(init_seed=seed, noise_seed=seed, data_seed=seed)
        cfg = base.with_overrides(**over)
        rep = run_all(cfg)
        return dict(axis=axis, value=value, seed=seed, e_A=rep.e_A, e_u0=rep.e_u0,
                    wall_s=time.perf_counter() - t0, status="ok", error="")
    except (GlimitError, ValueError, ArithmeticError) as exc:
        return dict(axis=axis, value=value, seed=seed, e_A=math.nan, e_u0=math.nan,
                    wall_s=time.perf_counter() - t0, status="failed", error=str(exc))


def sweep(base, axis, values, path, seeds=None, jobs=1):
    """One run per (value, seed); failures are recorded and do not stop the sweep.

    Returns the rows; the CSV at ``path`` is written even for no values.
    """
    if axis not in AXES:
        raise ConfigurationError(f"sweep axis must be one of {sorted(AXES)}")
    if axis == "ndata":
        values = [int(v) for v in values]
    tasks = [(base, axis, v, s) for v in values for s in (seeds if seeds else [None])]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_job, tasks))
    else:
        rows = [_sweep_job(t) for t in tasks]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else r[k]) for k in SWEEP_COLUMNS})
    return rows


# exports

def export_plots(config, out_dir=None):
    """Tidy CSVs for external plotting: G-limits, solutions, errors, log."""
    b = config.bench
    run = config.run_dir()
    dest = Path(out_dir) if out_dir else run / "plots"
    dest.mkdir(parents=True, exist_ok=True)
    if not (run / MODEL_FILE).exists():
        raise ConfigurationError(f"no trained model in {run}; run train first")
    model = PinnModel.load(run / MODEL_FILE, b.g)
    field, u0 = load_reference(config)
    grid = b.eval_grid(config.eval_h if config.eval_h else (1e-3 if b.dim == 1 else None))
    coords = ["x"] if b.dim == 1 else ["x1", "x2"]
    A_hat = model.predict_coefficient(grid)
    A_ref = np.asarray(field(grid)).reshape(len(grid), -1)
    coef = b.coefficient(config.eps, config.omega)(grid)
    with open(dest / "glimit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coords + ["component", "learned", "reference", "multiscale"])
        for k, p in enumerate(grid):
            for c in range(A_hat.shape[1]):
                name = "A" if A_hat.shape[1] == 1 else f"A{c + 1}{c + 1}"
                w.writerow([*map(repr, map(float, p)), name, repr(float(A_hat[k, c])),
                            repr(float(A_ref[k, c])), repr(float(coef[k]))])
    u_hat = model.predict_solution(grid)
    u_ref = u0.evaluate(grid)
    with open(dest / "solution.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coords + ["learned", "reference", "abs_error"])
        for p, a, r in zip(grid, u_hat, u_ref):
            w.writerow([*map(repr, map(float, p)), repr(float(a)), repr(float(r)), repr(float(abs(a - r)))])
    files = ["glimit.csv", "solution.csv"]
    if (run / LOG_FILE).exists():
        (dest / "training_log.csv").write_text((run / LOG_FILE).read_text())
        files.append("training_log.csv")
    _manifest(dest / "manifest.json", config, "export-plots", files)
    return [dest / f for f in files]
