"""Command-line entry point: ``glimit <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numeric error,
4 sweep finished with failed runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4


def _apply_threads():
    """Pin BLAS/OpenMP pools before numpy loads; 1 (default) is the strict
    single-threaded mode."""
    n = os.environ.get("GLIMIT_THREADS", "1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, n)
    return int(n) if n.isdigit() else 1


def _parser():
    p = argparse.ArgumentParser(prog="glimit", description="Learn G-limits of multiscale elliptic problems.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--benchmark", choices=["locper1d", "oscil1d", "nonper2d", "ergodic1d"])
        sp.add_argument("--eps", type=float)
        sp.add_argument("--noise", type=float)
        sp.add_argument("--n-data", type=int, dest="n_data")
        sp.add_argument("--n-res", type=int, dest="n_res")
        sp.add_argument("--seed", type=int, help="init, noise and data seed at once")
        sp.add_argument("--init-seed", type=int, dest="init_seed")
        sp.add_argument("--noise-seed", type=int, dest="noise_seed")
        sp.add_argument("--data-seed", type=int, dest="data_seed")
        sp.add_argument("--omega", type=float, nargs=2)
        sp.add_argument("--mesh-h", type=float, dest="mesh_h")
        sp.add_argument("--eval-h", type=float, dest="eval_h", help="override the evaluation grid")
        sp.add_argument("--full-scale", action="store_true", default=None, dest="full_scale")
        sp.add_argument("--collocation", choices=["grid", "uniform_random"])
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--lbfgs-iters", type=int, dest="lbfgs_iters")
        sp.add_argument("--lr", type=float)
        sp.add_argument("--batch-size", type=int, dest="batch_size")
        sp.add_argument("--out", dest="output_dir", help="output root (default $GLIMIT_OUTPUT_ROOT)")

    for name, text in [
        ("generate", "synthesize the multiscale dataset"),
        ("reference", "compute the reference G-limit and homogenized solution"),
        ("train", "train the PINN and write the error report"),
        ("evaluate", "re-evaluate a trained model"),
        ("export-plots", "write tidy CSVs for plotting"),
    ]:
        common(sub.add_parser(name, help=text))
    sw = sub.add_parser("sweep", help="one run per axis value, aggregated CSV")
    common(sw)
    sw.add_argument("--axis", required=True, choices=["eps", "noise", "ndata"])
    sw.add_argument("--values", type=float, nargs="*", default=[])
    sw.add_argument("--seeds", type=int, nargs="*", help="repeat each value for these seeds")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--csv", help="output CSV (default <root>/sweep-<axis>.csv)")
    return p


def _config(args):
    from .config import RunConfig

    base = RunConfig.load(args.config) if args.config else RunConfig(benchmark=args.benchmark or "locper1d")
    over = {k: getattr(args, k) for k in (
        "benchmark", "eps", "noise", "n_data", "n_res", "init_seed", "noise_seed", "data_seed", "mesh_h",
        "eval_h", "full_scale", "collocation", "restarts", "epochs", "lbfgs_iters", "lr", "batch_size",
        "output_dir",
    )}
    if args.omega:
        over["omega"] = list(args.omega)
    if args.seed is not None:
        for k in ("init_seed", "noise_seed", "data_seed"):
            over[k] = over[k] if over[k] is not None else args.seed
    if args.benchmark and args.config and args.benchmark != base.benchmark:
        # switching benchmark resets benchmark-specific defaults
        for k in ("eps", "n_data", "n_res"):
            over.setdefault(k, None)
        d = base.to_dict()
        d.update(benchmark=args.benchmark, eps=over["eps"], n_data=over["n_data"], n_res=over["n_res"])
        base = RunConfig.from_dict(d)
    return base.with_overrides(**over)


def main(argv=None):
    _apply_threads()
    from ..errors import ConfigurationError, NumericError, UsageError
    from . import pipeline

    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "generate":
            pipeline.generate(cfg)
        elif args.command == "reference":
            pipeline.reference(cfg)
        elif args.command == "train":
            _, rep = pipeline.run_train(cfg)
            print(rep.to_json())
        elif args.command == "evaluate":
            print(pipeline.evaluate(cfg).to_json())
        elif args.command == "export-plots":
            for f in pipeline.export_plots(cfg):
                print(f)
        elif args.command == "sweep":
            path = args.csv or cfg.run_dir().parent / f"sweep-{args.axis}.csv"
            rows = pipeline.sweep(cfg, args.axis, args.values, path, args.seeds, args.jobs)
            print(path)
            if any(r["status"] != "ok" for r in rows):
                return EXIT_PARTIAL
        if args.command in ("generate", "reference", "train"):
            print(json.dumps({"run_dir": str(cfg.run_dir()), "config_hash": cfg.hash()}))
    except (ConfigurationError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
