"""Command-line entry point: ``adlangevin {run,sweep,gen-data,fit-order}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..core import ConfigurationError
from ..models import DATASET_SPECS, generate_synthetic_data, save_dataset
from ..observables import InsufficientDataError, fit_order
from .config import EXPERIMENTS, MODEL_DEFAULTS, ExperimentConfig, _parse_scalar, load_config
from .experiments import run_experiment
from .results import csv_text, read_csv, write_csv, write_manifest

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


def _model_overrides(experiment: str, pairs: list[str]) -> dict:
    defaults = MODEL_DEFAULTS[experiment]
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigurationError(f"--model: expected key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in defaults:
            raise ConfigurationError(f"model.{key}: unknown key for {experiment}")
        if key == "truth":
            out[key] = [float(v) for v in raw.split(",")]
        else:
            out[key] = _parse_scalar(f"model.{key}", raw, defaults[key])
    return out


def _emit(result, config, out: str | None) -> None:
    if out:
        path = write_csv(result, out)
        write_manifest(result, path, config)
        print(f"wrote {path}")
    else:
        sys.stdout.write(csv_text(result))


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config)
    _emit(result, config, args.out or config.output)
    return 0


def cmd_sweep(args) -> int:
    overrides = dict(
        h0=args.h0,
        growth=args.growth,
        count=args.n_steps,
        runs=args.runs,
        seed=args.seed,
        output=args.out,
        replicas=args.replicas,
        burn_in_fraction=args.burn_in,
        model=_model_overrides(args.experiment, args.model or []),
    )
    optional = dict(
        sim_time=args.sim_time, beta=args.beta, sigma_a=args.sigma_a, mu=args.mu,
        max_steps_per_cell=args.max_steps_per_cell,
    )
    overrides.update({k: v for k, v in optional.items() if v is not None})
    if args.metrics:
        overrides["metrics"] = tuple(m.strip() for m in args.metrics.split(","))
    config = ExperimentConfig.create(args.experiment, args.methods, **overrides)
    result = run_experiment(config)
    _emit(result, config, args.out)
    return 0


def cmd_gen_data(args) -> int:
    ds = generate_synthetic_data(args.spec, args.seed, args.n)
    path = save_dataset(ds, args.out)
    print(f"wrote {path} ({ds.n} rows, seed {ds.seed})")
    return 0


def cmd_fit_order(args) -> int:
    result = read_csv(args.input)
    metrics = [args.metric] if args.metric else result.metrics
    if args.method not in result.methods:
        raise ConfigurationError(f"--method: {args.method!r} not in {args.input}")
    for metric in metrics:
        points = result.series(args.method, metric)
        if not points:
            raise ConfigurationError(f"--metric: {metric!r} not in {args.input}")
        fit = fit_order(points)
        print(f"{args.method} {metric}: slope {fit.slope:.4f} +/- {fit.half_width():.4f} (stderr {fit.stderr:.4f}, {fit.n_points} points)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adlangevin", description="Adaptive Langevin thermostat experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress per cell")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the sweep described by a config file")
    r.add_argument("config", help="INI-style experiment config")
    r.add_argument("--out", help="CSV path (overrides experiment.output)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a stepsize sweep given on the command line")
    s.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    s.add_argument("--methods", required=True, help="comma-separated, e.g. BADODAB,PAD,SGLD")
    s.add_argument("--h0", type=float, required=True, help="first stepsize")
    s.add_argument("--growth", type=float, required=True, help="stepsize ratio, e.g. 1.1")
    s.add_argument("--n-steps", type=int, required=True, help="number of stepsizes")
    s.add_argument("--runs", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", help="CSV path; stdout when omitted")
    s.add_argument("--replicas", type=int, default=1, help="vectorised trajectories per run")
    s.add_argument("--sim-time", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--sigma-a", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--burn-in", type=float, default=0.2)
    s.add_argument("--max-steps-per-cell", type=int)
    s.add_argument("--metrics", help="comma-separated metric names")
    s.add_argument("--model", action="append", metavar="KEY=VALUE", help="model parameter, repeatable")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-data", help="write a synthetic data set")
    g.add_argument("--spec", required=True, choices=DATASET_SPECS)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, help="number of records")
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit-order", help="fit log-log slopes from a sweep CSV")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--method", required=True)
    f.add_argument("--metric")
    f.set_defaults(func=cmd_fit_order)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
