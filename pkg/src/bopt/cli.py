"""Command-line front end.

Four subcommands: ``optimize`` runs one scalar session against a named
or user-supplied objective and writes a JSONL trace, ``pref-sim`` runs
a simulated preference study and reports queries-to-target, ``fit``
fits kernel hyperparameters to a data file, and ``serve`` starts the
HTTP service. Every flag falls back to an environment variable named
``BOPT_<FLAG>`` (uppercase, dashes as underscores) before its built-in
default; an explicit flag always wins. Trace and file formats are
documented in docs/trace-schema.md.
"""

from __future__ import annotations

import argparse
import importlib
import json
import os
import sys

import numpy as np

from .acquisition import ACQUISITION_KINDS, AcquisitionSpec
from .benchmarks import OBJECTIVES, BenchmarkObjective, SimulatedUser, get_objective, run_preference_benchmark
from .gp import ObservationSet, fit_hyperparameters, log_marginal_likelihood
from .kernels import KernelSpec, matern, squared_exp_iso
from .optimizer import BayesianOptimizer
from .preference import STRATEGIES

__all__ = ["main"]

ENV_PREFIX = "BOPT_"

KERNEL_CHOICES = {
    "squared-exp": lambda ls, sv, nv: squared_exp_iso(ls, sv, nv),
    "matern12": lambda ls, sv, nv: matern(0.5, ls, sv, nv),
    "matern32": lambda ls, sv, nv: matern(1.5, ls, sv, nv),
    "matern52": lambda ls, sv, nv: matern(2.5, ls, sv, nv),
}


def _env_name(flag: str) -> str:
    return ENV_PREFIX + flag.strip("-").replace("-", "_").upper()


def _add(parser: argparse.ArgumentParser, flag: str, *, cast=str, default=None, **kw):
    """add_argument with the environment fallback baked into the default."""
    raw = os.environ.get(_env_name(flag))
    if raw is not None:
        try:
            default = cast(raw)
        except ValueError:
            parser.error(f"{_env_name(flag)}={raw!r} is not a valid value for {flag}")
    parser.add_argument(flag, type=cast, default=default, **kw)


def _resolve_objective(name: str, bounds_json: str | None) -> BenchmarkObjective:
    """Registry name, or ``module:callable`` with explicit --bounds."""
    if ":" not in name:
        return get_objective(name)
    if bounds_json is None:
        raise SystemExit("error: a module:callable objective needs --bounds")
    module_name, _, attr = name.partition(":")
    try:
        target = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise SystemExit(f"error: cannot import objective {name!r}: {exc}")
    bounds = np.asarray(json.loads(bounds_json), dtype=float)
    return BenchmarkObjective(name=name, bounds=bounds,
                              evaluator=lambda x: float(target(x)))


def _open_output(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _cmd_optimize(args) -> int:
    objective = _resolve_objective(args.objective, args.bounds)
    kernel = KERNEL_CHOICES[args.kernel](args.length_scale, 1.0, args.noise)
    session = BayesianOptimizer(
        objective.bounds, kernel=kernel,
        acquisition=AcquisitionSpec(kind=args.acquisition),
        refit_period=args.refit_period, rng_seed=args.seed,
    )
    stream, owned = _open_output(args.output)
    try:
        for i in range(args.iterations):
            x = session.propose()
            y = objective(x)
            session.observe(x, y)
            best = session.best()
            record = {
                "iteration": i + 1,
                "proposal": [float(v) for v in x],
                "observation": y,
                "best_location": [float(v) for v in best.location],
                "best_value": best.value,
            }
            stream.write(json.dumps(record) + "\n")
            stream.flush()
    finally:
        if owned:
            stream.close()
    if args.iterations > 0:
        best = session.best()
        print(f"best {best.value:.6g} at "
              f"[{', '.join(f'{v:.6g}' for v in best.location)}] "
              f"after {args.iterations} iterations", file=sys.stderr)
    if args.save is not None:
        session.save(args.save)
    return 0


def _cmd_pref_sim(args) -> int:
    objective = get_objective(args.objective)
    user = SimulatedUser(objective, decision_noise=args.noise)
    result = run_preference_benchmark(
        user, strategy=args.strategy, target_tolerance=args.target_tolerance,
        max_queries=args.max_queries, repetitions=args.trials,
        rng_seed=args.seed,
    )
    if args.output is not None:
        stream, owned = _open_output(args.output)
        try:
            for trial, (n, hit) in enumerate(zip(result.queries, result.reached)):
                stream.write(json.dumps(
                    {"trial": trial, "queries": int(n), "reached": bool(hit)}
                ) + "\n")
        finally:
            if owned:
                stream.close()
    print(json.dumps({
        "objective": args.objective,
        "strategy": args.strategy,
        "trials": args.trials,
        "mean_queries": result.mean,
        "std_queries": result.std,
        "reached_fraction": float(np.mean(result.reached)),
    }))
    return 0


def _cmd_fit(args) -> int:
    with open(args.data, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        points = np.asarray(payload["points"], dtype=float)
        values = np.asarray(payload["values"], dtype=float)
    except KeyError as exc:
        raise SystemExit(f"error: data file is missing key {exc}")
    if points.ndim == 1:
        points = points[:, None]
    if "bounds" in payload:
        bounds = np.asarray(payload["bounds"], dtype=float)
    else:
        # pad the data's hull so boundary points stay strictly inside
        span = np.ptp(points, axis=0)
        pad = np.where(span > 0, 0.05 * span, 1.0)
        bounds = np.stack([points.min(axis=0) - pad, points.max(axis=0) + pad], axis=1)
    data = ObservationSet(points, values, bounds)
    base = KERNEL_CHOICES[args.kernel](args.length_scale, 1.0, args.noise)
    fitted = fit_hyperparameters(data, base=base, rng_seed=args.seed,
                                 fit_noise=args.fit_noise)
    print(json.dumps({
        "kernel": fitted.to_dict(),
        "log_marginal_likelihood": log_marginal_likelihood(fitted, data),
        "observations": data.t,
    }, indent=2))
    return 0


def _cmd_serve(args) -> int:
    from . import service

    service.run(host=args.host, port=args.port, data_dir=args.data_dir)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bopt",
        description="Bayesian optimization sessions, preference studies, and the gallery service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run one scalar optimization session")
    _add(p, "--objective", default="two_bumps_1d",
         help=f"registry name ({', '.join(sorted(OBJECTIVES))}) or module:callable")
    _add(p, "--bounds", default=None,
         help="JSON [[lo, hi], ...]; required for module:callable objectives")
    _add(p, "--acquisition", default="ei", help=f"one of {', '.join(ACQUISITION_KINDS)}")
    _add(p, "--iterations", cast=int, default=30)
    _add(p, "--seed", cast=int, default=0)
    _add(p, "--kernel", default="squared-exp",
         help=f"one of {', '.join(sorted(KERNEL_CHOICES))}")
    _add(p, "--length-scale", cast=float, default=0.15)
    _add(p, "--noise", cast=float, default=0.0,
         help="observation noise variance; 0 means noise-free")
    _add(p, "--refit-period", cast=int, default=1)
    _add(p, "--output", default="-", help="trace file (JSONL), - for stdout")
    _add(p, "--save", default=None, help="write the finished session document here")
    p.set_defaults(handler=_cmd_optimize)

    p = sub.add_parser("pref-sim", help="simulated preference study")
    _add(p, "--objective", default="two_bumps_1d",
         help=f"one of {', '.join(sorted(OBJECTIVES))}")
    _add(p, "--strategy", default="max_ei", help=f"one of {', '.join(STRATEGIES)}")
    _add(p, "--trials", cast=int, default=50)
    _add(p, "--noise", cast=float, default=0.05, help="simulated decision noise")
    _add(p, "--seed", cast=int, default=0)
    _add(p, "--target-tolerance", cast=float, default=0.05)
    _add(p, "--max-queries", cast=int, default=60)
    _add(p, "--output", default=None, help="per-trial JSONL file, - for stdout")
    p.set_defaults(handler=_cmd_pref_sim)

    p = sub.add_parser("fit", help="fit kernel hyperparameters to a data file")
    p.add_argument("data", help="JSON file with points, values, optional bounds")
    _add(p, "--kernel", default="squared-exp",
         help=f"one of {', '.join(sorted(KERNEL_CHOICES))}")
    _add(p, "--length-scale", cast=float, default=1.0, help="starting value")
    _add(p, "--noise", cast=float, default=0.1, help="starting noise variance")
    p.add_argument("--fit-noise", action="store_true",
                   help="also fit the noise variance")
    _add(p, "--seed", cast=int, default=0)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("serve", help="start the HTTP service")
    _add(p, "--host", default="127.0.0.1")
    _add(p, "--port", cast=int, default=8765)
    _add(p, "--data-dir", default="bopt-sessions",
         help="directory for persisted session documents")
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
