"""Command line entry point: ``icereg <subcommand> [options]``.

Exit status is 0 on success, 1 on a usage or configuration error and 2 on
a runtime failure. Diagnostics go to stderr; data goes to files or stdout.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .criteria import aic, ric, tic
from .experiments import ESTIMATORS, ExperimentConfig, fit_estimator, run_study, with_overrides
from .info import QuadraticPenalty
from .io import load_problem, save_problem
from .model import LogisticModel
from .results import FitResult
from .synthetic import ProblemSpec, make_problem

__all__ = ["main", "load_config", "UsageError"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parse_grid(text):
    cells = []
    for chunk in text.replace(";", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid cell {chunk!r} must look like p:m:n")
        cells.append(tuple(int(v) for v in parts))
    return cells


def _ints(text):
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONFIG_KEYS = {
    "study": str,
    "grid": _parse_grid,
    "replications": int,
    "estimators": lambda t: tuple(v.strip() for v in t.split(",") if v.strip()),
    "base_seed": int,
    "seed": int,
    "out_dir": str,
    "parallelism": int,
    "n_test": int,
    "train_sizes": _ints,
    "problems": int,
    "bootstrap": int,
    "folds": int,
    "shrink_intercept": _bool,
    "theta_scale": float,
    "record_timing": _bool,
}


def load_config(path, study=None):
    """Read a flat ``key = value`` file into an :class:`ExperimentConfig`."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values["base_seed" if key == "seed" else key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    if study is not None:
        values["study"] = study
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file mirroring ExperimentConfig")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--replications", type=int)

    parser = _Parser(prog="icereg", description="Trace-penalised likelihood fits and the studies that compare them.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("gen", parents=[common], help="write a synthetic problem to a directory")
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--n-test", type=int, default=100_000)
    gen.add_argument("--theta-scale", type=float, default=1.0)

    fit = sub.add_parser("fit", parents=[common], help="fit one estimator on a problem directory")
    fit.add_argument("--problem", required=True)
    fit.add_argument("--estimator", choices=ESTIMATORS, required=True)

    for name in ("compare", "converge", "variance-ratio"):
        s = sub.add_parser(name, parents=[common], help=f"run the {name} study")
        s.add_argument("--grid", help="cells as p:m:n,p:m:n")

    crit = sub.add_parser("criteria", parents=[common], help="print AIC/TIC/RIC for a fitted theta")
    crit.add_argument("--problem", required=True)
    crit.add_argument("--fit", required=True, help="FitResult JSON file")
    crit.add_argument("--ric-lambda", type=float, help="also report RIC for a ridge penalty of this weight")
    return parser


def _cmd_gen(args):
    spec = ProblemSpec(args.p, args.m, args.n, n_test=args.n_test, seed=args.seed or 0, theta_scale=args.theta_scale)
    if not args.out:
        raise UsageError("gen requires --out DIR")
    save_problem(make_problem(spec), args.out)


def _cmd_fit(args):
    problem = load_problem(args.problem)
    result = fit_estimator(args.estimator, LogisticModel(), problem.train, args.seed or 0)
    text = result.to_json(indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_criteria(args):
    problem = load_problem(args.problem)
    fit = FitResult.from_json(Path(args.fit).read_text())
    model = LogisticModel()
    reports = [aic(model, problem.train, fit.theta), tic(model, problem.train, fit.theta)]
    if args.ric_lambda is not None:
        mask = [False] + [True] * (problem.train.p - 1)
        reports.append(ric(model, problem.train, fit.theta, QuadraticPenalty(args.ric_lambda, scale=1.0, mask=mask)))
    for r in reports:
        sys.stdout.write(r.to_json() + "\n")


def _cmd_study(args):
    study = args.command
    config = load_config(args.config, study) if args.config else ExperimentConfig(study=study)
    try:
        config = with_overrides(config, base_seed=args.seed, out_dir=args.out, parallelism=args.parallelism,
                                replications=args.replications,
                                grid=_parse_grid(args.grid) if args.grid else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not config.out_dir:
        raise UsageError(f"{study} requires --out DIR or out_dir in the config")
    run_study(config)


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"gen": _cmd_gen, "fit": _cmd_fit, "criteria": _cmd_criteria}.get(args.command, _cmd_study)
        handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"icereg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
