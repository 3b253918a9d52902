"""Command-line interface: solve / bench / sweep / plot-data / validate.

Configuration can come from a TOML file (--config); explicit flags win over
file values, which win over per-problem defaults.
"""
from __future__ import annotations

import argparse
import csv
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import harness
from .problems import catalog, validate_problem

_CONFIG_KEYS = ("problem", "n", "m", "sigma2", "gamma", "strategy", "solver",
                "max_iters", "tol", "seed", "out")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--problem", type=int, help="benchmark problem id 1..16")
    p.add_argument("--n", type=int, help="collocation grid size")
    p.add_argument("--m", type=int, help="landmark count")
    p.add_argument("--sigma2", type=float, help="kernel bandwidth")
    p.add_argument("--gamma", type=float, help="regularization weight")
    p.add_argument("--strategy", choices=harness.STRATEGIES, help="landmark sampling")
    p.add_argument("--solver", choices=harness.SOLVERS, help="solver pipeline")
    p.add_argument("--max-iters", type=int, dest="max_iters", help="Newton budget")
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--seed", type=int, help="RNG seed for sampling")
    p.add_argument("--out", help="output directory for result records")
    p.add_argument("--defaults", action="store_true",
                   help="fill unset hyperparameters from the per-problem defaults")


def _merge_config(args) -> dict:
    merged: dict = {}
    if args.config:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
        for key in _CONFIG_KEYS:
            if key in data:
                merged[key] = data[key]
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _build_config(args) -> harness.RunConfig:
    merged = _merge_config(args)
    problem_id = merged.get("problem")
    if problem_id is None:
        raise harness.InvalidConfigError("a problem id is required (--problem)")
    overrides = dict(
        m=merged.get("m"), sigma2=merged.get("sigma2"), gamma=merged.get("gamma"),
        strategy=merged.get("strategy"), solver=merged.get("solver"),
        max_iters=merged.get("max_iters"), tol=merged.get("tol"),
        seed=merged.get("seed"), n=merged.get("n"),
    )
    if args.defaults or any(merged.get(k) is None for k in ("n", "m", "sigma2", "gamma")):
        return harness.config_from_defaults(problem_id, **overrides)
    return harness.RunConfig(
        problem_id=problem_id,
        **{k: v for k, v in overrides.items() if v is not None},
    )


def cmd_solve(args) -> int:
    config = _build_config(args)
    result = harness.run(config)
    out_dir = _merge_config(args).get("out", "results")
    json_path, csv_path = harness.persist(result, out_dir)
    m = result.metrics
    print(f"problem {config.problem_id} solver {config.solver}: "
          f"MAE {m.mae:.6e} RMSE {m.rmse:.6e} Linf {m.linf:.6e}")
    print(f"wrote {json_path}")
    print(f"appended {csv_path}")
    return 0


def cmd_bench(args) -> int:
    problems = [int(x) for x in args.problems.split(",")] if args.problems else []
    solvers = [s for s in args.solvers.split(",") if s] if args.solvers is not None else ["nls"]
    merged = _merge_config(args)
    out_dir = merged.get("out", "results")

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["problem", "solver", "MAE", "RMSE", "Linf", "R2",
                     "train_s", "predict_s"])
    for pid in problems:
        for solver in solvers:
            if solver not in harness.SOLVERS:
                writer.writerow([pid, solver, "", "", "", "", "", "error: unknown solver"])
                continue
            try:
                config = harness.config_from_defaults(
                    pid, solver=solver,
                    n=merged.get("n"), m=merged.get("m"),
                    sigma2=merged.get("sigma2"), gamma=merged.get("gamma"),
                    strategy=merged.get("strategy"), seed=merged.get("seed"),
                    max_iters=merged.get("max_iters"), tol=merged.get("tol"),
                )
                result = harness.run(config)
                harness.persist(result, out_dir)
                m = result.metrics
                writer.writerow([
                    pid, solver,
                    harness._sig17(m.mae), harness._sig17(m.rmse),
                    harness._sig17(m.linf),
                    harness._sig17(m.r2) if m.r2 is not None else "",
                    harness._sig17(result.timings.train_seconds),
                    harness._sig17(result.timings.predict_seconds),
                ])
            except Exception as exc:  # per-cell failure: record, keep going
                writer.writerow([pid, solver, "", "", "", "", "",
                                 f"error: {type(exc).__name__}: {exc}"])
    return 0


def cmd_sweep(args) -> int:
    merged = _merge_config(args)
    problem_id = merged.get("problem")
    if problem_id is None:
        raise harness.InvalidConfigError("a problem id is required (--problem)")
    values = [float(v) for v in args.values.split(",")]
    if sorted(values) != values or any(v <= 0 for v in values):
        raise harness.InvalidConfigError("sweep values must be positive and sorted")

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([args.axis, "train_s", "predict_s", "MAE"])
    out_dir = merged.get("out", "results")
    for v in values:
        overrides = dict(
            n=merged.get("n"), m=merged.get("m"), sigma2=merged.get("sigma2"),
            gamma=merged.get("gamma"), strategy=merged.get("strategy"),
            solver=merged.get("solver"), seed=merged.get("seed"),
            max_iters=merged.get("max_iters"), tol=merged.get("tol"),
        )
        if args.axis in ("n", "m"):
            overrides[args.axis] = int(v)
        else:
            overrides[args.axis] = v
        try:
            config = harness.config_from_defaults(problem_id, **overrides)
            result = harness.run(config)
            harness.persist(result, out_dir)
            writer.writerow([
                harness._sig17(v),
                harness._sig17(result.timings.train_seconds),
                harness._sig17(result.timings.predict_seconds),
                harness._sig17(result.metrics.mae),
            ])
        except Exception as exc:
            writer.writerow([harness._sig17(v), "", "", f"error: {type(exc).__name__}"])
    return 0


def cmd_plotdata(args) -> int:
    config = _build_config(args)
    result = harness.run(config)
    rows = harness.plot_data(result)
    writer = csv.DictWriter(sys.stdout, fieldnames=["t", "y_reference", "y_predicted", "abs_error"],
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return 0


def cmd_validate(args) -> int:
    ok = True
    for problem in catalog():
        report = validate_problem(problem)
        status = "PASS" if report.passed else "FAIL"
        ok = ok and report.passed
        worst = max(report.checks, key=lambda c: c.magnitude / c.threshold)
        print(f"problem {problem.id:2d} [{status}] worst check {worst.name}: "
              f"{worst.magnitude:.3e} (tol {worst.threshold:.1e})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nysode",
        description="Low-rank kernel collocation ODE solver and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver configuration")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="problems x solvers benchmark table")
    _add_run_flags(p)
    p.add_argument("--problems", help="comma-separated problem ids")
    p.add_argument("--solvers", help="comma-separated solvers (default nls)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="scaling sweep over one axis")
    _add_run_flags(p)
    p.add_argument("--axis", choices=["n", "m", "sigma2", "gamma"], required=True)
    p.add_argument("--values", required=True, help="comma-separated sorted values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot-data", help="per-point CSV of reference vs prediction")
    _add_run_flags(p)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("validate", help="check all catalog references")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.InvalidConfigError as exc:
        print(f"invalid-config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
