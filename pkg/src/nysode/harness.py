"""Run configuration, pipeline execution, and result persistence.

A RunConfig names a benchmark problem, a solver, and hyperparameters; run()
executes the pipeline, times the train/predict phases, and computes error
metrics on the training grid (plot data uses its own 1000-point grid).
Results serialize to line-delimited JSON plus a CSV row, with 17 significant
digits so reruns can be diffed exactly.  Result files are append-only: each
run gets a fresh timestamped JSON file and appends to results.csv.
"""
from __future__ import annotations

import csv
import datetime
import io
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import baselines, linear, metrics, newton, nystrom
from .kernel import RbfKernel
from .problems import BenchmarkProblem, get_problem, grid_for, reference_solution

ARTIFACT_VERSION = "0.1.0"

SOLVERS = ("nls", "full_feature", "rk4", "eab")
STRATEGIES = ("equidistant", "random", "leverage")


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem_id: int
    n: int
    m: int
    sigma2: float
    gamma: float
    strategy: str = "equidistant"
    solver: str = "nls"
    max_iters: Optional[int] = None
    tol: Optional[float] = None
    seed: int = 0
    output_dir: Optional[str] = None
    drop_tol: float = nystrom.DEFAULT_DROP_TOL

    def validate(self) -> None:
        if not 1 <= self.problem_id <= 16:
            raise InvalidConfigError(f"problem id {self.problem_id} not in 1..16")
        if self.solver not in SOLVERS:
            raise InvalidConfigError(f"solver must be one of {SOLVERS}")
        if self.strategy not in STRATEGIES:
            raise InvalidConfigError(f"strategy must be one of {STRATEGIES}")
        if self.n < 3:
            raise InvalidConfigError("n must be at least 3")
        if self.solver == "nls" and not 2 <= self.m <= self.n:
            raise InvalidConfigError(f"m={self.m} must satisfy 2 <= m <= n={self.n}")
        if self.sigma2 <= 0 or self.gamma <= 0:
            raise InvalidConfigError("sigma2 and gamma must be positive")


def config_from_defaults(problem_id: int, **overrides) -> RunConfig:
    d = get_problem(problem_id).defaults
    base = dict(problem_id=problem_id, n=d.n, m=d.m, sigma2=d.sigma2,
                gamma=d.gamma, max_iters=d.newton_iters)
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**base)


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    metrics: metrics.ErrorMetrics
    timings: metrics.Timings
    m_eff: Optional[int] = None
    kkt_residual: Optional[float] = None
    condition_residual: Optional[float] = None
    newton_trace: Optional[tuple[float, ...]] = None
    newton_converged: Optional[bool] = None
    error: Optional[str] = None
    created_at: str = ""
    artifact_version: str = ARTIFACT_VERSION
    model: Optional[linear.PrimalModel] = None   # not serialized

    def to_record(self) -> dict:
        rec = {
            "artifact_version": self.artifact_version,
            "created_at": self.created_at,
            "config": {
                "problem_id": self.config.problem_id,
                "n": self.config.n,
                "m": self.config.m,
                "sigma2": self.config.sigma2,
                "gamma": self.config.gamma,
                "strategy": self.config.strategy,
                "solver": self.config.solver,
                "max_iters": self.config.max_iters,
                "tol": self.config.tol,
                "seed": self.config.seed,
            },
            "metrics": self.metrics.as_dict(),
            "timings": {
                "train_seconds": self.timings.train_seconds,
                "predict_seconds": self.timings.predict_seconds,
            },
            "m_eff": self.m_eff,
            "kkt_residual": self.kkt_residual,
            "condition_residual": self.condition_residual,
            "newton_trace": list(self.newton_trace) if self.newton_trace else None,
            "newton_converged": self.newton_converged,
            "error": self.error,
        }
        return rec


def _sig17(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _strategy_obj(config: RunConfig, kernel: RbfKernel) -> nystrom.SamplingStrategy:
    if config.strategy == "equidistant":
        return nystrom.Equidistant()
    if config.strategy == "random":
        return nystrom.Random(seed=config.seed)
    return nystrom.LeverageScore(seed=config.seed, kernel=kernel)


def run(config: RunConfig) -> RunResult:
    config.validate()
    problem = get_problem(config.problem_id)
    created = datetime.datetime.now(datetime.timezone.utc).isoformat()

    if config.solver in ("rk4", "eab"):
        return _run_stepper(config, problem, created)
    if config.solver == "full_feature":
        return _run_full_feature(config, problem, created)
    return _run_nls(config, problem, created)


def _run_nls(config: RunConfig, problem: BenchmarkProblem, created: str) -> RunResult:
    grid = grid_for(problem, config.n)
    kernel = RbfKernel(sigma2=config.sigma2)

    t0 = time.perf_counter()
    landmarks = nystrom.select_landmarks(_strategy_obj(config, kernel), grid, config.m)
    fmap = nystrom.build_feature_map(kernel, landmarks, drop_tol=config.drop_tol)

    trace = None
    converged = None
    kkt_res = None
    cond_res = None
    if problem.is_linear:
        system = linear.assemble(problem.spec, problem.conditions, fmap, grid, config.gamma)
        model = linear.solve(system, fmap)
        train = time.perf_counter() - t0
        report = linear.check_kkt(model, system)
        kkt_res = report.linear_residual
        cond_res = float(np.max(report.condition_residuals))
    else:
        iters = config.max_iters or problem.defaults.newton_iters or 100
        opts = newton.NewtonOptions(max_iters=iters, tol=config.tol)
        try:
            model, ntrace = newton.solve_nonlinear(
                problem.spec, problem.conditions, fmap, grid, config.gamma, opts)
        except newton.MaxItersExceeded as exc:
            # budget exhausted: report the last iterate, as the tables do
            model, ntrace = exc.model, exc.trace
        train = time.perf_counter() - t0
        trace = tuple(ntrace.residual_norms)
        converged = ntrace.converged

    t0 = time.perf_counter()
    predicted = model.predict(0, grid)
    predict = time.perf_counter() - t0

    err = metrics.compute_errors(predicted, reference_solution(problem, grid))
    return RunResult(
        config=config, metrics=err,
        timings=metrics.Timings(train, predict),
        m_eff=fmap.m_eff, kkt_residual=kkt_res, condition_residual=cond_res,
        newton_trace=trace, newton_converged=converged,
        created_at=created, model=model,
    )


def _run_full_feature(config: RunConfig, problem: BenchmarkProblem, created: str) -> RunResult:
    grid = grid_for(problem, config.n)
    model, train = baselines.full_feature_baseline(
        problem, config.gamma, config.sigma2, config.n, drop_tol=config.drop_tol)
    t0 = time.perf_counter()
    predicted = model.predict(0, grid)
    predict = time.perf_counter() - t0
    err = metrics.compute_errors(predicted, reference_solution(problem, grid))
    return RunResult(
        config=config, metrics=err,
        timings=metrics.Timings(train, predict),
        m_eff=model.feature_map.m_eff,
        created_at=created, model=model,
    )


def _run_stepper(config: RunConfig, problem: BenchmarkProblem, created: str) -> RunResult:
    t1, tn = problem.domain
    h = (tn - t1) / (config.n - 1)
    method = "rk4" if config.solver == "rk4" else "ab"
    t0 = time.perf_counter()
    ts, ys = baselines.integrate(problem, baselines.StepperConfig(step=h, method=method))
    elapsed = time.perf_counter() - t0
    err = metrics.compute_errors(ys, reference_solution(problem, ts))
    # a marching method has no separate predict phase; the single integrate
    # time is reported in both columns
    return RunResult(
        config=config, metrics=err,
        timings=metrics.Timings(elapsed, elapsed),
        created_at=created,
    )


# ---------------------------------------------------------------------------
# persistence

CSV_FIELDS = (
    "created_at", "problem", "solver", "strategy", "n", "m", "m_eff",
    "sigma2", "gamma", "seed", "mae", "rmse", "linf", "r2",
    "train_s", "predict_s", "kkt_residual", "error",
)


def result_csv_row(result: RunResult) -> dict:
    c = result.config
    return {
        "created_at": result.created_at,
        "problem": c.problem_id,
        "solver": c.solver,
        "strategy": c.strategy,
        "n": c.n,
        "m": c.m,
        "m_eff": result.m_eff if result.m_eff is not None else "",
        "sigma2": _sig17(c.sigma2),
        "gamma": _sig17(c.gamma),
        "seed": c.seed,
        "mae": _sig17(result.metrics.mae),
        "rmse": _sig17(result.metrics.rmse),
        "linf": _sig17(result.metrics.linf),
        "r2": _sig17(result.metrics.r2) if result.metrics.r2 is not None else "",
        "train_s": _sig17(result.timings.train_seconds),
        "predict_s": _sig17(result.timings.predict_seconds),
        "kkt_residual": _sig17(result.kkt_residual) if result.kkt_residual is not None else "",
        "error": result.error or "",
    }


def persist(result: RunResult, output_dir: str) -> tuple[str, str]:
    """Write a timestamped JSON record and append a CSV row; returns paths."""
    os.makedirs(output_dir, exist_ok=True)
    stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y%m%dT%H%M%S")
    name = f"run_p{result.config.problem_id}_{stamp}_{uuid.uuid4().hex[:8]}.json"
    json_path = os.path.join(output_dir, name)
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.to_record(), fh)
        fh.write("\n")

    csv_path = os.path.join(output_dir, "results.csv")
    new_file = not os.path.exists(csv_path)
    with open(csv_path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        if new_file:
            writer.writeheader()
        writer.writerow(result_csv_row(result))
    return json_path, csv_path


def plot_data(result: RunResult, n_points: int = 1000) -> list[dict]:
    """Per-point rows {t, y_reference, y_predicted, abs_error}."""
    if result.model is None:
        raise ValueError("result carries no model (stepper runs have no plot data)")
    problem = get_problem(result.config.problem_id)
    ts = grid_for(problem, n_points)
    ref = reference_solution(problem, ts)
    pred = result.model.predict(0, ts)
    return [
        {"t": _sig17(t), "y_reference": _sig17(yr),
         "y_predicted": _sig17(yp), "abs_error": _sig17(abs(yp - yr))}
        for t, yr, yp in zip(ts, ref, pred)
    ]
