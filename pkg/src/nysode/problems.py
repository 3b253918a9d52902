"""Benchmark ODE problems: specs, conditions, references, solver defaults.

Linear problems are stored in the canonical form

    y^(p)(t) = sum_{k=1}^{p} f_k(t) * y^(p-k)(t) + r(t),

nonlinear problems as y^(p) = f(t, y, y', ..., y^(p-1)) with analytic
partials (and second partials where Newton uses exact Jacobians).  Every
catalog entry carries a closed-form reference solution; validate_problem
checks it against the equation with a finite-difference oracle so a typo in
either the spec or the reference cannot pass silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class BoundaryCondition:
    """A scalar condition y^(order)(point) = value."""

    point: float
    order: int
    value: float


@dataclass(frozen=True)
class Conditions:
    kind: str  # "ivp" | "bvp"
    entries: tuple[BoundaryCondition, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("ivp", "bvp"):
            raise ValueError(f"unknown condition kind {self.kind!r}")


@dataclass(frozen=True)
class LinearOdeSpec:
    order: int
    coeffs: tuple[Callable, ...]   # f_1 .. f_p, vectorized in t
    forcing: Callable              # r(t), vectorized
    domain: tuple[float, float]


@dataclass(frozen=True)
class NonlinearOdeSpec:
    order: int
    rhs: Callable                          # f(t, y, y', ..., y^(p-1))
    rhs_partials: tuple[Callable, ...]     # df/dy^(j), j = 0..p-1
    domain: tuple[float, float]
    # {(j, k): d2f/dy^(j)dy^(k)} with j <= k; needed for exact Jacobians.
    rhs_second_partials: Optional[dict] = None


OdeSpec = LinearOdeSpec | NonlinearOdeSpec


@dataclass(frozen=True)
class SolverDefaults:
    n: int
    m: int
    sigma2: float
    gamma: float
    newton_iters: Optional[int] = None


@dataclass(frozen=True)
class BenchmarkProblem:
    id: int
    name: str
    spec: OdeSpec
    conditions: Conditions
    reference: Callable                 # y*(t), vectorized
    defaults: SolverDefaults
    reference_deriv: Optional[Callable] = None   # y*'(t) where steppers need it

    @property
    def domain(self) -> tuple[float, float]:
        return self.spec.domain

    @property
    def order(self) -> int:
        return self.spec.order

    @property
    def is_linear(self) -> bool:
        return isinstance(self.spec, LinearOdeSpec)


class OutOfDomainError(ValueError):
    pass


def grid_for(problem: BenchmarkProblem, n: int) -> np.ndarray:
    t1, tn = problem.domain
    return np.linspace(t1, tn, n)


def reference_solution(problem: BenchmarkProblem, points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    t1, tn = problem.domain
    tol = 1e-9 * (abs(t1) + abs(tn) + 1.0)
    if points.size and (points.min() < t1 - tol or points.max() > tn + tol):
        raise OutOfDomainError(
            f"points outside problem {problem.id} domain [{t1}, {tn}]"
        )
    return np.asarray(problem.reference(points), dtype=float)


def _p1_coeff(t):
    t = np.asarray(t, dtype=float)
    return -(t + (1.0 + 3.0 * t * t) / (1.0 + t + t ** 3))


def _p1_forcing(t):
    t = np.asarray(t, dtype=float)
    g = (1.0 + 3.0 * t * t) / (1.0 + t + t ** 3)
    return t ** 3 + 2.0 * t + t * t * g


def _p1_reference(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-t * t / 2.0) / (1.0 + t + t ** 3) + t * t


_P12_C = (2.0 - math.cos(1.0)) / math.sin(1.0)
_P15_BOUNDARY = 0.324027137
_P15_A = 1.0 / (_P15_BOUNDARY * math.cosh(1.0))


def _ones_like(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _zeros_like(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _const(c: float) -> Callable:
    return lambda t: np.full_like(np.asarray(t, dtype=float), c)


def catalog() -> tuple[BenchmarkProblem, ...]:
    """All sixteen benchmark problems with per-problem solver defaults."""
    problems = []

    # 1: first-order, time-varying coefficient
    problems.append(BenchmarkProblem(
        id=1, name="first-order time-varying coefficient",
        spec=LinearOdeSpec(1, (_p1_coeff,), _p1_forcing, (0.0, 3.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 1.0),)),
        reference=_p1_reference,
        defaults=SolverDefaults(n=1000, m=150, sigma2=10.0, gamma=1e7),
    ))

    # 2: exponential decay
    problems.append(BenchmarkProblem(
        id=2, name="exponential decay",
        spec=LinearOdeSpec(1, (_const(-1.0),), _zeros_like, (0.0, 10.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 1.0),)),
        reference=lambda t: np.exp(-np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=10000, m=50, sigma2=10.0, gamma=1e7),
    ))

    # 3: Prothero-Robinson, stiff
    problems.append(BenchmarkProblem(
        id=3, name="Prothero-Robinson stiff",
        spec=LinearOdeSpec(
            1, (_const(-1000.0),),
            lambda t: 1000.0 * np.sin(np.asarray(t, dtype=float)) + np.cos(np.asarray(t, dtype=float)),
            (0.0, 10.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 0.0),)),
        reference=lambda t: np.sin(np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=10000, m=50, sigma2=10.0, gamma=1e7),
    ))

    # 4: nonlinear y' = y - t/y
    problems.append(BenchmarkProblem(
        id=4, name="nonlinear first order y - t/y",
        spec=NonlinearOdeSpec(
            1,
            rhs=lambda t, y: y - t / y,
            rhs_partials=(lambda t, y: 1.0 + t / (y * y),),
            rhs_second_partials={(0, 0): lambda t, y: -2.0 * t / (y ** 3)},
            domain=(0.0, 3.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 1.0),)),
        reference=lambda t: np.sqrt(np.asarray(t, dtype=float) + 0.5
                                    + 0.5 * np.exp(2.0 * np.asarray(t, dtype=float))),
        defaults=SolverDefaults(n=1000, m=50, sigma2=10.0, gamma=1e6, newton_iters=50),
    ))

    # 5: Riccati blow-up-free branch y' = y^2
    problems.append(BenchmarkProblem(
        id=5, name="quadratic nonlinearity",
        spec=NonlinearOdeSpec(
            1,
            rhs=lambda t, y: y * y,
            rhs_partials=(lambda t, y: 2.0 * y,),
            rhs_second_partials={(0, 0): lambda t, y: 2.0 * np.ones_like(np.asarray(y, dtype=float))},
            domain=(0.0, 1.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, -1.0),)),
        reference=lambda t: -1.0 / (1.0 + np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=600, m=20, sigma2=8.0, gamma=1e6, newton_iters=25),
    ))

    # 6: nonlinear with square root, domain (1, 1.2]
    # The square root is clamped below at a tiny floor so iterates that dip
    # under ln t stay evaluable; partials are zeroed in the clamped region so
    # they remain the exact derivatives of the clamped rhs.
    _P6_FLOOR = 1e-12

    def _p6_rhs(t, y):
        s = np.sqrt(np.maximum(y - np.log(t), _P6_FLOOR))
        return 2.0 * s / t + 1.0 / t

    def _p6_fy(t, y):
        arg = y - np.log(t)
        s = np.sqrt(np.maximum(arg, _P6_FLOOR))
        return np.where(arg > _P6_FLOOR, 1.0 / (t * s), 0.0)

    def _p6_fyy(t, y):
        arg = y - np.log(t)
        s = np.sqrt(np.maximum(arg, _P6_FLOOR))
        return np.where(arg > _P6_FLOOR, -1.0 / (2.0 * t * s ** 3), 0.0)

    problems.append(BenchmarkProblem(
        id=6, name="square-root nonlinearity",
        spec=NonlinearOdeSpec(
            1, rhs=_p6_rhs, rhs_partials=(_p6_fy,),
            rhs_second_partials={(0, 0): _p6_fyy},
            domain=(1.0, 1.2)),
        conditions=Conditions("ivp", (BoundaryCondition(1.0, 0, 0.0),)),
        reference=lambda t: np.log(np.asarray(t, dtype=float))
                            + np.log(np.asarray(t, dtype=float)) ** 2,
        defaults=SolverDefaults(n=300, m=20, sigma2=1.0, gamma=1e6, newton_iters=50),
    ))

    # 7: damped oscillator with constant forcing
    _w7 = math.sqrt(1.0 - 0.15 ** 2)
    problems.append(BenchmarkProblem(
        id=7, name="damped oscillator, constant forcing",
        spec=LinearOdeSpec(2, (_const(-0.3), _const(-1.0)), _const(1.0), (0.0, 20.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 0.0),
                                      BoundaryCondition(0.0, 1, 0.0))),
        reference=lambda t: 1.0 - np.exp(-0.15 * np.asarray(t, dtype=float)) * (
            np.cos(_w7 * np.asarray(t, dtype=float))
            + (0.15 / _w7) * np.sin(_w7 * np.asarray(t, dtype=float))),
        defaults=SolverDefaults(n=1000, m=50, sigma2=1.0, gamma=1e7),
    ))

    # 8: undamped oscillator (1/2) y'' + 18 y = 0
    problems.append(BenchmarkProblem(
        id=8, name="undamped oscillator",
        spec=LinearOdeSpec(2, (_const(0.0), _const(-36.0)), _zeros_like, (0.0, 2.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, -0.5),
                                      BoundaryCondition(0.0, 1, 1.0))),
        reference=lambda t: -0.5 * np.cos(6.0 * np.asarray(t, dtype=float))
                            + np.sin(6.0 * np.asarray(t, dtype=float)) / 6.0,
        defaults=SolverDefaults(n=1000, m=50, sigma2=1.0, gamma=1e7),
    ))

    # 9: critically damped
    problems.append(BenchmarkProblem(
        id=9, name="critically damped oscillator",
        spec=LinearOdeSpec(2, (_const(-4.0), _const(-4.0)), _zeros_like, (0.0, 10.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 1.0),
                                      BoundaryCondition(0.0, 1, 1.0))),
        reference=lambda t: (1.0 + 3.0 * np.asarray(t, dtype=float))
                            * np.exp(-2.0 * np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=1000, m=50, sigma2=1.0, gamma=1e7),
    ))

    # 10: lightly damped with resonant-style forcing
    problems.append(BenchmarkProblem(
        id=10, name="lightly damped, decaying forcing",
        spec=LinearOdeSpec(
            2, (_const(-0.2), _const(-1.0)),
            lambda t: -0.2 * np.exp(-np.asarray(t, dtype=float) / 5.0)
                      * np.cos(np.asarray(t, dtype=float)),
            (0.0, 10.0)),
        conditions=Conditions("ivp", (BoundaryCondition(0.0, 0, 0.0),
                                      BoundaryCondition(0.0, 1, 1.0))),
        reference=lambda t: np.exp(-np.asarray(t, dtype=float) / 5.0)
                            * np.sin(np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=1000, m=50, sigma2=1.0, gamma=1e7),
    ))

    # 11: singular BVP, y'' + y'/t + cos t + sin(t)/t = 0
    problems.append(BenchmarkProblem(
        id=11, name="singular second-order BVP",
        spec=LinearOdeSpec(
            2,
            (lambda t: -1.0 / np.asarray(t, dtype=float), _const(0.0)),
            lambda t: -np.cos(np.asarray(t, dtype=float))
                      - np.sin(np.asarray(t, dtype=float)) / np.asarray(t, dtype=float),
            (0.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(0.0, 0, 1.0),
                                      BoundaryCondition(1.0, 0, math.cos(1.0)))),
        reference=lambda t: np.cos(np.asarray(t, dtype=float)),
        reference_deriv=lambda t: -np.sin(np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=1000, m=20, sigma2=1.0, gamma=1e7),
    ))

    # 12: y'' + y = 2, two-point BVP
    problems.append(BenchmarkProblem(
        id=12, name="forced oscillator BVP",
        spec=LinearOdeSpec(2, (_const(0.0), _const(-1.0)), _const(2.0), (0.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(0.0, 0, 1.0),
                                      BoundaryCondition(1.0, 0, 0.0))),
        reference=lambda t: 2.0 - np.cos(np.asarray(t, dtype=float))
                            - _P12_C * np.sin(np.asarray(t, dtype=float)),
        reference_deriv=lambda t: np.sin(np.asarray(t, dtype=float))
                                  - _P12_C * np.cos(np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=1000, m=20, sigma2=1.0, gamma=1e7),
    ))

    # 13: singular BVP with exponential solution
    problems.append(BenchmarkProblem(
        id=13, name="singular BVP, exponential solution",
        spec=LinearOdeSpec(
            2,
            (lambda t: (2.0 * np.asarray(t, dtype=float) - 1.0) / np.asarray(t, dtype=float),
             lambda t: (1.0 - np.asarray(t, dtype=float)) / np.asarray(t, dtype=float)),
            _zeros_like, (0.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(0.0, 0, 1.0),
                                      BoundaryCondition(1.0, 0, math.e))),
        reference=lambda t: np.exp(np.asarray(t, dtype=float)),
        reference_deriv=lambda t: np.exp(np.asarray(t, dtype=float)),
        defaults=SolverDefaults(n=1000, m=20, sigma2=1.0, gamma=1e7),
    ))

    # 14: nonlinear BVP y'' = -(y')^2 + 2 exp(-y)
    problems.append(BenchmarkProblem(
        id=14, name="nonlinear BVP with exponential term",
        spec=NonlinearOdeSpec(
            2,
            rhs=lambda t, y, yp: -(yp * yp) + 2.0 * np.exp(-y),
            rhs_partials=(lambda t, y, yp: -2.0 * np.exp(-y),
                          lambda t, y, yp: -2.0 * yp),
            rhs_second_partials={
                (0, 0): lambda t, y, yp: 2.0 * np.exp(-y),
                (0, 1): lambda t, y, yp: np.zeros_like(np.asarray(y, dtype=float)),
                (1, 1): lambda t, y, yp: -2.0 * np.ones_like(np.asarray(y, dtype=float)),
            },
            domain=(0.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(0.0, 0, 0.0),
                                      BoundaryCondition(1.0, 0, 0.0))),
        reference=lambda t: np.log(np.asarray(t, dtype=float) ** 2
                                   - np.asarray(t, dtype=float) + 1.0),
        reference_deriv=lambda t: (2.0 * np.asarray(t, dtype=float) - 1.0)
                                  / (np.asarray(t, dtype=float) ** 2 - np.asarray(t, dtype=float) + 1.0),
        defaults=SolverDefaults(n=200, m=10, sigma2=1.0, gamma=1e7, newton_iters=500),
    ))

    # 15: nonlinear BVP y'' = -y + 2 (y')^2 / y, symmetric boundary values
    problems.append(BenchmarkProblem(
        id=15, name="nonlinear BVP with quotient term",
        spec=NonlinearOdeSpec(
            2,
            rhs=lambda t, y, yp: -y + 2.0 * yp * yp / y,
            rhs_partials=(lambda t, y, yp: -1.0 - 2.0 * yp * yp / (y * y),
                          lambda t, y, yp: 4.0 * yp / y),
            rhs_second_partials={
                (0, 0): lambda t, y, yp: 4.0 * yp * yp / (y ** 3),
                (0, 1): lambda t, y, yp: -4.0 * yp / (y * y),
                (1, 1): lambda t, y, yp: 4.0 / y,
            },
            domain=(-1.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(-1.0, 0, _P15_BOUNDARY),
                                      BoundaryCondition(1.0, 0, _P15_BOUNDARY))),
        reference=lambda t: 1.0 / (_P15_A * np.cosh(np.asarray(t, dtype=float))),
        reference_deriv=lambda t: -np.sinh(np.asarray(t, dtype=float))
                                  / (_P15_A * np.cosh(np.asarray(t, dtype=float)) ** 2),
        defaults=SolverDefaults(n=300, m=10, sigma2=1.0, gamma=1e7, newton_iters=400),
    ))

    # 16: fourth order, two-point Hermite conditions
    problems.append(BenchmarkProblem(
        id=16, name="fourth-order two-point Hermite BVP",
        spec=LinearOdeSpec(
            4, (_const(0.0),) * 4,
            lambda t: 120.0 * np.asarray(t, dtype=float),
            (-1.0, 1.0)),
        conditions=Conditions("bvp", (BoundaryCondition(-1.0, 0, 1.0),
                                      BoundaryCondition(-1.0, 1, 5.0),
                                      BoundaryCondition(1.0, 0, 3.0),
                                      BoundaryCondition(1.0, 1, 5.0))),
        reference=lambda t: np.asarray(t, dtype=float) ** 5 + 2.0,
        reference_deriv=lambda t: 5.0 * np.asarray(t, dtype=float) ** 4,
        defaults=SolverDefaults(n=1000, m=20, sigma2=1.0, gamma=1e7),
    ))

    return tuple(problems)


_CATALOG_CACHE: Optional[tuple[BenchmarkProblem, ...]] = None


def get_problem(problem_id: int) -> BenchmarkProblem:
    global _CATALOG_CACHE
    if _CATALOG_CACHE is None:
        _CATALOG_CACHE = catalog()
    if not 1 <= problem_id <= 16:
        raise ValueError(f"problem id must be 1..16, got {problem_id}")
    return _CATALOG_CACHE[problem_id - 1]


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    magnitude: float
    threshold: float


@dataclass(frozen=True)
class ValidationReport:
    problem_id: int
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# 4th-order-accurate central stencils for derivatives 1..4 (7-point where
# needed); chosen so truncation and round-off both stay below the 1e-8 gate.
_STENCILS = {
    1: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 1),
    2: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    3: (np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0, 3),
    4: (np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0, 4),
}


def _fd_derivative(fn: Callable, t: np.ndarray, order: int, h: float) -> np.ndarray:
    weights, power = _STENCILS[order]
    half = (weights.size - 1) // 2
    acc = np.zeros_like(t)
    for offset, w in zip(range(-half, half + 1), weights):
        if w != 0.0:
            acc = acc + w * np.asarray(fn(t + offset * h), dtype=float)
    return acc / h ** power


def _rhs_state(problem: BenchmarkProblem, t: np.ndarray, h: float) -> list[np.ndarray]:
    """Reference value and derivatives 0..p-1 at interior points t."""
    state = [np.asarray(problem.reference(t), dtype=float)]
    for j in range(1, problem.order):
        state.append(_fd_derivative(problem.reference, t, j, h))
    return state


def validate_problem(problem: BenchmarkProblem, n_check: int = 200) -> ValidationReport:
    """Check the stored reference against the ODE and its conditions."""
    t1, tn = problem.domain
    span = tn - t1
    # step for the finite-difference oracle; larger for the 4th-order stencil
    # where round-off 1/h^4 dominates.
    h = 0.05 * span if problem.order >= 4 else 5e-4 * span
    inset = (_STENCILS[max(problem.order, 1)][0].size // 2 + 1) * h
    t = np.linspace(t1 + max(inset, 1e-3 * span), tn - max(inset, 1e-3 * span), n_check)

    checks = []
    p = problem.order
    ypp = _fd_derivative(problem.reference, t, p, h)
    yref = np.asarray(problem.reference(t), dtype=float)
    if problem.is_linear:
        rhs = np.asarray(problem.spec.forcing(t), dtype=float)
        derivs = [yref] + [_fd_derivative(problem.reference, t, j, h) for j in range(1, p)]
        for k, fk in enumerate(problem.spec.coeffs, start=1):
            rhs = rhs + np.asarray(fk(t), dtype=float) * derivs[p - k]
    else:
        state = _rhs_state(problem, t, h)
        rhs = np.asarray(problem.spec.rhs(t, *state), dtype=float)
    scale = max(1.0, float(np.max(np.abs(ypp))))
    residual = float(np.max(np.abs(ypp - rhs))) / scale
    checks.append(CheckResult("ode_residual", residual <= 1e-8, residual, 1e-8))

    for i, bc in enumerate(problem.conditions.entries):
        if bc.order == 0:
            got = float(problem.reference(np.array([bc.point]))[0])
        elif bc.order == 1:
            # one-sided 4th-order first-derivative stencil at the endpoint
            hp = 1e-3 * span
            sign = 1.0 if abs(bc.point - t1) < abs(bc.point - tn) else -1.0
            w = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
            pts = bc.point + sign * hp * np.arange(5)
            got = sign * float(w @ np.asarray(problem.reference(pts), dtype=float)) / hp
        else:
            raise ValueError("only value and first-derivative conditions supported")
        err = abs(got - bc.value)
        tol = 1e-10 if bc.order == 0 else 1e-6
        checks.append(CheckResult(f"condition_{i}", err <= tol, err, tol))

    return ValidationReport(problem.id, tuple(checks))
