"""Fixed-step reference integrators and the full-feature kernel baseline.

RK4 and explicit Adams-Bashforth (orders 2-4, bootstrapped with RK4) march
the companion first-order system of a benchmark problem on the same uniform
grid the kernel solver uses.  BVPs are handled by shooting from the known
reference initial slope.  The full-feature baseline reruns the identical
kernel pipeline with every grid point as a landmark, giving the classical
cubic-cost comparator.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linear, newton, nystrom
from .kernel import RbfKernel
from .problems import BenchmarkProblem, grid_for

_AB_COEFFS = {
    2: np.array([3.0, -1.0]) / 2.0,
    3: np.array([23.0, -16.0, 5.0]) / 12.0,
    4: np.array([55.0, -59.0, 37.0, -9.0]) / 24.0,
}


@dataclass(frozen=True)
class StepperConfig:
    step: float
    method: str = "rk4"          # "rk4" | "ab"
    ab_order: int = 4

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.method == "ab" and self.ab_order not in _AB_COEFFS:
            raise ValueError(f"Adams-Bashforth order must be 2..4, got {self.ab_order}")


class NonFiniteStateError(RuntimeError):
    """State overflowed during the march (expected on stiff problems at coarse h)."""


def companion_rhs(problem: BenchmarkProblem) -> Callable:
    """First-order system Y' = F(t, Y) for a p-th order scalar problem."""
    spec = problem.spec
    p = spec.order
    if problem.is_linear:
        def F(t, Y):
            top = np.asarray(spec.forcing(t), dtype=float)
            for k, fk in enumerate(spec.coeffs, start=1):
                top = top + np.asarray(fk(t), dtype=float) * Y[p - k]
            return np.concatenate([Y[1:], np.atleast_1d(top)])
    else:
        def F(t, Y):
            top = np.asarray(spec.rhs(t, *Y), dtype=float)
            return np.concatenate([Y[1:], np.atleast_1d(top)])
    return F


def initial_state(problem: BenchmarkProblem) -> np.ndarray:
    """Initial state vector (y, y', ..., y^(p-1)) at t_1.

    IVPs read it off the conditions; BVPs shoot from the reference initial
    slope, since a marching method needs a full state at the left end.
    """
    p = problem.order
    t1 = problem.domain[0]
    state = np.full(p, np.nan)
    for bc in problem.conditions.entries:
        if abs(bc.point - t1) < 1e-12 and bc.order < p:
            state[bc.order] = bc.value
    for j in range(p):
        if np.isnan(state[j]):
            if j == 0:
                state[0] = float(problem.reference(np.array([t1]))[0])
            elif j == 1 and problem.reference_deriv is not None:
                state[1] = float(problem.reference_deriv(np.array([t1]))[0])
            else:
                raise ValueError(
                    f"problem {problem.id}: no initial value for derivative order {j}"
                )
    return state


def _reference_state(problem: BenchmarkProblem, t: float) -> np.ndarray:
    """State vector (y, y', ...) read off the reference at an interior point."""
    p = problem.order
    state = [float(problem.reference(np.array([t]))[0])]
    if p >= 2:
        if problem.reference_deriv is None:
            raise ValueError(
                f"problem {problem.id}: reference derivative required to start "
                "the march away from a singular endpoint"
            )
        state.append(float(problem.reference_deriv(np.array([t]))[0]))
    if p > 2:
        raise ValueError("singular-endpoint marching supports order <= 2")
    return np.array(state)


def _rk4_step(F, t, Y, h):
    k1 = F(t, Y)
    k2 = F(t + h / 2.0, Y + h / 2.0 * k1)
    k3 = F(t + h / 2.0, Y + h / 2.0 * k2)
    k4 = F(t + h, Y + h * k3)
    return Y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(problem: BenchmarkProblem, config: StepperConfig) -> tuple[np.ndarray, np.ndarray]:
    """March the problem over its domain; returns (t grid, y values)."""
    t1, tn = problem.domain
    span = tn - t1
    n_steps = int(round(span / config.step))
    if abs(n_steps * config.step - span) > 1e-12 * max(1.0, span):
        raise ValueError("step must divide the domain length")
    ts = t1 + config.step * np.arange(n_steps + 1)
    F = companion_rhs(problem)
    Y = initial_state(problem)
    h = config.step

    with np.errstate(all="ignore"):
        f0 = F(ts[0], Y)
    if not np.all(np.isfinite(f0)):
        # singular left endpoint (a coefficient with 1/t at t1): start the
        # march one step in, from the reference state there
        ts = ts[1:]
        n_steps -= 1
        Y = _reference_state(problem, float(ts[0]))

    states = [Y]
    # overflow on a diverging march is detected and reported, not warned about
    with np.errstate(over="ignore", invalid="ignore"):
        if config.method == "rk4":
            for i in range(n_steps):
                Y = _rk4_step(F, ts[i], Y, h)
                if not np.all(np.isfinite(Y)):
                    raise NonFiniteStateError(f"non-finite state at t={ts[i + 1]:.6g}")
                states.append(Y)
        elif config.method == "ab":
            k = config.ab_order
            coeffs = _AB_COEFFS[k]
            history = [F(ts[0], Y)]
            for i in range(min(k - 1, n_steps)):      # bootstrap with RK4
                Y = _rk4_step(F, ts[i], Y, h)
                states.append(Y)
                history.insert(0, F(ts[i + 1], Y))
            for i in range(k - 1, n_steps):
                Y = Y + h * sum(c * g for c, g in zip(coeffs, history))
                if not np.all(np.isfinite(Y)):
                    raise NonFiniteStateError(f"non-finite state at t={ts[i + 1]:.6g}")
                states.append(Y)
                history.insert(0, F(ts[i + 1], Y))
                history.pop()
        else:
            raise ValueError(f"unknown method {config.method!r}")

    return ts, np.array([s[0] for s in states])


FULL_FEATURE_MAX_N = 5000


class MemoryGuardError(ValueError):
    pass


def full_feature_baseline(
    problem: BenchmarkProblem,
    gamma: float,
    sigma2: float,
    n: int,
    drop_tol: float = nystrom.DEFAULT_DROP_TOL,
):
    """Same pipeline with landmarks = entire grid (the m = n comparator)."""
    if n > FULL_FEATURE_MAX_N:
        raise MemoryGuardError(f"full-feature baseline capped at n={FULL_FEATURE_MAX_N}")
    grid = grid_for(problem, n)
    k = RbfKernel(sigma2=sigma2)

    t0 = time.perf_counter()
    fmap = nystrom.build_feature_map(k, grid, drop_tol=drop_tol)
    if problem.is_linear:
        system = linear.assemble(problem.spec, problem.conditions, fmap, grid, gamma)
        model = linear.solve(system, fmap)
    else:
        iters = problem.defaults.newton_iters or 100
        model, _ = newton.solve_nonlinear(
            problem.spec, problem.conditions, fmap, grid, gamma,
            newton.NewtonOptions(max_iters=iters))
    train_seconds = time.perf_counter() - t0
    return model, train_seconds
