"""Newton-iterated primal KKT solve for nonlinear ODE collocation.

Auxiliary unknowns y_i (one per constraint point) keep the collocation
constraints linear in omega.  With S_j the order-j feature matrix over the
constraint points, the Lagrangian is

    L = (1/2) omega^T omega
      + (gamma/2) ||S_p omega - f(t, y, S_1 omega, ..., S_{p-1} omega)||^2
      + (gamma/2) ||y - S_0 omega - b 1||^2
      + sum_mu lambda_mu (c_mu(omega, b) - v_mu)

and the Newton residual F is its exact gradient in (omega, b, lambda, y);
the Jacobian is the (symmetric) Hessian, assembled from analytic first and
second partials of f where available, or by finite differences of F.
The update is the standard correction J * delta = -F.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linear import PrimalModel, condition_rows, constraint_points
from .nystrom import NystromFeatureMap
from .problems import Conditions, NonlinearOdeSpec


class PartialsMissingError(ValueError):
    pass


class SingularJacobianError(np.linalg.LinAlgError):
    pass


class DivergenceError(RuntimeError):
    pass


class MaxItersExceeded(RuntimeError):
    def __init__(self, message: str, model: PrimalModel, trace: "NewtonTrace"):
        super().__init__(message)
        self.model = model
        self.trace = trace


class InsufficientTraceError(ValueError):
    pass


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 100
    tol: Optional[float] = None        # default 1e-10 * (1 + gamma)
    damping: Optional[tuple[float, int]] = None   # (shrink, max_halvings)
    jacobian: str = "analytic"         # "analytic" | "finite_difference"
    fd_step: float = 1e-6

    def resolved_tol(self, gamma: float) -> float:
        return self.tol if self.tol is not None else 1e-10 * (1.0 + gamma)


@dataclass
class NewtonTrace:
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False
    # round-off level of ||F||: eps * ||J||_inf at the final iterate;
    # residuals near this level carry no rate information
    floor_estimate: float = 0.0
    # full unknown vector at termination, including the auxiliary y values
    final_state: Optional["NewtonState"] = None

    @property
    def iterations(self) -> int:
        return max(len(self.residual_norms) - 1, 0)


@dataclass(frozen=True)
class NewtonState:
    omega: np.ndarray
    bias: float
    multipliers: np.ndarray
    y_aux: np.ndarray
    iteration: int = 0
    residual_norm: float = np.inf

    def pack(self) -> np.ndarray:
        return np.concatenate([self.omega, [self.bias], self.multipliers, self.y_aux])


class _Workspace:
    """Feature matrices and condition rows, fixed across Newton iterations."""

    def __init__(self, spec, cond, fmap, grid, gamma):
        grid = np.asarray(grid, dtype=float)
        self.grid = grid
        self.spec = spec
        self.cond = cond
        self.fmap = fmap
        self.gamma = float(gamma)
        self.pts = constraint_points(cond, grid)
        p = spec.order
        self.S = [fmap.feature_matrix(j, self.pts) for j in range(p + 1)]
        self.Ac, self.beta, self.values = condition_rows(cond, fmap)
        self.m = fmap.m_eff
        self.nc = self.pts.size
        self.n_cond = len(cond.entries)
        self.side = self.m + 1 + self.n_cond + self.nc

    def unpack(self, x: np.ndarray, iteration=0, residual_norm=np.inf) -> NewtonState:
        m, nc, ncond = self.m, self.nc, self.n_cond
        return NewtonState(
            omega=x[:m], bias=float(x[m]),
            multipliers=x[m + 1:m + 1 + ncond],
            y_aux=x[m + 1 + ncond:],
            iteration=iteration, residual_norm=residual_norm,
        )

    def f_args(self, omega: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
        """(t, y, y', ..., y^(p-1)) with derivatives taken from the model."""
        args = [self.pts, y]
        for j in range(1, self.spec.order):
            args.append(self.S[j] @ omega)
        return args


def _residual(ws: _Workspace, state: NewtonState) -> np.ndarray:
    spec, gamma = ws.spec, ws.gamma
    p = spec.order
    omega, b, lam, y = state.omega, state.bias, state.multipliers, state.y_aux
    args = ws.f_args(omega, y)
    f = np.asarray(spec.rhs(*args), dtype=float)
    e1 = ws.S[p] @ omega - f
    e2 = y - ws.S[0] @ omega - b
    if not (np.all(np.isfinite(e1)) and np.all(np.isfinite(f))):
        raise DivergenceError("non-finite right-hand-side evaluation")

    F_omega = omega + gamma * (ws.S[p].T @ e1) - gamma * (ws.S[0].T @ e2) + ws.Ac.T @ lam
    for j in range(1, p):
        fp = np.asarray(spec.rhs_partials[j](*args), dtype=float)
        F_omega -= gamma * (ws.S[j].T @ (fp * e1))
    F_b = -gamma * np.sum(e2) + ws.beta @ lam
    F_lam = ws.Ac @ omega + ws.beta * b - ws.values
    fp0 = np.asarray(spec.rhs_partials[0](*args), dtype=float)
    F_y = -gamma * fp0 * e1 + gamma * e2
    return np.concatenate([F_omega, [F_b], F_lam, F_y])


def _second_partial(spec: NonlinearOdeSpec, j: int, k: int, args) -> np.ndarray:
    table = spec.rhs_second_partials
    if table is None:
        raise PartialsMissingError("rhs_second_partials required for analytic Jacobian")
    key = (j, k) if (j, k) in table else (k, j)
    if key not in table:
        raise PartialsMissingError(f"missing second partial {(j, k)}")
    return np.asarray(table[key](*args), dtype=float)


def _jacobian_analytic(ws: _Workspace, state: NewtonState) -> np.ndarray:
    spec, gamma = ws.spec, ws.gamma
    p, m, nc, ncond = spec.order, ws.m, ws.nc, ws.n_cond
    omega, y = state.omega, state.y_aux
    args = ws.f_args(omega, y)
    f = np.asarray(spec.rhs(*args), dtype=float)
    e1 = ws.S[p] @ omega - f
    fp = [np.asarray(spec.rhs_partials[j](*args), dtype=float) for j in range(p)]

    # G rows are d e1_i / d omega
    G = ws.S[p].copy()
    for j in range(1, p):
        G -= fp[j][:, None] * ws.S[j]

    J = np.zeros((ws.side, ws.side))
    o = slice(0, m)
    bi = m
    li = slice(m + 1, m + 1 + ncond)
    yi = slice(m + 1 + ncond, ws.side)

    # omega block: I + gamma (G^T G + sum_i e1_i * d^2 e1_i/d omega^2) + gamma S0^T S0
    J_oo = np.eye(m) + gamma * (G.T @ G) + gamma * (ws.S[0].T @ ws.S[0])
    for j in range(1, p):
        for k in range(1, p):
            s2 = _second_partial(spec, j, k, args)
            J_oo -= gamma * (ws.S[j].T @ ((s2 * e1)[:, None] * ws.S[k]))
    J[o, o] = J_oo

    J[o, bi] = gamma * np.sum(ws.S[0], axis=0)
    J[bi, o] = J[o, bi]
    J[bi, bi] = gamma * nc

    J[o, li] = ws.Ac.T
    J[li, o] = ws.Ac
    J[bi, li] = ws.beta
    J[li, bi] = ws.beta

    # omega-y cross block, column i:
    #   -gamma [ sum_j f_{jy}(i) e1_i S_j[i] + fp0(i) G[i] + S0[i] ]
    J_oy = -gamma * (G.T * fp[0][None, :]) - gamma * ws.S[0].T
    for j in range(1, p):
        s2 = _second_partial(spec, j, 0, args)
        J_oy -= gamma * (ws.S[j].T * (s2 * e1)[None, :])
    J[o, yi] = J_oy
    J[yi, o] = J_oy.T

    J[bi, yi] = -gamma * np.ones(nc)
    J[yi, bi] = -gamma * np.ones(nc)

    f00 = _second_partial(spec, 0, 0, args)
    J[yi, yi] = np.diag(gamma * (1.0 + fp[0] ** 2 - f00 * e1))
    return J


def _jacobian_fd(ws: _Workspace, state: NewtonState, step: float) -> np.ndarray:
    x0 = state.pack()
    F0 = _residual(ws, state)
    J = np.empty((x0.size, x0.size))
    for j in range(x0.size):
        h = step * (1.0 + abs(x0[j]))
        xp = x0.copy()
        xp[j] += h
        J[:, j] = (_residual(ws, ws.unpack(xp)) - F0) / h
    return J


def initial_state(ws: _Workspace) -> NewtonState:
    """omega = 0, b = first value (IVP) / mean boundary value (BVP), y_i = b."""
    value_conds = [bc.value for bc in ws.cond.entries if bc.order == 0]
    if ws.cond.kind == "ivp":
        b = value_conds[0]
    else:
        b = float(np.mean(value_conds))
    return NewtonState(
        omega=np.zeros(ws.m), bias=b,
        multipliers=np.zeros(ws.n_cond),
        y_aux=np.full(ws.nc, b),
    )


def linearized_state(ws: _Workspace) -> NewtonState:
    """Warm start from the ODE linearized about the constant initial state.

    With b0 the constant-init bias, y^(p) = f + sum_j f_j (y^(j) - y0^(j))
    expanded at (y=b0, derivatives 0) is a linear ODE solvable by the direct
    KKT path; its solution seeds omega, b and the auxiliary values.
    """
    from . import linear as linear_mod
    from .problems import LinearOdeSpec

    spec = ws.spec
    p = spec.order
    b0 = initial_state(ws).bias

    def _args(t):
        t = np.asarray(t, dtype=float)
        return [t, np.full_like(t, b0)] + [np.zeros_like(t)] * (p - 1)

    def coeff(k):
        def fk(t):
            return np.asarray(spec.rhs_partials[p - k](*_args(t)), dtype=float)
        return fk

    def forcing(t):
        args = _args(t)
        f0 = np.asarray(spec.rhs(*args), dtype=float)
        return f0 - np.asarray(spec.rhs_partials[0](*args), dtype=float) * b0

    lspec = LinearOdeSpec(p, tuple(coeff(k) for k in range(1, p + 1)),
                          forcing, spec.domain)
    system = linear_mod.assemble(lspec, ws.cond, ws.fmap, ws.grid, ws.gamma)
    model = linear_mod.solve(system, ws.fmap)
    return NewtonState(
        omega=model.omega, bias=model.bias,
        multipliers=np.zeros(ws.n_cond),
        y_aux=model.predict(0, ws.pts),
    )


def _solve_once(
    ws: _Workspace,
    opts: NewtonOptions,
    state: NewtonState,
    damping: Optional[tuple[float, int]],
) -> tuple[PrimalModel, NewtonTrace]:
    tol = opts.resolved_tol(ws.gamma)
    trace = NewtonTrace()

    x = state.pack()
    F = _residual(ws, ws.unpack(x))
    norm = float(np.max(np.abs(F)))
    trace.residual_norms.append(norm)
    last_jnorm = 0.0

    for it in range(opts.max_iters):
        if norm <= tol:
            trace.converged = True
            break
        if norm > 1e12:
            raise DivergenceError(f"residual norm {norm:.3e} exceeds 1e12")
        st = ws.unpack(x, iteration=it, residual_norm=norm)
        if opts.jacobian == "analytic":
            J = _jacobian_analytic(ws, st)
        else:
            J = _jacobian_fd(ws, st, opts.fd_step)
        last_jnorm = float(np.max(np.sum(np.abs(J), axis=1)))
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(str(exc)) from exc
        if not np.all(np.isfinite(delta)):
            raise SingularJacobianError("non-finite Newton correction")

        if damping is not None:
            shrink, max_halvings = damping
            alpha = 1.0
            for _ in range(max_halvings):
                cand = x + alpha * delta
                try:
                    Fc = _residual(ws, ws.unpack(cand))
                    if float(np.max(np.abs(Fc))) <= norm:
                        break
                except DivergenceError:
                    pass
                alpha *= shrink
            x = x + alpha * delta
        else:
            x = x + delta
        F = _residual(ws, ws.unpack(x))
        norm = float(np.max(np.abs(F)))
        trace.residual_norms.append(norm)
    else:
        if norm <= tol:
            trace.converged = True

    # Round-off floor of the residual evaluation: forming the gradient loses
    # about eps * ||J|| in absolute terms, so residuals near that level carry
    # no convergence-rate information.
    trace.floor_estimate = np.finfo(float).eps * last_jnorm
    final = ws.unpack(x, iteration=len(trace.residual_norms) - 1, residual_norm=norm)
    trace.final_state = final
    model = PrimalModel(
        omega=final.omega, bias=final.bias,
        multipliers=final.multipliers, feature_map=ws.fmap,
    )
    if not trace.converged and norm > tol:
        raise MaxItersExceeded(
            f"Newton did not reach tol={tol:.3e} in {opts.max_iters} iterations "
            f"(final residual {norm:.3e})", model, trace)
    return model, trace


_CONTINUATION_GAMMAS = (1e0, 1e2, 1e4)


def _solve_with_continuation(
    ws_target: _Workspace, opts: NewtonOptions
) -> tuple[PrimalModel, NewtonTrace]:
    """Warm-start along a fixed gamma schedule, then solve at the target."""
    state = None
    for g in [g for g in _CONTINUATION_GAMMAS if g < ws_target.gamma]:
        ws_g = _Workspace(ws_target.spec, ws_target.cond, ws_target.fmap,
                          ws_target.grid, g)
        stage_opts = NewtonOptions(max_iters=opts.max_iters,
                                   tol=1e-8 * (1.0 + g), jacobian=opts.jacobian,
                                   fd_step=opts.fd_step)
        try:
            model, _ = _solve_once(ws_g, stage_opts,
                                   state or initial_state(ws_g), (0.5, 30))
        except MaxItersExceeded as exc:
            model = exc.model
        state = NewtonState(model.omega, model.bias,
                            np.zeros(ws_g.n_cond), model.predict(0, ws_g.pts))
    return _solve_once(ws_target, opts, state or initial_state(ws_target), (0.5, 30))


def solve_nonlinear(
    spec: NonlinearOdeSpec,
    cond: Conditions,
    fmap: NystromFeatureMap,
    grid,
    gamma: float,
    opts: NewtonOptions = NewtonOptions(),
    x0: Optional[NewtonState] = None,
) -> tuple[PrimalModel, NewtonTrace]:
    """Newton solve; the correction system is J * delta = -F.

    With an explicit x0 or damping setting, exactly that configuration runs.
    Otherwise a deterministic ladder is tried: undamped from the constant
    init, then backtracking-damped, then both again from a linearized-ODE
    warm start, and finally damped with warm starts continued in gamma.
    Each rung runs only if the previous one diverged, stalled, or hit a
    singular Jacobian; the reported trace is the successful rung's.
    """
    ws = _Workspace(spec, cond, fmap, grid, gamma)
    if x0 is not None or opts.damping is not None:
        state = x0 if x0 is not None else initial_state(ws)
        return _solve_once(ws, opts, state, opts.damping)

    attempts = (
        lambda: _solve_once(ws, opts, initial_state(ws), None),
        lambda: _solve_once(ws, opts, initial_state(ws), (0.5, 30)),
        lambda: _solve_once(ws, opts, linearized_state(ws), None),
        lambda: _solve_once(ws, opts, linearized_state(ws), (0.5, 30)),
        lambda: _solve_with_continuation(ws, opts),
    )
    last_exc: Exception | None = None
    for attempt in attempts:
        try:
            return attempt()
        except (DivergenceError, SingularJacobianError, MaxItersExceeded) as exc:
            last_exc = exc
    raise last_exc


def solve_problem15(
    fmap: NystromFeatureMap,
    grid,
    gamma: float,
    opts: NewtonOptions = NewtonOptions(max_iters=400),
) -> tuple[PrimalModel, NewtonTrace]:
    """Second-order BVP y'' = -y + 2 (y')^2 / y with exact Jacobian blocks."""
    from .problems import get_problem

    problem = get_problem(15)
    return solve_nonlinear(problem.spec, problem.conditions, fmap, grid, gamma, opts)


# first-order convenience wrappers (the generic machinery specialized to p=1)

def residual_first_order(state: NewtonState, spec, cond, fmap, grid, gamma) -> np.ndarray:
    if spec.order != 1:
        raise ValueError("residual_first_order requires a first-order spec")
    ws = _Workspace(spec, cond, fmap, grid, gamma)
    return _residual(ws, state)


def jacobian_first_order(state: NewtonState, spec, cond, fmap, grid, gamma) -> np.ndarray:
    if spec.order != 1:
        raise ValueError("jacobian_first_order requires a first-order spec")
    ws = _Workspace(spec, cond, fmap, grid, gamma)
    return _jacobian_analytic(ws, state)


def lagrangian(state: NewtonState, spec, cond, fmap, grid, gamma) -> float:
    """Objective + constraint terms; _residual is its exact gradient."""
    ws = _Workspace(spec, cond, fmap, grid, gamma)
    omega, b, lam, y = state.omega, state.bias, state.multipliers, state.y_aux
    args = ws.f_args(omega, y)
    f = np.asarray(spec.rhs(*args), dtype=float)
    e1 = ws.S[spec.order] @ omega - f
    e2 = y - ws.S[0] @ omega - b
    c = ws.Ac @ omega + ws.beta * b - ws.values
    return (0.5 * omega @ omega
            + 0.5 * gamma * (e1 @ e1)
            + 0.5 * gamma * (e2 @ e2)
            + lam @ c)


@dataclass(frozen=True)
class ConvergenceReport:
    estimated_order: float
    empirical_constant: float
    pairs_used: int
    sub_quadratic: bool


def convergence_diagnostics(trace: NewtonTrace) -> ConvergenceReport:
    """Estimate the convergence order from the tail of a residual trace.

    Fits log r_{k+1} ~ q log r_k + c over the last three contracting steps
    above the round-off floor: early iterations belong to the globalization
    phase and residuals at the floor carry no rate information, so both are
    excluded.
    """
    r = np.asarray(trace.residual_norms, dtype=float)
    if r.size < 4:
        raise InsufficientTraceError(
            f"need at least 4 residuals, got {r.size}"
        )
    floor = 10.0 * trace.floor_estimate
    xs, ys = [], []
    for k in range(r.size - 1):
        if r[k] > floor and r[k + 1] > floor and r[k + 1] < r[k]:
            xs.append(np.log(r[k]))
            ys.append(np.log(r[k + 1]))
    if len(xs) < 2:
        raise InsufficientTraceError("fewer than 2 usable pre-floor pairs")
    xs, ys = xs[-3:], ys[-3:]
    q, c = np.polyfit(xs, ys, 1)
    return ConvergenceReport(
        estimated_order=float(q),
        empirical_constant=float(np.exp(c)),
        pairs_used=len(xs),
        sub_quadratic=bool(q < 1.7),
    )
