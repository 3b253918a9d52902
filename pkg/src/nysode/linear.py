"""Primal KKT assembly and direct solve for linear ODE collocation.

The model is y_hat(t) = omega^T phi(t) + b.  Collocation residuals over the
constraint points are

    e_i = omega^T D_i + g_i * b - r_i,
    D_i = phi^(p)(t_i) - sum_k f_k(t_i) phi^(p-k)(t_i),   g_i = -f_p(t_i)

(the bias enters only through the undifferentiated y term).  Minimizing
(1/2)||omega||^2 + (gamma/2)||e||^2 subject to the initial/boundary
conditions gives a symmetric stationarity system of side m_eff + 1 + p.
The stationarity rows are assembled divided by gamma (equivalently, from the
objective (1/(2 gamma))||omega||^2 + (1/2)||e||^2, with scaled multipliers):

    [ I/gamma + D^T D   D^T g    A_c^T ] [omega ]   [D^T r]
    [ g^T D             g^T g    beta^T] [  b   ] = [g^T r]
    [ A_c               beta     0     ] [lambda]   [  v  ]

where row mu of (A_c, beta) evaluates condition mu on (omega, b).  The same
(omega, b) solve either form exactly; this scaling keeps ||M|| independent of
gamma so the floating-point residual of the solve stays small relative to
the right-hand side even when the forcing is zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nystrom import NystromFeatureMap
from .problems import Conditions, LinearOdeSpec

KKT_RESIDUAL_TOL = 1e-8


class SingularSystemError(np.linalg.LinAlgError):
    """Direct solve failed or produced non-finite entries."""


@dataclass(frozen=True)
class PrimalModel:
    omega: np.ndarray          # (m_eff,)
    bias: float
    multipliers: np.ndarray    # one per condition
    feature_map: NystromFeatureMap

    def predict(self, ell: int, points) -> np.ndarray:
        """y_hat^(ell) on points; the bias contributes only at ell = 0."""
        psi = self.feature_map.feature_matrix(ell, points)
        out = psi @ self.omega
        if ell == 0:
            out = out + self.bias
        return out


def condition_rows(cond: Conditions, fmap: NystromFeatureMap):
    """Condition matrix A_c (p x m_eff), bias coefficients, target values."""
    rows, bias_coeffs, values = [], [], []
    for bc in cond.entries:
        rows.append(fmap.feature_deriv(bc.order, bc.point))
        bias_coeffs.append(1.0 if bc.order == 0 else 0.0)
        values.append(bc.value)
    return np.array(rows), np.array(bias_coeffs), np.array(values)


def constraint_points(cond: Conditions, grid: np.ndarray) -> np.ndarray:
    """Interior collocation points: t_2..t_n for IVPs, t_2..t_{n-1} for BVPs."""
    return grid[1:] if cond.kind == "ivp" else grid[1:-1]


@dataclass(frozen=True)
class AssembledSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    constraint_points: np.ndarray
    gamma: float
    # pieces kept for residual reporting
    D: np.ndarray
    g: np.ndarray
    r: np.ndarray
    cond_rows: np.ndarray
    cond_bias: np.ndarray
    cond_values: np.ndarray

    @property
    def side(self) -> int:
        return self.matrix.shape[0]


def assemble(
    spec: LinearOdeSpec,
    cond: Conditions,
    fmap: NystromFeatureMap,
    grid,
    gamma: float,
) -> AssembledSystem:
    grid = np.asarray(grid, dtype=float)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    p = spec.order
    pts = constraint_points(cond, grid)

    D = fmap.feature_matrix(p, pts)
    coeff_vals = []
    for k, fk in enumerate(spec.coeffs, start=1):
        fkv = np.asarray(fk(pts), dtype=float)
        if not np.all(np.isfinite(fkv)):
            raise FloatingPointError(
                f"coefficient f_{k} non-finite on constraint points"
            )
        coeff_vals.append(fkv)
        D = D - fkv[:, None] * fmap.feature_matrix(p - k, pts)
    g = -coeff_vals[-1]
    r = np.asarray(spec.forcing(pts), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("forcing non-finite on constraint points")

    Ac, beta, values = condition_rows(cond, fmap)
    m_eff = fmap.m_eff
    n_cond = len(cond.entries)
    side = m_eff + 1 + n_cond

    M = np.zeros((side, side))
    M[:m_eff, :m_eff] = np.eye(m_eff) / gamma + D.T @ D
    M[:m_eff, m_eff] = D.T @ g
    M[m_eff, :m_eff] = M[:m_eff, m_eff]
    M[m_eff, m_eff] = g @ g
    M[:m_eff, m_eff + 1:] = Ac.T
    M[m_eff + 1:, :m_eff] = Ac
    M[m_eff, m_eff + 1:] = beta
    M[m_eff + 1:, m_eff] = beta

    rhs = np.concatenate([D.T @ r, [g @ r], values])
    return AssembledSystem(
        matrix=M, rhs=rhs, constraint_points=pts, gamma=gamma,
        D=D, g=g, r=r, cond_rows=Ac, cond_bias=beta, cond_values=values,
    )


def solve(system: AssembledSystem, fmap: NystromFeatureMap) -> PrimalModel:
    """Dense partial-pivoting solve with one step of iterative refinement."""
    M, rhs = system.matrix, system.rhs
    try:
        x = np.linalg.solve(M, rhs)
        # one refinement pass; cheap and recovers digits lost to the large
        # dynamic range gamma introduces
        x = x + np.linalg.solve(M, rhs - M @ x)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solution contains non-finite entries")
    m_eff = fmap.m_eff
    return PrimalModel(
        omega=x[:m_eff],
        bias=float(x[m_eff]),
        multipliers=x[m_eff + 1:],
        feature_map=fmap,
    )


@dataclass(frozen=True)
class KktReport:
    linear_residual: float         # ||M x - rhs||_inf
    rhs_scale: float               # ||rhs||_inf
    condition_residuals: np.ndarray
    ode_residuals: np.ndarray      # the regularized e_i vector

    @property
    def passed(self) -> bool:
        bound = KKT_RESIDUAL_TOL * max(self.rhs_scale, 1.0)
        return bool(self.linear_residual <= bound
                    and np.all(self.condition_residuals <= KKT_RESIDUAL_TOL))


def check_kkt(model: PrimalModel, system: AssembledSystem) -> KktReport:
    x = np.concatenate([model.omega, [model.bias], model.multipliers])
    lin = float(np.max(np.abs(system.matrix @ x - system.rhs)))
    cond_res = np.abs(
        system.cond_rows @ model.omega
        + system.cond_bias * model.bias
        - system.cond_values
    )
    e = system.D @ model.omega + system.g * model.bias - system.r
    return KktReport(
        linear_residual=lin,
        rhs_scale=float(np.max(np.abs(system.rhs))),
        condition_residuals=cond_res,
        ode_residuals=e,
    )


def predict(model: PrimalModel, ell: int, points) -> np.ndarray:
    return model.predict(ell, points)
