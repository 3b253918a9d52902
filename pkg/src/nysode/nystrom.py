"""Landmark selection and the explicit low-rank feature map.

Landmarks t_1..t_m are a subset of the collocation grid.  Eigendecomposing
the landmark kernel matrix Omega_mm = V diag(s) V^T gives the feature map

    phi_k(t) = s_k^(-1/2) * sum_s V[s, k] * K(t_s, t),

whose inner products reproduce the standard low-rank kernel approximation
k_m(t)^T Omega_mm^{-1} k_m(t'), exact when both points are landmarks.
Derivatives of phi follow from kernel derivatives in t.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel as kern
from .kernel import RbfKernel

DEFAULT_DROP_TOL = 1e-16

# Above this grid size the exact n x n ridge leverage computation is replaced
# by a uniform-sketch approximation to keep memory bounded.
_LEVERAGE_EXACT_LIMIT = 4000


class DegenerateLandmarksError(ValueError):
    """Raised when two landmarks coincide within 1e-12."""


class InvalidCountError(ValueError):
    """Raised when a landmark count is outside 2..n."""


@dataclass(frozen=True)
class Equidistant:
    pass


@dataclass(frozen=True)
class Random:
    seed: int = 0


@dataclass(frozen=True)
class LeverageScore:
    seed: int = 0
    ridge: float = 1e-6
    # Kernel used to score the grid; when None, a neutral RBF whose length
    # scale is a tenth of the grid span is used.
    kernel: RbfKernel | None = None


SamplingStrategy = Equidistant | Random | LeverageScore


def ridge_leverage_scores(k: RbfKernel, grid, ridge: float) -> np.ndarray:
    """Diagonal of Omega (Omega + n*ridge*I)^{-1} over the grid.

    Exact for moderate n; for large n a uniform column sketch is used
    (push-through identity on the low-rank surrogate), which is the usual
    practical estimator and keeps memory at O(n*c).
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n <= _LEVERAGE_EXACT_LIMIT:
        omega = kern.kernel_matrix(k, 0, grid, grid)
        resolvent = np.linalg.solve(omega + n * ridge * np.eye(n), omega)
        scores = np.diagonal(resolvent).copy()
    else:
        c = _LEVERAGE_EXACT_LIMIT // 2
        idx = np.linspace(0, n - 1, c).round().astype(int)
        C = kern.kernel_matrix(k, 0, grid, grid[idx])
        W = C[idx, :]
        vals, vecs = np.linalg.eigh((W + W.T) / 2.0)
        keep = vals > vals.max() * 1e-12
        A = C @ (vecs[:, keep] / np.sqrt(vals[keep]))
        inner = np.linalg.solve(A.T @ A + n * ridge * np.eye(A.shape[1]), A.T)
        scores = np.einsum("ij,ji->i", A, inner)
    return np.clip(scores, 1e-300, None)


def select_landmarks(strategy: SamplingStrategy, grid, m: int) -> np.ndarray:
    """Pick m distinct landmark points from a strictly increasing grid."""
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if m < 2 or m > n:
        raise InvalidCountError(f"landmark count m={m} must satisfy 2 <= m <= n={n}")
    if isinstance(strategy, Equidistant):
        idx = np.round(np.arange(m) * (n - 1) / (m - 1)).astype(int)
    elif isinstance(strategy, Random):
        rng = np.random.default_rng(strategy.seed)
        idx = np.sort(rng.choice(n, size=m, replace=False))
    elif isinstance(strategy, LeverageScore):
        rng = np.random.default_rng(strategy.seed)
        score_kernel = strategy.kernel
        if score_kernel is None:
            span = float(grid[-1] - grid[0])
            score_kernel = RbfKernel(sigma2=max(span / 10.0, 1e-6) ** 2)
        scores = ridge_leverage_scores(score_kernel, grid, strategy.ridge)
        p = scores / scores.sum()
        idx = np.sort(rng.choice(n, size=m, replace=False, p=p))
    else:
        raise TypeError(f"unknown sampling strategy {strategy!r}")
    return grid[idx]


@dataclass(frozen=True)
class NystromFeatureMap:
    kernel: RbfKernel
    landmarks: np.ndarray          # (m,)
    eigenvalues: np.ndarray        # (m_eff,), descending, strictly positive
    eigenvectors: np.ndarray       # (m, m_eff), orthonormal columns

    @property
    def m_eff(self) -> int:
        return int(self.eigenvalues.size)

    def _scaled_vectors(self) -> np.ndarray:
        return self.eigenvectors / np.sqrt(self.eigenvalues)

    def feature_matrix(self, ell: int, points) -> np.ndarray:
        """Stack of derivative-order-ell feature rows: (|points|, m_eff)."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        kd = kern.kernel_matrix(self.kernel, ell, self.landmarks, points)
        return kd.T @ self._scaled_vectors()

    def feature(self, t: float) -> np.ndarray:
        return self.feature_matrix(0, [t])[0]

    def feature_deriv(self, ell: int, t: float) -> np.ndarray:
        return self.feature_matrix(ell, [t])[0]


def build_feature_map(
    k: RbfKernel, landmarks, drop_tol: float = DEFAULT_DROP_TOL
) -> NystromFeatureMap:
    """Eigendecompose the landmark kernel matrix and retain the stable part.

    Eigenvalues below drop_tol times the largest one (and any non-positive
    ones) are discarded; s^(-1/2) amplifies noise in that tail.
    """
    landmarks = np.asarray(landmarks, dtype=float)
    if landmarks.size >= 2 and np.min(np.diff(np.sort(landmarks))) <= 1e-12:
        raise DegenerateLandmarksError("two landmarks coincide within 1e-12")
    if not 0 <= drop_tol < 1:
        raise ValueError(f"drop_tol must lie in [0, 1), got {drop_tol}")
    omega = kern.kernel_matrix(k, 0, landmarks, landmarks)
    vals, vecs = np.linalg.eigh((omega + omega.T) / 2.0)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    keep = vals > max(drop_tol * vals[0], 0.0)
    return NystromFeatureMap(
        kernel=k,
        landmarks=landmarks,
        eigenvalues=vals[keep],
        eigenvectors=vecs[:, keep],
    )
