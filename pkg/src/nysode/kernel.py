"""RBF kernel evaluation and closed-form derivatives up to fourth order.

K(u, v) = exp(-(u - v)^2 / sigma2).  Derivatives are taken with respect to
the second (evaluation-point) argument v.  Each derivative has the form

    d^a K / dv^a = P_a(u - v) * K(u, v)

where P_a is a polynomial in d = u - v obeying the recursion

    P_0 = 1,    P_{a+1}(d) = (2 d / sigma2) * P_a(d) - P_a'(d).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DERIV_ORDER = 4


class UnsupportedOrderError(ValueError):
    """Raised when a derivative order outside 0..4 is requested."""


@lru_cache(maxsize=None)
def _deriv_poly_coeffs(sigma2: float, order: int) -> tuple[float, ...]:
    """Coefficients (low degree first) of P_order for the given bandwidth."""
    coeffs = np.array([1.0])
    for _ in range(order):
        # (2d/sigma2) * P shifts degree up by one; then subtract P'.
        shifted = np.concatenate(([0.0], coeffs)) * (2.0 / sigma2)
        deriv = coeffs[1:] * np.arange(1, coeffs.size)
        nxt = shifted
        nxt[: deriv.size] -= deriv
        coeffs = nxt
    return tuple(coeffs)


def _check_order(a: int) -> None:
    if not 0 <= a <= MAX_DERIV_ORDER:
        raise UnsupportedOrderError(
            f"derivative order {a} not supported (must be 0..{MAX_DERIV_ORDER})"
        )


@dataclass(frozen=True)
class RbfKernel:
    """Gaussian RBF kernel with bandwidth parameter sigma2 > 0."""

    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    def deriv_poly(self, order: int) -> tuple[float, ...]:
        _check_order(order)
        return _deriv_poly_coeffs(float(self.sigma2), order)


def _horner(coeffs: tuple[float, ...], d):
    acc = np.zeros_like(np.asarray(d, dtype=float))
    for c in reversed(coeffs):
        acc = acc * d + c
    return acc


def eval(k: RbfKernel, u, v):
    """K(u, v) = exp(-(u-v)^2 / sigma2); vectorized over u, v."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return np.exp(-(d * d) / k.sigma2)


def eval_deriv(k: RbfKernel, a: int, u, v):
    """a-th partial derivative of K with respect to v, order 0..4."""
    _check_order(a)
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    base = np.exp(-(d * d) / k.sigma2)
    if a == 0:
        return base
    return _horner(k.deriv_poly(a), d) * base


def kernel_matrix(k: RbfKernel, a: int, rows, cols) -> np.ndarray:
    """Matrix with entries d^a K(rows[i], cols[j]) / d cols[j]^a."""
    _check_order(a)
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    if rows.size == 0 or cols.size == 0:
        raise ValueError("kernel_matrix requires nonempty point sequences")
    return eval_deriv(k, a, rows[:, None], cols[None, :])
