"""Error and timing metrics for solver comparisons."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class LengthMismatchError(ValueError):
    pass


class IncompatibleRunsError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorMetrics:
    mae: float
    rmse: float
    linf: float
    r2: Optional[float]   # None when the reference is constant

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "linf": self.linf, "r2": self.r2}


@dataclass(frozen=True)
class Timings:
    train_seconds: float
    predict_seconds: float

    @property
    def total_seconds(self) -> float:
        return self.train_seconds + self.predict_seconds


def compute_errors(predicted, reference) -> ErrorMetrics:
    predicted = np.asarray(predicted, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if predicted.shape != reference.shape:
        raise LengthMismatchError(
            f"shape mismatch: {predicted.shape} vs {reference.shape}"
        )
    if predicted.size < 2:
        raise LengthMismatchError("need at least 2 samples")
    err = predicted - reference
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    linf = float(np.max(np.abs(err)))
    ss_tot = float(np.sum((reference - reference.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum(err * err)) / ss_tot
    return ErrorMetrics(mae=mae, rmse=rmse, linf=linf, r2=r2)


@dataclass(frozen=True)
class DeltaReport:
    d_mae: float
    d_rmse: float
    d_linf: float
    d_r2: Optional[float]
    speedup_total: float       # (train+predict)_a / (train+predict)_b
    speedup_train: float


def compare_runs(a, b) -> DeltaReport:
    """Metric deltas (a minus b) and time ratios (a over b) for two runs."""
    if a.config.problem_id != b.config.problem_id or a.config.n != b.config.n:
        raise IncompatibleRunsError("runs must share problem id and evaluation grid")
    d_r2 = None
    if a.metrics.r2 is not None and b.metrics.r2 is not None:
        d_r2 = a.metrics.r2 - b.metrics.r2
    return DeltaReport(
        d_mae=a.metrics.mae - b.metrics.mae,
        d_rmse=a.metrics.rmse - b.metrics.rmse,
        d_linf=a.metrics.linf - b.metrics.linf,
        d_r2=d_r2,
        speedup_total=a.timings.total_seconds / max(b.timings.total_seconds, 1e-12),
        speedup_train=a.timings.train_seconds / max(b.timings.train_seconds, 1e-12),
    )
