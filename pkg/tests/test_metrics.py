"""Error metrics and run comparison."""
import math

import numpy as np
import pytest

from nysode import harness
from nysode.metrics import (
    IncompatibleRunsError,
    LengthMismatchError,
    Timings,
    compare_runs,
    compute_errors,
)


def test_perfect_prediction():
    ref = np.array([1.0, 2.0, 3.0, 4.0])
    m = compute_errors(ref, ref)
    assert (m.mae, m.rmse, m.linf, m.r2) == (0.0, 0.0, 0.0, 1.0)


def test_constant_offset():
    ref = np.array([1.0, 2.0, 3.0, 4.0])
    m = compute_errors(ref + 1.0, ref)
    assert m.mae == m.rmse == m.linf == 1.0


def test_hand_computed_mixed_errors():
    ref = np.zeros(4)
    pred = np.array([1.0, -1.0, 0.0, 0.0])
    m = compute_errors(pred, ref)
    assert m.mae == pytest.approx(0.5)
    assert m.rmse == pytest.approx(math.sqrt(0.5))
    assert m.linf == pytest.approx(1.0)


def test_constant_reference_has_no_r2():
    m = compute_errors(np.array([1.0, 2.0]), np.array([3.0, 3.0]))
    assert m.r2 is None


def test_shape_and_length_guards():
    with pytest.raises(LengthMismatchError):
        compute_errors(np.zeros(3), np.zeros(4))
    with pytest.raises(LengthMismatchError):
        compute_errors(np.zeros(1), np.zeros(1))


def test_power_mean_chain_on_random_vectors():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        pred = rng.normal(size=rng.integers(2, 30))
        ref = rng.normal(size=pred.size)
        m = compute_errors(pred, ref)
        assert m.mae <= m.rmse + 1e-15
        assert m.rmse <= m.linf + 1e-15


def test_permutation_invariance():
    rng = np.random.default_rng(0)
    pred, ref = rng.normal(size=50), rng.normal(size=50)
    perm = rng.permutation(50)
    a = compute_errors(pred, ref)
    b = compute_errors(pred[perm], ref[perm])
    assert a.mae == pytest.approx(b.mae, rel=1e-12)
    assert a.rmse == pytest.approx(b.rmse, rel=1e-12)
    assert a.linf == b.linf


def _result(problem_id=2, n=100, train=1.0, predict=0.5, mae=0.1):
    config = harness.RunConfig(problem_id=problem_id, n=n, m=10, sigma2=1.0, gamma=1e6)
    m = compute_errors(np.full(4, mae), np.array([0.0, 0.1, 0.2, 0.3]))
    return harness.RunResult(config=config, metrics=m,
                             timings=Timings(train, predict))


def test_compare_identical_runs():
    a = _result()
    d = compare_runs(a, a)
    assert d.d_mae == d.d_rmse == d.d_linf == 0.0
    assert d.speedup_total == pytest.approx(1.0)
    assert d.speedup_train == pytest.approx(1.0)


def test_compare_run_speedup_ratio():
    a = _result(train=9.0, predict=1.0)
    b = _result(train=0.4, predict=0.1)
    d = compare_runs(a, b)
    assert d.speedup_total == pytest.approx(20.0)
    assert d.speedup_train == pytest.approx(22.5)


def test_compare_rejects_mismatched_runs():
    with pytest.raises(IncompatibleRunsError):
        compare_runs(_result(problem_id=2), _result(problem_id=3))
    with pytest.raises(IncompatibleRunsError):
        compare_runs(_result(n=100), _result(n=200))
