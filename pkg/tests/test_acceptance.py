"""End-to-end accuracy, timing-scaling, and robustness gates.

Each test is one acceptance criterion; the pytest PASSED/FAILED line is the
verdict, and every test also prints a one-line summary with the measured
numbers for the log.
"""
import time

import numpy as np
import pytest

from nysode import baselines, harness, kernel, linear, metrics, newton, nystrom
from nysode.kernel import RbfKernel
from nysode.problems import catalog, get_problem, grid_for, validate_problem


def _timed_run(config):
    t0 = time.perf_counter()
    result = harness.run(config)
    return result, time.perf_counter() - t0


def test_criterion_1_problem12_accuracy_and_runtime():
    result, elapsed = _timed_run(harness.config_from_defaults(12))
    print(f"[criterion 1] problem 12: MAE {result.metrics.mae:.3e} "
          f"(<= 3.2e-8), wall {elapsed:.2f}s (< 5s)")
    assert result.metrics.mae <= 3.2e-8
    assert elapsed < 5.0


def test_criterion_2_problem3_stiff_accuracy_and_runtime():
    result, elapsed = _timed_run(harness.config_from_defaults(3))
    print(f"[criterion 2] problem 3: MAE {result.metrics.mae:.3e} "
          f"(<= 2.1e-7), wall {elapsed:.2f}s (< 30s)")
    assert result.metrics.mae <= 2.1e-7
    assert elapsed < 30.0


def test_criterion_3_problem16_fourth_order_accuracy():
    result, _ = _timed_run(harness.config_from_defaults(16))
    print(f"[criterion 3] problem 16: MAE {result.metrics.mae:.3e} (<= 1.8e-4)")
    assert result.metrics.mae <= 1.8e-4


def test_criterion_4_problem4_newton_accuracy_and_runtime():
    result, elapsed = _timed_run(harness.config_from_defaults(4))
    print(f"[criterion 4] problem 4: MAE {result.metrics.mae:.3e} "
          f"(<= 5.5e-3), wall {elapsed:.2f}s (< 60s)")
    assert result.newton_converged
    assert result.metrics.mae <= 5.5e-3
    assert elapsed < 60.0


def test_criterion_5_problem15_accuracy_and_residual_budget():
    result, _ = _timed_run(harness.config_from_defaults(15))
    capped, _ = _timed_run(harness.config_from_defaults(15, max_iters=50))
    final_residual = capped.newton_trace[-1]
    print(f"[criterion 5] problem 15: MAE {result.metrics.mae:.3e} (<= 1.7e-6), "
          f"residual at 50-iteration budget {final_residual:.3e} (<= 1e-1)")
    assert result.newton_converged
    assert result.metrics.mae <= 1.7e-6
    assert final_residual <= 1e-1


def test_criterion_6_problem1_sampling_study():
    eq, _ = _timed_run(harness.config_from_defaults(1, strategy="equidistant"))
    rnd, _ = _timed_run(harness.config_from_defaults(1, strategy="random"))
    print(f"[criterion 6] problem 1: equidistant RMSE {eq.metrics.rmse:.3e} "
          f"(<= 9.5e-3 and <= 1.2 x random {rnd.metrics.rmse:.3e})")
    assert eq.metrics.rmse <= 1.2 * rnd.metrics.rmse
    assert eq.metrics.rmse <= 9.5e-3


def test_criterion_7_speedup_scaling():
    ns = [500, 1000, 2000, 4000]
    nls_t, full_t = [], []
    for n in ns:
        r_nls, _ = _timed_run(harness.config_from_defaults(2, n=n, m=50))
        r_full, _ = _timed_run(harness.config_from_defaults(2, n=n, solver="full_feature"))
        assert r_nls.metrics.mae <= 1e-4 and r_full.metrics.mae <= 1e-4
        nls_t.append(r_nls.timings.train_seconds)
        full_t.append(r_full.timings.train_seconds)
    nls_slope = np.polyfit(np.log(ns), np.log(nls_t), 1)[0]
    full_slope = np.polyfit(np.log(ns), np.log(full_t), 1)[0]
    ratio = full_t[-1] / nls_t[-1]
    print(f"[criterion 7] problem 2 sweep: nls slope {nls_slope:.2f} (<= 1.3), "
          f"full-feature slope {full_slope:.2f} (>= 2.0), "
          f"ratio at n=4000 {ratio:.0f}x (>= 10)")
    assert nls_slope <= 1.3
    assert full_slope >= 2.0
    assert ratio >= 10.0


def test_criterion_8_property_suite_under_two_minutes():
    t0 = time.perf_counter()

    # (a) kernel derivatives 1..4 vs finite differences
    k = RbfKernel(sigma2=1.5)
    rng = np.random.default_rng(0)
    u = rng.uniform(-2.0, 2.0, size=100)
    v = u + rng.uniform(-3.0 * np.sqrt(k.sigma2), 3.0 * np.sqrt(k.sigma2), size=100)
    for a in range(1, 5):
        h = 1e-5
        fd = (kernel.eval_deriv(k, a - 1, u, v + h)
              - kernel.eval_deriv(k, a - 1, u, v - h)) / (2.0 * h)
        got = kernel.eval_deriv(k, a, u, v)
        mask = np.abs(got) > 1e-8
        assert np.max(np.abs(got[mask] - fd[mask]) / np.abs(got[mask])) <= 1e-4

    # (b) m = n kernel reconstruction
    grid = np.linspace(0.0, 2.0, 30)
    fmap = nystrom.build_feature_map(RbfKernel(1.0), grid, drop_tol=0.0)
    phi = fmap.feature_matrix(0, grid)
    assert np.max(np.abs(phi @ phi.T - kernel.kernel_matrix(RbfKernel(1.0), 0, grid, grid))) <= 1e-8

    # (c) KKT residual on every linear benchmark at its defaults
    for p in catalog():
        if not p.is_linear:
            continue
        d = p.defaults
        g = grid_for(p, d.n)
        lm = nystrom.select_landmarks(nystrom.Equidistant(), g, d.m)
        fm = nystrom.build_feature_map(RbfKernel(d.sigma2), lm)
        system = linear.assemble(p.spec, p.conditions, fm, g, d.gamma)
        report = linear.check_kkt(linear.solve(system, fm), system)
        assert report.linear_residual <= 1e-8 * max(report.rhs_scale, 1.0), f"problem {p.id}"

    # (d) Newton residual equals the numerical Lagrangian gradient
    p4 = get_problem(4)
    g4 = grid_for(p4, 50)
    fm4 = nystrom.build_feature_map(
        RbfKernel(p4.defaults.sigma2),
        nystrom.select_landmarks(nystrom.Equidistant(), g4, 8))
    ws = newton._Workspace(p4.spec, p4.conditions, fm4, g4, 10.0)
    state = newton.NewtonState(
        omega=rng.normal(scale=0.1, size=ws.m), bias=1.0,
        multipliers=rng.normal(size=1), y_aux=1.0 + 0.1 * rng.normal(size=ws.nc))
    x0 = state.pack()
    got = newton._residual(ws, state)
    fd = np.empty_like(x0)
    for j in range(x0.size):
        hp = 1e-6 * (1.0 + abs(x0[j]))
        xp, xm = x0.copy(), x0.copy()
        xp[j] += hp
        xm[j] -= hp
        fd[j] = (newton.lagrangian(ws.unpack(xp), p4.spec, p4.conditions, fm4, g4, 10.0)
                 - newton.lagrangian(ws.unpack(xm), p4.spec, p4.conditions, fm4, g4, 10.0)
                 ) / (2.0 * hp)
    assert np.max(np.abs(got - fd)) / max(1.0, float(np.max(np.abs(got)))) <= 1e-4

    # (e) Newton fixed-point idempotence
    p5 = get_problem(5)
    g5 = grid_for(p5, p5.defaults.n)
    fm5 = nystrom.build_feature_map(
        RbfKernel(p5.defaults.sigma2),
        nystrom.select_landmarks(nystrom.Equidistant(), g5, p5.defaults.m))
    opts5 = newton.NewtonOptions(max_iters=p5.defaults.newton_iters)
    model, trace = newton.solve_nonlinear(p5.spec, p5.conditions, fm5, g5,
                                          p5.defaults.gamma, opts5)
    _, trace2 = newton.solve_nonlinear(p5.spec, p5.conditions, fm5, g5,
                                       p5.defaults.gamma, opts5,
                                       x0=trace.final_state)
    assert trace2.converged and trace2.iterations == 0

    # (f) RK4 order
    p2 = get_problem(2)
    errs, hs = [], [0.1, 0.05, 0.025, 0.0125]
    for h in hs:
        ts, ys = baselines.integrate(p2, baselines.StepperConfig(step=h))
        errs.append(np.max(np.abs(ys - np.exp(-ts))))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 3.6 <= slope <= 4.4

    # (g) all sixteen reference solutions pass the residual oracle
    for p in catalog():
        assert validate_problem(p).passed, f"problem {p.id}"

    # (h) power-mean chain on 1000 random vectors
    for _ in range(1000):
        pred = rng.normal(size=rng.integers(2, 20))
        ref = rng.normal(size=pred.size)
        m = metrics.compute_errors(pred, ref)
        assert m.mae <= m.rmse + 1e-15 <= m.linf + 2e-15

    elapsed = time.perf_counter() - t0
    print(f"[criterion 8] property suite: all checks passed in {elapsed:.1f}s (< 120s)")
    assert elapsed < 120.0


@pytest.mark.parametrize("pid", [14, 15])
def test_criterion_9_newton_convergence_order(pid):
    p = get_problem(pid)
    d = p.defaults
    g = grid_for(p, d.n)
    fm = nystrom.build_feature_map(
        RbfKernel(d.sigma2), nystrom.select_landmarks(nystrom.Equidistant(), g, d.m))
    _, trace = newton.solve_nonlinear(p.spec, p.conditions, fm, g, d.gamma,
                                      newton.NewtonOptions(max_iters=d.newton_iters))
    report = newton.convergence_diagnostics(trace)
    print(f"[criterion 9] problem {pid}: fitted Newton order "
          f"{report.estimated_order:.2f} (>= 1.7, {report.pairs_used} pairs)")
    assert trace.converged
    assert report.estimated_order >= 1.7
    assert not report.sub_quadratic
