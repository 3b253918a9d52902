"""Run pipeline, persistence, plot data, and the CLI."""
import csv
import json
import os

import numpy as np
import pytest

from nysode import cli, harness
from nysode.harness import InvalidConfigError, RunConfig, config_from_defaults


def test_config_validation_guards():
    with pytest.raises(InvalidConfigError):
        RunConfig(problem_id=1, n=1000, m=2000, sigma2=10.0, gamma=1e7).validate()
    with pytest.raises(InvalidConfigError):
        RunConfig(problem_id=99, n=100, m=10, sigma2=1.0, gamma=1e7).validate()
    with pytest.raises(InvalidConfigError):
        RunConfig(problem_id=1, n=100, m=10, sigma2=1.0, gamma=1e7,
                  solver="nope").validate()
    with pytest.raises(InvalidConfigError):
        RunConfig(problem_id=1, n=100, m=10, sigma2=-1.0, gamma=1e7).validate()


def test_defaults_come_from_catalog():
    config = config_from_defaults(3)
    assert (config.n, config.m, config.sigma2, config.gamma) == (10000, 50, 10.0, 1e7)
    override = config_from_defaults(3, m=25, seed=None)
    assert override.m == 25 and override.n == 10000


def test_run_is_deterministic():
    config = config_from_defaults(1, n=300, m=40)
    a = harness.run(config)
    b = harness.run(config)
    assert harness._sig17(a.metrics.mae) == harness._sig17(b.metrics.mae)
    assert harness._sig17(a.metrics.rmse) == harness._sig17(b.metrics.rmse)
    assert a.m_eff == b.m_eff


def test_random_strategy_depends_on_seed_only():
    base = config_from_defaults(1, n=300, m=40, strategy="random")
    a = harness.run(base)
    b = harness.run(base)
    c = harness.run(config_from_defaults(1, n=300, m=40, strategy="random", seed=1))
    assert harness._sig17(a.metrics.mae) == harness._sig17(b.metrics.mae)
    assert harness._sig17(a.metrics.mae) != harness._sig17(c.metrics.mae)


def test_persist_is_append_only(tmp_path):
    out = str(tmp_path / "results")
    config = config_from_defaults(12, n=200)
    result = harness.run(config)
    j1, c1 = harness.persist(result, out)
    j2, c2 = harness.persist(result, out)
    assert j1 != j2 and os.path.exists(j1) and os.path.exists(j2)
    assert c1 == c2
    with open(c1, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["problem"] == "12"
    with open(j1) as fh:
        record = json.load(fh)
    assert record["config"]["problem_id"] == 12
    assert record["metrics"]["mae"] == result.metrics.mae


def test_stepper_run_reports_single_time_in_both_columns():
    result = harness.run(config_from_defaults(2, n=2000, solver="rk4"))
    assert result.timings.train_seconds == result.timings.predict_seconds
    assert result.metrics.mae <= 1e-4


def test_plot_data_columns():
    result = harness.run(config_from_defaults(2, n=500))
    rows = harness.plot_data(result)
    assert len(rows) == 1000
    assert float(rows[0]["y_reference"]) == 1.0

    result15 = harness.run(config_from_defaults(15))
    rows15 = harness.plot_data(result15)
    assert float(rows15[0]["y_reference"]) == pytest.approx(0.324027137, abs=1e-9)
    assert float(rows15[-1]["y_reference"]) == pytest.approx(0.324027137, abs=1e-9)


def test_plot_data_max_error_matches_linf_on_shared_grid():
    # training grid and the 1000-point plot grid coincide at n=1000
    result = harness.run(config_from_defaults(12))
    assert result.config.n == 1000
    rows = harness.plot_data(result)
    max_abs = max(float(r["abs_error"]) for r in rows)
    assert max_abs == pytest.approx(result.metrics.linf, rel=1e-10)


def test_plot_data_requires_model():
    result = harness.run(config_from_defaults(2, n=2000, solver="rk4"))
    with pytest.raises(ValueError):
        harness.plot_data(result)


# ---------------------------------------------------------------------------
# CLI


def test_cli_solve_writes_results(tmp_path, capsys):
    out = str(tmp_path / "results")
    code = cli.main(["solve", "--problem", "12", "--defaults", "--out", out])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "problem 12" in stdout
    assert os.path.exists(os.path.join(out, "results.csv"))


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    code = cli.main(["solve", "--problem", "1", "--n", "100", "--m", "200",
                     "--sigma2", "10", "--gamma", "1e7",
                     "--out", str(tmp_path)])
    assert code == 2


def test_cli_bench_empty_solver_list(capsys):
    code = cli.main(["bench", "--problems", "12", "--solvers", ""])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1  # header only


def test_cli_bench_runs_cross_product(tmp_path, capsys):
    code = cli.main(["bench", "--problems", "2,12", "--solvers", "nls,rk4",
                     "--n", "400", "--out", str(tmp_path / "r")])
    assert code == 0
    rows = list(csv.reader(capsys.readouterr().out.strip().splitlines()))
    assert len(rows) == 5  # header + 2 problems x 2 solvers
    assert rows[0][:2] == ["problem", "solver"]


def test_cli_sweep_single_value(tmp_path, capsys):
    code = cli.main(["sweep", "--problem", "12", "--axis", "n",
                     "--values", "300", "--out", str(tmp_path / "r")])
    assert code == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 2  # header + one row


def test_cli_sweep_rejects_unsorted_values(tmp_path):
    code = cli.main(["sweep", "--problem", "12", "--axis", "n",
                     "--values", "400,300", "--out", str(tmp_path / "r")])
    assert code == 2


def test_cli_plot_data_headers(capsys):
    code = cli.main(["plot-data", "--problem", "2", "--n", "300", "--defaults"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,y_reference,y_predicted,abs_error"
    assert len(lines) == 1001


def test_cli_validate_passes(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 16


def test_cli_toml_config_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('problem = 12\nn = 300\nm = 15\nsigma2 = 1.0\ngamma = 1e7\n')
    out = str(tmp_path / "results")
    code = cli.main(["solve", "--config", str(cfg), "--m", "20", "--out", out])
    assert code == 0
    with open(os.path.join(out, "results.csv"), newline="") as fh:
        row = list(csv.DictReader(fh))[0]
    assert row["m"] == "20"   # flag wins over file
    assert row["n"] == "300"  # file value used where no flag given
