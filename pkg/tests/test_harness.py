"""Monte-Carlo harness: schedules, determinism, rate fits, file outputs."""

import math
import os

import pytest

from backward_burgers.harness import (
    ErrorReport,
    ExperimentConfig,
    ReportRow,
    emit_outputs,
    fit_rate,
    get_problem,
    read_report,
    resolve_params,
    run_monte_carlo,
    run_regression_study,
    run_trial,
    pipeline_error_order,
)
from backward_burgers.operators import RegParams


def tiny_config(**kw):
    base = dict(
        problem="burgers_canonical",
        ladder=(16, 32),
        m_per_n=1,
        trials=2,
        sigma=0.01,
        vartheta=0.01,
        varthetabar=0.01,
        base_seed=7,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_ladder_must_increase(self):
        with pytest.raises(ValueError):
            tiny_config(ladder=(32, 16))
        with pytest.raises(ValueError):
            tiny_config(ladder=())

    def test_times_default_to_zero_and_half_T(self):
        cfg = tiny_config(T=2.0)
        assert cfg.times == (0.0, 1.0)

    def test_unresolvable_schedule_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(beta_rule="bogus")
        with pytest.raises(ValueError):
            tiny_config(rho_rule="bogus")
        with pytest.raises(ValueError):
            tiny_config(qhat_rule="bogus")

    def test_unknown_cutoff_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(cutoff="soft")


class TestSchedules:
    def test_beta_n_rule(self):
        assert resolve_params(tiny_config(), 32).betaN == 32.0

    def test_beta_balanced_rule(self):
        cfg = tiny_config(beta_rule="balanced", mu0=1.0)
        rp = resolve_params(cfg, 64)
        assert rp.betaN == pytest.approx(64.0 ** (4.0 / 1.5), rel=1e-12)

    def test_beta_numeric(self):
        assert resolve_params(tiny_config(beta_rule="25"), 64).betaN == 25.0
        assert resolve_params(tiny_config(beta_rule=25.0), 64).betaN == 25.0

    def test_rho_log_rule_defaults_alpha(self):
        cfg = tiny_config(mu0=2.0, T=1.0)
        assert resolve_params(cfg, 64).rhoN == pytest.approx(math.log(64.0), rel=1e-12)
        cfg = tiny_config(mu0=2.0, T=1.0, rho_alpha=0.25)
        assert resolve_params(cfg, 64).rhoN == pytest.approx(0.25 * math.log(64.0), rel=1e-12)

    def test_qhat_rules(self):
        assert resolve_params(tiny_config(qhat0=3.0), 64).qhatN == 3.0
        grown = resolve_params(tiny_config(qhat_rule="loglog", qhat0=3.0), 64).qhatN
        assert grown == pytest.approx(3.0 * math.sqrt(math.log(math.log(80.0))), rel=1e-12)

    def test_kappa_defaults_to_rho(self):
        rp = resolve_params(tiny_config(), 64)
        assert rp.kappaN == rp.rhoN
        assert resolve_params(tiny_config(kappa_rule="2.5"), 64).kappaN == 2.5


class TestPipelineOrder:
    def test_matches_log_space_formula(self):
        rp = RegParams(a0=3.0, a1=4.0, rhoN=2.0, betaN=64.0, qhatN=2.0, gamma=1.0, mu0=2.0)
        direct = (
            math.exp(16.0 * 4.0 * 1.0 / 1.0)
            * math.exp(-2.0 * 2.0 * 0.5)
            * max(
                math.exp(4.0) * 8.0 * 64.0**-8.0,
                math.exp(4.0) * 64.0**-2.0,
                2.0**-2.0,
            )
        )
        assert pipeline_error_order(rp, 64, 0.5, 1.0) == pytest.approx(direct, rel=1e-12)

    def test_overflow_reported_as_inf(self):
        rp = RegParams(a0=3.0, a1=4.0, rhoN=2.0, betaN=64.0, qhatN=50.0, gamma=1.0, mu0=2.0)
        assert pipeline_error_order(rp, 64, 0.0, 1.0) == math.inf


class TestRunTrial:
    def test_zero_noise_trials_identical(self):
        cfg = tiny_config(sigma=0.0, vartheta=0.0, varthetabar=0.0)
        assert run_trial(cfg, 16, 0) == run_trial(cfg, 16, 5)

    def test_bit_identical_rerun(self):
        cfg = tiny_config()
        assert run_trial(cfg, 32, 3) == run_trial(cfg, 32, 3)

    def test_different_trials_differ(self):
        cfg = tiny_config()
        assert run_trial(cfg, 32, 0) != run_trial(cfg, 32, 1)

    def test_errors_nonnegative(self):
        cfg = tiny_config()
        assert all(v >= 0.0 for v in run_trial(cfg, 16, 0).values())

    def test_failure_carries_trial_identification(self):
        cfg = tiny_config(sigma=2.0, vmax=1.0)  # NoiseConfig rejects sigma >= vmax
        with pytest.raises(RuntimeError, match=r"n=16, trial_index=0"):
            run_trial(cfg, 16, 0)


class TestRunMonteCarlo:
    def test_single_trial_mean(self):
        cfg = tiny_config(trials=1, ladder=(16,))
        report = run_monte_carlo(cfg)
        single = run_trial(cfg, 16, 0)
        for row in report.rows:
            assert row.mean_sq_error == single[row.t]
            assert row.var_sq_error == 0.0

    def test_zero_noise_variance_is_zero(self):
        cfg = tiny_config(trials=3, ladder=(16,), sigma=0.0, vartheta=0.0, varthetabar=0.0)
        report = run_monte_carlo(cfg)
        assert all(row.var_sq_error == 0.0 for row in report.rows)

    def test_report_is_pure_function_of_config(self):
        cfg = tiny_config()
        assert run_monte_carlo(cfg).rows == run_monte_carlo(cfg).rows

    def test_doubling_trials_agrees_within_standard_error(self):
        cfg4 = tiny_config(trials=4, ladder=(16,))
        cfg8 = tiny_config(trials=8, ladder=(16,))
        r4 = run_monte_carlo(cfg4)
        r8 = run_monte_carlo(cfg8)
        for a, b in zip(r4.rows, r8.rows):
            se = math.sqrt(max(a.var_sq_error, b.var_sq_error) / 4.0)
            assert abs(a.mean_sq_error - b.mean_sq_error) <= 3.0 * se + 1e-15

    def test_row_layout(self):
        cfg = tiny_config()
        report = run_monte_carlo(cfg)
        assert len(report.rows) == len(cfg.ladder) * len(cfg.times)
        assert [r.n for r in report.rows] == [16, 16, 32, 32]
        assert set(report.wallclock) == {16, 32}
        for (n, t), arr in report.per_trial.items():
            assert arr.shape == (cfg.trials,)

    def test_statistics_consistent_with_per_trial_values(self):
        import numpy as np

        cfg = tiny_config(trials=5, ladder=(16,))
        report = run_monte_carlo(cfg)
        for row in report.rows:
            arr = report.per_trial[(row.n, row.t)]
            assert row.mean_sq_error == float(np.mean(arr))
            assert row.var_sq_error == pytest.approx(float(np.var(arr, ddof=1)), rel=1e-14)
            assert row.mean_sq_error >= 0.0

    def test_failed_trial_fails_the_run(self):
        cfg = tiny_config(sigma=2.0, vmax=1.0)
        with pytest.raises(RuntimeError, match="trial failed"):
            run_monte_carlo(cfg)


def synthetic_report(means, times=(0.0,)):
    rows = []
    for n, mean in means:
        for t in times:
            rows.append(
                ReportRow(
                    n=n, t=t, beta_n=float(n), rho_n=1.0, qhat_n=1.0, kappa_n=1.0,
                    trials=1, mean_sq_error=mean, var_sq_error=0.0,
                    theory_order=float(n) ** -1.5,
                )
            )
    return ErrorReport(rows=tuple(rows))


class TestFitRate:
    def test_exact_power_law(self):
        report = synthetic_report([(n, 3.0 * n**-2.0) for n in (16, 32, 64, 128)])
        fit = fit_rate(report, 0.0)
        assert fit.slope == pytest.approx(-2.0, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-9)
        assert fit.residual_norm <= 1e-10
        assert fit.theory_slope == pytest.approx(-1.5, abs=1e-10)

    def test_constant_means(self):
        report = synthetic_report([(n, 0.25) for n in (16, 32, 64)])
        assert fit_rate(report, 0.0).slope == pytest.approx(0.0, abs=1e-12)

    def test_needs_three_points(self):
        report = synthetic_report([(16, 1.0), (32, 0.5)])
        with pytest.raises(ValueError):
            fit_rate(report, 0.0)

    def test_rejects_nonpositive_means(self):
        report = synthetic_report([(16, 1.0), (32, 0.0), (64, 0.1)])
        with pytest.raises(ValueError):
            fit_rate(report, 0.0)


class TestEmitOutputs:
    def test_round_trip_exact(self, tmp_path):
        cfg = tiny_config()
        report = run_monte_carlo(cfg)
        csv_path = tmp_path / "out.csv"
        emit_outputs(report, csv_path)
        back = read_report(csv_path)
        assert back.rows == report.rows  # 17 significant digits round-trip

    def test_regression_rows_round_trip_with_nan(self, tmp_path):
        report = run_regression_study(ladder=(16, 32), trials=3, sigma=0.01, base_seed=1)
        csv_path = tmp_path / "reg.csv"
        emit_outputs(report, csv_path)
        back = read_report(csv_path)
        for a, b in zip(back.rows, report.rows):
            for field in ("n", "t", "beta_n", "trials", "mean_sq_error", "theory_order"):
                assert getattr(a, field) == getattr(b, field)
            assert math.isnan(a.rho_n) and math.isnan(a.qhat_n) and math.isnan(a.kappa_n)

    def test_csv_shape_and_line_endings(self, tmp_path):
        cfg = tiny_config()
        report = run_monte_carlo(cfg)
        csv_path = tmp_path / "out.csv"
        emit_outputs(report, csv_path)
        raw = csv_path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode("utf-8").strip().split("\n")
        assert len(lines) == len(cfg.ladder) * len(cfg.times) + 1
        assert lines[0].startswith("n,t,beta_n,")

    def test_plot_script_references_only_the_csv(self, tmp_path):
        cfg = tiny_config()
        report = run_monte_carlo(cfg)
        csv_path = tmp_path / "out.csv"
        _, plot_path = emit_outputs(report, csv_path)
        text = open(plot_path).read()
        assert "out.csv" in text
        assert str(tmp_path) not in text  # relative reference, relocatable pair
        assert "logscale" in text

    def test_overwrite_is_atomic_and_clean(self, tmp_path):
        cfg = tiny_config()
        report = run_monte_carlo(cfg)
        csv_path = tmp_path / "out.csv"
        emit_outputs(report, csv_path)
        first = csv_path.read_bytes()
        emit_outputs(report, csv_path)
        assert csv_path.read_bytes() == first
        assert not os.path.exists(str(csv_path) + ".tmp")

    def test_empty_report_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_outputs(ErrorReport(rows=()), tmp_path / "x.csv")

    def test_io_error_carries_path(self, tmp_path):
        report = synthetic_report([(16, 1.0)])
        bad = tmp_path / "missing_dir" / "x.csv"
        with pytest.raises(OSError, match="x.csv"):
            emit_outputs(report, bad)


class TestRegressionStudy:
    def test_means_decrease_and_theory_present(self):
        report = run_regression_study(ladder=(64, 256, 1024), trials=50, sigma=0.01, base_seed=3)
        means = [r.mean_sq_error for r in report.rows]
        assert means[0] > means[1] > means[2]
        assert all(r.theory_order > 0 for r in report.rows)

    def test_deterministic(self):
        a = run_regression_study(ladder=(16, 32), trials=5, sigma=0.05, base_seed=2)
        b = run_regression_study(ladder=(16, 32), trials=5, sigma=0.05, base_seed=2)
        assert a.rows == b.rows


def test_unknown_problem_rejected():
    with pytest.raises(ValueError):
        get_problem("missing", 1.0)
