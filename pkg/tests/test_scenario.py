import numpy as np
import pandas as pd
import pytest

from hivst.calibration import SurveillanceRecord, calibrate_with_config
from hivst.core.errors import NoSignChange, ParameterError
from hivst.engine import final_state
from hivst.model import PolicyConstants, build_matrices
from hivst.scenario import (
    ScenarioRunner,
    ScenarioSpec,
    association_summary,
    benefit_risk_table,
    mean_reduction,
    run_scenario,
    scatter_series,
    sweep,
    threshold_chi,
    threshold_column,
)

COARSE = [0.0, 0.25, 0.5, 0.75, 1.0]


@pytest.fixture
def runner(calibrated, constants):
    return ScenarioRunner(calibrated, constants)


class TestScenario:
    def test_baseline_is_neutral(self, runner):
        outcome = runner.run(ScenarioSpec(0.0, 0.0))
        assert outcome.pct_change == 0.0
        assert outcome.cumulative_incidence == runner.baseline_incidence

    def test_more_clinic_testing_reduces_incidence(self, runner):
        assert runner.run(ScenarioSpec(0.0, 0.2)).pct_change < 0

    def test_replacing_clinic_tests_can_raise_incidence(self, runner):
        assert runner.run(ScenarioSpec(1.0, 0.0)).pct_change > 0

    def test_awareness_outcome(self, runner):
        baseline = runner.run(ScenarioSpec(0.0, 0.0))
        boosted = runner.run(ScenarioSpec(0.0, 1.0))
        assert 0 < baseline.aware_end < boosted.aware_end < 1

    def test_scale_invariance(self, calibrated, constants):
        x0 = calibrated.initial_state.as_array()
        baseline = build_matrices(calibrated.parameters, constants.baseline)
        policy = build_matrices(calibrated.parameters, constants.policy(0.5, 0.1))
        changes = []
        for c in (1e-3, 1.0, 1e3):
            _, base = final_state(baseline, c * x0)
            _, scenario = final_state(policy, c * x0)
            changes.append((scenario - base) / base)
        np.testing.assert_allclose(changes, changes[1], rtol=0, atol=1e-10)

    def test_spec_ranges(self):
        with pytest.raises(ParameterError):
            ScenarioSpec(1.2, 0.0)
        with pytest.raises(ParameterError):
            ScenarioSpec(0.5, -0.1)

    def test_run_scenario_wrapper(self, calibrated, constants, runner):
        outcome = run_scenario(calibrated, ScenarioSpec(0.5, 0.5), constants)
        assert outcome.pct_change == pytest.approx(runner.incidence_change(0.5, 0.5), abs=1e-15)


class TestSweep:
    def test_single_cell(self, runner):
        result = runner.sweep([0.0], [0.0])
        assert result.mean_reduction == 0.0
        assert result.pct_change.shape == (1, 1)

    def test_grid(self, calibrated, constants):
        result = sweep(calibrated, COARSE, COARSE, constants)
        assert result.pct_change.shape == (5, 5)
        assert abs(result.pct_change[0, 0]) <= 1e-9
        assert result.is_monotone_in_chi()
        cells = -result.pct_change.ravel()[1:]
        assert result.mean_reduction == pytest.approx(cells.mean(), rel=1e-12)
        frame = result.to_frame()
        assert len(frame) == 25
        assert list(frame.columns) == ["jurisdiction", "gamma", "chi", "pct_change", "aware_end"]

    def test_grid_must_start_at_zero(self, runner):
        with pytest.raises(ParameterError):
            runner.sweep([0.25, 0.5], [0.0, 0.5])
        with pytest.raises(ParameterError):
            runner.sweep([0.0, 0.5], [0.0, 0.5, 0.4])

    def test_mean_reduction(self):
        pct = np.array([[0.0, -0.1], [0.2, -0.3]])
        assert mean_reduction(pct, [0.0, 1.0], [0.0, 1.0]) == pytest.approx((0.1 - 0.2 + 0.3) / 3)
        assert mean_reduction(pct, [0.0, 1.0], [0.0, 1.0], exclude_gamma_zero=True) == pytest.approx((-0.2 + 0.3) / 2)


class TestThreshold:
    @pytest.mark.parametrize("gamma", [0.25, 1.0])
    def test_matches_local_scan(self, runner, gamma):
        result = runner.threshold(gamma, tolerance=1e-4)
        chi = result.chi_threshold
        assert runner.incidence_change(gamma, chi - 1.1e-4) > 0
        assert runner.incidence_change(gamma, chi + 1.1e-4) < 0
        lo, hi = result.bracket
        assert lo <= chi <= hi
        assert result.iterations > 0

    @pytest.mark.parametrize("gamma", [0.25, 0.5, 0.75, 1.0])
    def test_threshold_offsets_replacement(self, runner, gamma):
        for tolerance in (1e-2, 1e-3, 1e-4):
            chi = runner.threshold(gamma, tolerance=tolerance).chi_threshold
            assert runner.incidence_change(gamma, chi) <= 0
            assert runner.incidence_change(gamma, chi - 2 * tolerance) > 0

    def test_ordering(self, runner):
        levels = [runner.threshold(gamma).chi_threshold for gamma in (0.25, 0.5, 0.75, 1.0)]
        assert np.all(np.diff(levels) >= -1e-4)
        assert levels[0] > 0

    def test_perfect_substitute(self, calibrated):
        substitute = PolicyConstants(
            kappa_self_a=0.83,
            kappa_self_u=1.0,
            kappa_self_s=1.0,
            kappa_care_a=0.83,
            kappa_care_u=1.0,
            kappa_care_s=1.0,
            t_confirm_au=0.0,
            t_confirm_s=0.0,
        )
        result = threshold_chi(calibrated, 1.0, substitute)
        assert result.chi_threshold == pytest.approx(0.0, abs=1e-4)

    def test_no_sign_change_below_cap(self, calibrated, constants):
        with pytest.raises(NoSignChange) as info:
            threshold_chi(calibrated, 1.0, constants, chi_cap=0.01)
        assert info.value.chi_cap == 0.01

    def test_gamma_range(self, runner):
        with pytest.raises(ParameterError):
            runner.threshold(0.0)

    def test_column_names(self):
        assert [threshold_column(g) for g in (0.25, 0.5, 0.75, 1.0)] == ["chi_025", "chi_050", "chi_075", "chi_100"]


class TestCohortTable:
    @pytest.fixture
    def quick_config(self, reference_config):
        return reference_config.model_copy(update={"grid_step": 0.5, "threshold_gammas": [0.5, 1.0]})

    def test_single_jurisdiction(self, calibrated, quick_config):
        table = benefit_risk_table([calibrated], quick_config)
        assert list(table.columns) == ["jurisdiction", "lambda_bar", "phi_bar", "r_t", "r_awr", "pct_inc_red", "chi_050", "chi_100"]
        row = table.iloc[0]
        expected = row["r_t"] - calibrated.transmission.lambda_d / calibrated.mortality.mu_d
        assert row["r_awr"] == pytest.approx(expected, abs=1e-12)
        # yearly ratio from the per-month surveillance rate
        assert row["lambda_bar"] == pytest.approx(0.0025 * 12)
        assert row["phi_bar"] == pytest.approx(0.017)
        assert row["chi_050"] <= row["chi_100"] + 1e-4

    def test_empty_cohort(self, quick_config):
        with pytest.raises(ParameterError):
            benefit_risk_table([], quick_config)

    def test_scatter_and_associations(self):
        table = pd.DataFrame({
            "jurisdiction": ["A", "B", "C", "D"],
            "lambda_bar": [0.001, 0.002, 0.003, 0.004],
            "phi_bar": [0.01, 0.02, 0.015, 0.03],
            "r_t": [1.5, 2.0, 1.8, 2.5],
            "r_awr": [0.1, 0.2, 0.3, 0.4],
            "pct_inc_red": [0.01, 0.02, 0.03, 0.04],
            "chi_100": [0.15, 0.25, 0.2, 0.3],
        })
        series = scatter_series(table)
        assert len(series) == 4 * 4 * 2
        assert set(series["outcome"]) == {"pct_inc_red", "chi_100"}
        summary = association_summary(table)
        assert summary["r_awr_vs_pct_inc_red"] == pytest.approx(1.0)
        assert summary["phi_bar_vs_chi_100"] == pytest.approx(1.0)

    def test_associations_need_three_rows(self):
        table = pd.DataFrame({column: [1.0, 2.0] for column in ("lambda_bar", "phi_bar", "r_t", "r_awr", "pct_inc_red")})
        assert association_summary(table) == {}


@pytest.mark.cohort
class TestReferenceCohort:
    def test_reductions(self, cohort_table):
        reduction = 100 * cohort_table["pct_inc_red"]
        assert reduction.mean() == pytest.approx(4.0, abs=0.5)
        assert reduction.median() == pytest.approx(3.9, abs=0.5)
        assert reduction["King County, WA"] == pytest.approx(7.3, abs=1.0)
        assert reduction["New York County, NY"] == pytest.approx(1.5, abs=0.5)
        assert (reduction > 0).all()

    def test_thresholds(self, cohort_table):
        low = 100 * cohort_table["chi_025"]
        assert low.between(3.5, 5.7).all(), low[~low.between(3.5, 5.7)]
        assert low["San Diego County, CA"] >= 3.5

        full = 100 * cohort_table["chi_100"]
        assert full.idxmax() == "San Francisco County, CA"
        assert full.max() == pytest.approx(27.3, abs=2.0)
        assert full.min() == pytest.approx(17.4, abs=2.0)
        assert full["San Diego County, CA"] == pytest.approx(17.4, abs=2.0)

    def test_threshold_ordering(self, cohort_table):
        levels = cohort_table[["chi_025", "chi_050", "chi_075", "chi_100"]].to_numpy()
        assert np.all(np.diff(levels, axis=1) >= -1e-4)

    def test_associations(self, cohort_table):
        summary = association_summary(cohort_table)
        assert summary["r_awr_vs_pct_inc_red"] >= 0.99
        assert summary["phi_bar_vs_chi_100"] >= 0.9
        assert abs(summary["r_t_vs_pct_inc_red"]) <= 0.5

    def test_sweeps_decrease_in_chi(self, calibrated_cohort, constants, reference_config):
        grid = reference_config.gamma_grid()
        for cal in calibrated_cohort:
            result = sweep(cal, grid, reference_config.chi_grid(), constants)
            assert result.is_monotone_in_chi(), cal.name


def random_record(rng, index):
    aware = rng.uniform(0.8, 0.96)
    return SurveillanceRecord(
        jurisdiction=f"Random {index}",
        lambda_bar=rng.uniform(0.001, 0.004),
        mu_bar=rng.uniform(0.006, 0.02),
        aware_fraction=aware,
        phi_bar=rng.uniform(0.013, 0.03),
        p_nocare=0.24 * aware,
        p_art=0.10 * aware,
        p_vls=0.66 * aware,
    )


@pytest.mark.cohort
def test_threshold_matches_dense_scan(reference_config, constants):
    rng = np.random.default_rng(2024)
    gamma, step, tolerance = 0.5, 1e-4, 1e-5
    for index in range(50):
        cal = calibrate_with_config(random_record(rng, index), reference_config)
        runner = ScenarioRunner(cal, constants, reference_config.horizon_months, reference_config.step_months)
        chi = runner.threshold(gamma, tolerance=tolerance).chi_threshold

        k = 0
        while runner.incidence_change(gamma, k * step) > 0:
            k += 1
        assert abs(chi - k * step) <= step + tolerance, cal.name
