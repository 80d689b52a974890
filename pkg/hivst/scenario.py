"""
Self-testing policy scenarios

Every scenario is a ten-year run of the linear system from the calibrated
state with detection rates rebuilt for (gamma, chi). Outcomes are compared
with the baseline (0, 0) run of the same jurisdiction. Percent values are
decimals (0.073 for 7.3%).
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, stats

from .calibration import CalibratedJurisdiction, SurveillanceRecord, instantaneous_aggregates
from .core.errors import NoSignChange, NumericalError, ParameterError
from .engine import DEFAULT_HORIZON_MONTHS, DEFAULT_STEP_MONTHS, final_state
from .model import MONTHS_PER_YEAR, PolicyConstants, build_matrices
from .ngm import report_for_parameters
from .parallel import parallel_map

logger = logging.getLogger(__name__)

THRESHOLD_START = 0.05
DEFAULT_CHI_CAP = 2.0
DEFAULT_TOLERANCE = 1e-4
INDICATOR_COLUMNS = ("lambda_bar", "phi_bar", "r_t", "r_awr")


@dataclass(frozen=True)
class ScenarioSpec:
    gamma: float
    chi: float
    horizon: float = DEFAULT_HORIZON_MONTHS

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ParameterError(f"gamma must lie in [0, 1], got {self.gamma}", field="gamma")
        if not (self.chi >= 0 and math.isfinite(self.chi)):
            raise ParameterError(f"chi must be nonnegative, got {self.chi}", field="chi")
        if not self.horizon > 0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}", field="horizon")


@dataclass(frozen=True)
class ScenarioOutcome:
    gamma: float
    chi: float
    cumulative_incidence: float
    pct_change: float
    aware_end: float


@dataclass(frozen=True)
class SweepResult:
    """Outcomes over a (gamma, chi) grid; rows index gamma, columns chi"""
    jurisdiction: str
    gamma_grid: np.ndarray
    chi_grid: np.ndarray
    pct_change: np.ndarray
    awareness_end: np.ndarray
    mean_reduction: float

    def is_monotone_in_chi(self) -> bool:
        """Incidence change strictly decreases along chi for every gamma"""
        return bool(np.all(np.diff(self.pct_change, axis=1) < 0))

    def to_frame(self) -> pd.DataFrame:
        gamma, chi = np.meshgrid(self.gamma_grid, self.chi_grid, indexing="ij")
        return pd.DataFrame({
            "jurisdiction": self.jurisdiction,
            "gamma": gamma.ravel(),
            "chi": chi.ravel(),
            "pct_change": self.pct_change.ravel(),
            "aware_end": self.awareness_end.ravel(),
        })


@dataclass(frozen=True)
class ThresholdResult:
    jurisdiction: str
    gamma: float
    chi_threshold: float
    bracket: Tuple[float, float]
    iterations: int


def mean_reduction(pct_change: np.ndarray, gamma_grid: Sequence[float], chi_grid: Sequence[float], exclude_gamma_zero: bool = False) -> float:
    """Mean of the reductions (-pct_change) over every grid cell except the baseline"""
    gamma, chi = np.meshgrid(np.asarray(gamma_grid), np.asarray(chi_grid), indexing="ij")
    mask = ~((gamma == 0) & (chi == 0))
    if exclude_gamma_zero:
        mask &= gamma != 0
    if not mask.any():
        return 0.0
    return float(-np.asarray(pct_change)[mask].mean())


def _check_grid(values: Sequence[float], name: str, upper: Optional[float]) -> np.ndarray:
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError(f"{name} must be a nonempty list", field=name)
    if grid[0] != 0:
        raise ParameterError(f"{name} must start at 0", field=name)
    if np.any(np.diff(grid) <= 0):
        raise ParameterError(f"{name} must be strictly ascending", field=name)
    if upper is not None and grid[-1] > upper:
        raise ParameterError(f"{name} must not exceed {upper}", field=name)
    return grid


class ScenarioRunner:
    """
    Runs policies against one calibrated jurisdiction.

    The baseline run is computed once on first use.
    """

    def __init__(
        self,
        cal: CalibratedJurisdiction,
        constants: PolicyConstants,
        horizon: float = DEFAULT_HORIZON_MONTHS,
        step: float = DEFAULT_STEP_MONTHS,
    ):
        self.cal = cal
        self.constants = constants
        self.horizon = horizon
        self.step = step

    def _simulate(self, gamma: float, chi: float) -> Tuple[np.ndarray, float]:
        M = build_matrices(self.cal.parameters, self.constants.policy(gamma, chi))
        return final_state(M, self.cal.initial_state, self.horizon, self.step)

    @cached_property
    def baseline_incidence(self) -> float:
        _, incidence = self._simulate(0.0, 0.0)
        if not incidence > 0:
            raise NumericalError(f"{self.cal.name}: baseline incidence is not positive", stage="scenario")
        return incidence

    def incidence_change(self, gamma: float, chi: float) -> float:
        """Relative change in cumulative incidence against baseline"""
        _, incidence = self._simulate(gamma, chi)
        return (incidence - self.baseline_incidence) / self.baseline_incidence

    def run(self, spec: ScenarioSpec) -> ScenarioOutcome:
        if spec.horizon != self.horizon:
            return ScenarioRunner(self.cal, self.constants, spec.horizon, self.step).run(spec)
        state, incidence = self._simulate(spec.gamma, spec.chi)
        return ScenarioOutcome(
            gamma=spec.gamma,
            chi=spec.chi,
            cumulative_incidence=incidence,
            pct_change=(incidence - self.baseline_incidence) / self.baseline_incidence,
            aware_end=float(state[3] / state.sum()),
        )

    def sweep(self, gamma_grid: Sequence[float], chi_grid: Sequence[float], exclude_gamma_zero: bool = False) -> SweepResult:
        gammas = _check_grid(gamma_grid, "gamma_grid", 1.0)
        chis = _check_grid(chi_grid, "chi_grid", 1.0)

        pct = np.empty((gammas.size, chis.size))
        aware = np.empty_like(pct)
        for i, gamma in enumerate(gammas):
            for j, chi in enumerate(chis):
                outcome = self.run(ScenarioSpec(gamma, chi, self.horizon))
                pct[i, j] = outcome.pct_change
                aware[i, j] = outcome.aware_end

        result = SweepResult(
            jurisdiction=self.cal.name,
            gamma_grid=gammas,
            chi_grid=chis,
            pct_change=pct,
            awareness_end=aware,
            mean_reduction=mean_reduction(pct, gammas, chis, exclude_gamma_zero),
        )
        if not result.is_monotone_in_chi():
            logger.warning(f"{self.cal.name}: incidence change is not strictly decreasing in chi on the sweep grid")
        return result

    def threshold(self, gamma: float, tolerance: float = DEFAULT_TOLERANCE, chi_cap: float = DEFAULT_CHI_CAP) -> ThresholdResult:
        """
        Smallest increase in testing that keeps incidence from rising.

        The incidence change decreases in chi; the root is bracketed by
        doubling chi from THRESHOLD_START up to ``chi_cap`` and refined by
        bisection to ``tolerance``.
        """
        if not 0 < gamma <= 1:
            raise ParameterError(f"gamma must lie in (0, 1], got {gamma}", field="gamma")
        change = partial(self.incidence_change, gamma)

        if change(0.0) <= 0:
            return ThresholdResult(self.cal.name, gamma, 0.0, (0.0, 0.0), 0)

        lo, hi = 0.0, min(THRESHOLD_START, chi_cap)
        while change(hi) > 0:
            if hi >= chi_cap:
                raise NoSignChange(
                    f"{self.cal.name}: incidence still rises at chi={chi_cap} with gamma={gamma}",
                    gamma=gamma,
                    chi_cap=chi_cap,
                )
            lo, hi = hi, min(2.0 * hi, chi_cap)

        root, info = optimize.bisect(change, lo, hi, xtol=tolerance, full_output=True)
        # bisect returns a midpoint that may sit just below the root
        chi = float(root)
        while change(chi) > 0 and chi < hi:
            chi = min(chi + tolerance, hi)
        logger.debug(f"{self.cal.name}: gamma={gamma} threshold chi={chi:.6f} in {info.iterations} iterations")
        return ThresholdResult(self.cal.name, gamma, chi, (lo, hi), int(info.iterations))


def run_scenario(
    cal: CalibratedJurisdiction,
    spec: ScenarioSpec,
    constants: PolicyConstants,
    step: float = DEFAULT_STEP_MONTHS,
) -> ScenarioOutcome:
    return ScenarioRunner(cal, constants, spec.horizon, step).run(spec)


def sweep(
    cal: CalibratedJurisdiction,
    gamma_grid: Sequence[float],
    chi_grid: Sequence[float],
    constants: PolicyConstants,
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
    exclude_gamma_zero: bool = False,
) -> SweepResult:
    return ScenarioRunner(cal, constants, horizon, step).sweep(gamma_grid, chi_grid, exclude_gamma_zero)


def threshold_chi(
    cal: CalibratedJurisdiction,
    gamma: float,
    constants: PolicyConstants,
    tolerance: float = DEFAULT_TOLERANCE,
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
    chi_cap: float = DEFAULT_CHI_CAP,
) -> ThresholdResult:
    return ScenarioRunner(cal, constants, horizon, step).threshold(gamma, tolerance, chi_cap)


def threshold_column(gamma: float) -> str:
    """Column name of a threshold level, chi_025 for gamma 0.25"""
    return f"chi_{int(round(gamma * 100)):03d}"


def jurisdiction_row(
    cal: CalibratedJurisdiction,
    config,
    records: Optional[Mapping[str, SurveillanceRecord]] = None,
) -> Dict[str, float]:
    """One row of the cohort table for a calibrated jurisdiction"""
    constants = config.policy_constants()
    runner = ScenarioRunner(cal, constants, config.horizon_months, config.step_months)
    ngm = report_for_parameters(cal.parameters, constants.baseline)

    record = (records or {}).get(cal.name)
    if record is not None:
        lambda_bar, phi_bar = record.lambda_bar, record.phi_bar
    else:
        aggregates = instantaneous_aggregates(cal, constants)
        lambda_bar, phi_bar = aggregates["lambda_bar"], aggregates["phi_bar"]
    # lambda_bar is tabulated as a yearly ratio, phi_bar per month
    lambda_bar *= MONTHS_PER_YEAR

    result = runner.sweep(config.gamma_grid(), config.chi_grid(), config.exclude_gamma_zero)
    row = {
        "jurisdiction": cal.name,
        "lambda_bar": lambda_bar,
        "phi_bar": phi_bar,
        "r_t": ngm.r_t,
        "r_awr": ngm.r_awr,
        "pct_inc_red": result.mean_reduction,
    }
    for gamma in config.threshold_gammas:
        found = runner.threshold(gamma, config.threshold_tolerance, config.threshold_chi_cap)
        row[threshold_column(gamma)] = found.chi_threshold
    logger.info(f"{cal.name}: mean reduction {100 * result.mean_reduction:.1f}%")
    return row


def benefit_risk_table(
    cohort: Sequence[CalibratedJurisdiction],
    config,
    records: Optional[Mapping[str, SurveillanceRecord]] = None,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    Cohort table: surveillance indicators, reproduction numbers, mean
    incidence reduction and threshold testing levels, one row per
    jurisdiction in cohort order. lambda_bar is new infections per person
    with HIV per year; phi_bar is diagnoses per undiagnosed person per
    month.
    """
    if not cohort:
        raise ParameterError("cohort is empty", field="cohort")
    rows = parallel_map(cohort, partial(jurisdiction_row, config=config, records=records), n_jobs, desc="cohort")
    columns = ["jurisdiction", *INDICATOR_COLUMNS, "pct_inc_red", *(threshold_column(g) for g in config.threshold_gammas)]
    return pd.DataFrame(rows, columns=columns)


def _outcome_columns(table: pd.DataFrame) -> List[str]:
    thresholds = [column for column in table.columns if column.startswith("chi_")]
    return ["pct_inc_red", *thresholds[-1:]]


def scatter_series(table: pd.DataFrame) -> pd.DataFrame:
    """Long-format indicator against outcome pairs, one row per jurisdiction and pair"""
    frames = []
    for outcome in _outcome_columns(table):
        for indicator in INDICATOR_COLUMNS:
            frames.append(pd.DataFrame({
                "jurisdiction": table["jurisdiction"],
                "indicator": indicator,
                "indicator_value": table[indicator],
                "outcome": outcome,
                "outcome_value": table[outcome],
            }))
    return pd.concat(frames, ignore_index=True)


def association_summary(table: pd.DataFrame) -> Dict[str, float]:
    """Spearman rank correlation of every indicator with every outcome"""
    if len(table) < 3:
        logger.warning(f"Cohort of {len(table)} is too small for rank correlations")
        return {}
    summary = {}
    for outcome in _outcome_columns(table):
        for indicator in INDICATOR_COLUMNS:
            rho = stats.spearmanr(table[indicator], table[outcome]).statistic
            if math.isfinite(rho):
                summary[f"{indicator}_vs_{outcome}"] = float(rho)
            else:
                logger.warning(f"Rank correlation {indicator} vs {outcome} is undefined (constant column)")
    return summary
