"""
Calibration of stage parameters from surveillance aggregates

Surveillance gives population-level rates (transmission, mortality,
testing), the aware fraction and the care continuum. Stage-specific rates
follow from fixed multipliers relative to a reference stage and the
occupancy of each stage.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize

from .core.errors import CalibrationError, DegenerateJurisdiction, ParameterError
from .engine import DEFAULT_STEP_MONTHS, integrate_linear
from .model import (
    MONTHS_PER_YEAR,
    PolicyConstants,
    StageMortality,
    StageParameters,
    StageProgression,
    StageTesting,
    StageTransmission,
    StateVector,
    build_matrices,
    detection_rates,
    stage_flows,
)
from .ngm import awareness_reproduction_number, r_t_closed_form

logger = logging.getLogger(__name__)

VALIDATION_HORIZON_MONTHS = 36.0
INDICATORS = ("lambda_bar", "mu_bar", "aware_fraction", "phi_bar")

_SHARE_TOL = 1e-9

# Diagnosed-ratio fit: lower bound on either ratio, accepted miss in R_t and R_Awr
RATIO_FLOOR = 1e-3
REPRODUCTION_ATOL = 1e-4
INFEASIBLE_RESIDUAL = 1e3


@dataclass(frozen=True)
class SurveillanceRecord:
    """Surveillance aggregates for one jurisdiction; lambda_bar and phi_bar per month, mu_bar per year"""
    jurisdiction: str
    lambda_bar: float
    mu_bar: float
    aware_fraction: float
    phi_bar: float
    p_nocare: float
    p_art: float
    p_vls: float
    aware_low: Optional[float] = None
    aware_high: Optional[float] = None
    r_t_target: Optional[float] = None
    r_awr_target: Optional[float] = None

    def __post_init__(self):
        if not self.jurisdiction or not str(self.jurisdiction).strip():
            raise ParameterError("jurisdiction name is empty", field="jurisdiction")
        for name in ("lambda_bar", "mu_bar", "phi_bar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive rate, got {value}", field=name)
        for name in ("aware_fraction", "p_nocare", "p_art", "p_vls", "aware_low", "aware_high"):
            value = getattr(self, name)
            if value is None:
                continue
            if not (math.isfinite(value) and 0 <= value <= 1):
                raise ParameterError(f"{name} must lie in [0, 1], got {value}", field=name)
        if self.care_total > self.aware_fraction + _SHARE_TOL:
            raise ParameterError(
                f"care-continuum shares sum to {self.care_total:.4g}, above the aware fraction {self.aware_fraction:.4g}",
                field="p_nocare",
            )
        if self.aware_low is not None and self.aware_high is not None and self.aware_low > self.aware_high:
            raise ParameterError("aware_low is above aware_high", field="aware_low")
        if (self.r_t_target is None) != (self.r_awr_target is None):
            raise ParameterError("r_t_target and r_awr_target come as a pair", field="r_t_target")
        if self.r_t_target is not None:
            if not (math.isfinite(self.r_t_target) and self.r_t_target > 0):
                raise ParameterError(f"r_t_target must be positive, got {self.r_t_target}", field="r_t_target")
            if not (math.isfinite(self.r_awr_target) and self.r_awr_target < self.r_t_target):
                raise ParameterError("r_awr_target must lie below r_t_target", field="r_awr_target")

    @property
    def care_total(self) -> float:
        return self.p_nocare + self.p_art + self.p_vls

    @property
    def has_reproduction_targets(self) -> bool:
        return self.r_t_target is not None


@dataclass(frozen=True)
class ContinuumMultipliers:
    """
    Relative transmission (alpha, to chronic unaware), mortality (beta, to
    acute) and testing (nu, to chronic unaware) by stage and care state.
    """
    alpha_a: float
    alpha_s: float
    alpha_nocare: float
    alpha_art: float
    alpha_vls: float
    beta_u: float
    beta_s: float
    beta_nocare: float
    beta_art: float
    beta_vls: float
    nu_a: float
    nu_s: float

    def __post_init__(self):
        for item in self.__dataclass_fields__:
            value = getattr(self, item)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{item} must be positive, got {value}", field=item)
        if self.beta_s < max(1.0, self.beta_u, self.beta_nocare, self.beta_art, self.beta_vls):
            raise ParameterError("beta_s must be the largest mortality multiplier", field="beta_s")
        if self.alpha_vls >= 1:
            logger.debug(f"alpha_vls={self.alpha_vls} does not reduce transmission under viral suppression")


@dataclass(frozen=True)
class UnawareSplit:
    """Shares of the undiagnosed population in the acute and AIDS stages"""
    p_acute_given_unaware: float
    p_aids_given_unaware: float

    def __post_init__(self):
        for name in ("p_acute_given_unaware", "p_aids_given_unaware"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0 <= value <= 1):
                raise ParameterError(f"{name} must lie in [0, 1], got {value}", field=name)
        if self.p_acute_given_unaware + self.p_aids_given_unaware >= 1:
            raise ParameterError("unaware split must leave room for the chronic stage", field="p_acute_given_unaware")

    @property
    def p_chronic_given_unaware(self) -> float:
        return 1.0 - self.p_acute_given_unaware - self.p_aids_given_unaware


@dataclass(frozen=True)
class CareSensitivities:
    """Clinic test sensitivity by undiagnosed stage"""
    kappa_a: float
    kappa_u: float
    kappa_s: float

    def __post_init__(self):
        for name in ("kappa_a", "kappa_u", "kappa_s"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}", field=name)


@dataclass(frozen=True)
class DiagnosedRatios:
    """
    Diagnosed-stage rates relative to their reference stage: transmission
    to chronic unaware (lambda_d / lambda_u), mortality to acute
    (mu_d / mu_a).
    """
    transmission: float
    mortality: float

    def __post_init__(self):
        for name in ("transmission", "mortality"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"diagnosed {name} ratio must be nonnegative, got {value}", field=name)

    @classmethod
    def from_care(cls, mult: ContinuumMultipliers, occ: "StageOccupancy") -> "DiagnosedRatios":
        """Care-state multipliers averaged over the care continuum"""
        if occ.p_d <= 0:
            raise CalibrationError("no diagnosed population to average the care continuum over")
        transmission = mult.alpha_nocare * occ.p_nocare + mult.alpha_art * occ.p_art + mult.alpha_vls * occ.p_vls
        mortality = mult.beta_nocare * occ.p_nocare + mult.beta_art * occ.p_art + mult.beta_vls * occ.p_vls
        return cls(transmission / occ.p_d, mortality / occ.p_d)


@dataclass(frozen=True)
class StageOccupancy:
    """Probability that a person with HIV is in each compartment and care state"""
    p_a: float
    p_u: float
    p_s: float
    p_d: float
    p_nocare: float
    p_art: float
    p_vls: float

    def __post_init__(self):
        total = self.p_a + self.p_u + self.p_s + self.p_d
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"occupancy sums to {total!r}, not 1", field="p_u")
        if min(self.p_a, self.p_u, self.p_s, self.p_d) < 0:
            raise ParameterError("occupancy probabilities must be nonnegative", field="p_u")

    @property
    def p_unaware(self) -> float:
        return self.p_a + self.p_u + self.p_s

    def as_array(self) -> np.ndarray:
        return np.array([self.p_a, self.p_u, self.p_s, self.p_d])


@dataclass(frozen=True)
class CalibratedJurisdiction:
    name: str
    parameters: StageParameters
    occupancy: StageOccupancy
    split: UnawareSplit
    initial_state: StateVector

    def __post_init__(self):
        x0 = self.initial_state.as_array()
        if abs(x0.sum() - 1.0) > 1e-12:
            raise ParameterError("initial state must be normalized to total 1", field="initial_state")

    @property
    def progression(self) -> StageProgression:
        return self.parameters.progression

    @property
    def mortality(self) -> StageMortality:
        return self.parameters.mortality

    @property
    def transmission(self) -> StageTransmission:
        return self.parameters.transmission

    @property
    def testing(self) -> StageTesting:
        return self.parameters.testing


@dataclass
class ValidationRow:
    indicator: str
    surveillance: float
    simulated: float
    within_range: Optional[bool] = None

    @property
    def delta(self) -> float:
        return self.surveillance - self.simulated


@dataclass
class ValidationReport:
    """Surveillance against simulated aggregates for one jurisdiction"""
    jurisdiction: str
    horizon: float
    rows: List[ValidationRow] = field(default_factory=list)

    def row(self, indicator: str) -> ValidationRow:
        for item in self.rows:
            if item.indicator == indicator:
                return item
        raise KeyError(indicator)

    @property
    def max_abs_delta(self) -> float:
        return max(abs(item.delta) for item in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "jurisdiction": self.jurisdiction,
                "indicator": item.indicator,
                "surveillance": item.surveillance,
                "simulated": item.simulated,
                "delta": item.delta,
                "within_range": item.within_range,
            }
            for item in self.rows
        ])


def aggregate_transmission_rate(incidence: float, prevalence: float) -> float:
    """New infections per person with HIV per month, from annual incidence"""
    if not prevalence > 0:
        raise CalibrationError(f"prevalence must be positive, got {prevalence}")
    if incidence < 0:
        raise CalibrationError(f"incidence must be nonnegative, got {incidence}")
    return incidence / prevalence / MONTHS_PER_YEAR


def aggregate_mortality_rate(deaths: float, prevalence: float) -> float:
    """Deaths per person with HIV per year"""
    if not prevalence > 0:
        raise CalibrationError(f"prevalence must be positive, got {prevalence}")
    if deaths < 0:
        raise CalibrationError(f"deaths must be nonnegative, got {deaths}")
    return deaths / prevalence


def aggregate_testing_rate(new_diagnoses: float, unaware_prev_year: float, new_infections: float) -> float:
    """Diagnoses per undiagnosed person with HIV per month"""
    denominator = unaware_prev_year + new_infections
    if not denominator > 0:
        raise CalibrationError(f"undiagnosed population must be positive, got {denominator}")
    if new_diagnoses < 0:
        raise CalibrationError(f"new diagnoses must be nonnegative, got {new_diagnoses}")
    return new_diagnoses / denominator / MONTHS_PER_YEAR


def stage_occupancy(
    aware_fraction: float,
    split: UnawareSplit,
    p_nocare: float,
    p_art: float,
    p_vls: float,
) -> StageOccupancy:
    p_unaware = 1.0 - aware_fraction
    p_a = split.p_acute_given_unaware * p_unaware
    p_s = split.p_aids_given_unaware * p_unaware
    p_u = p_unaware - p_a - p_s
    if p_u < 0:
        raise CalibrationError(f"chronic-unaware occupancy is negative ({p_u:.4g})")

    p_d = aware_fraction
    shares = np.array([p_nocare, p_art, p_vls], dtype=float)
    if p_d > 0:
        if shares.sum() <= 0:
            raise CalibrationError("diagnosed population has no care-continuum shares")
        shares = shares / shares.sum() * p_d
    else:
        shares = np.zeros(3)

    return StageOccupancy(
        p_a=p_a, p_u=p_u, p_s=p_s, p_d=p_d,
        p_nocare=float(shares[0]), p_art=float(shares[1]), p_vls=float(shares[2]),
    )


def derive_stage_transmission(
    lambda_bar: float,
    mult: ContinuumMultipliers,
    occ: StageOccupancy,
    ratios: Optional[DiagnosedRatios] = None,
) -> StageTransmission:
    """Per-month stage transmission; ``ratios`` replaces the care-continuum average for the diagnosed stage"""
    if ratios is None:
        diagnosed = mult.alpha_nocare * occ.p_nocare + mult.alpha_art * occ.p_art + mult.alpha_vls * occ.p_vls
    else:
        diagnosed = ratios.transmission * occ.p_d
    denominator = mult.alpha_a * occ.p_a + occ.p_u + mult.alpha_s * occ.p_s + diagnosed
    if not denominator > 0:
        raise CalibrationError("transmission weights sum to zero")

    if occ.p_d <= 0:
        raise CalibrationError("no diagnosed population to average diagnosed transmission over")
    lambda_u = lambda_bar / denominator
    lambda_d = lambda_u * diagnosed / occ.p_d

    return StageTransmission(
        lambda_a=mult.alpha_a * lambda_u,
        lambda_u=lambda_u,
        lambda_s=mult.alpha_s * lambda_u,
        lambda_d=lambda_d,
    )


def derive_stage_mortality(
    mu_bar: float,
    mult: ContinuumMultipliers,
    occ: StageOccupancy,
    ratios: Optional[DiagnosedRatios] = None,
) -> StageMortality:
    """Per-month stage mortality from the annual aggregate"""
    if ratios is None:
        diagnosed = mult.beta_nocare * occ.p_nocare + mult.beta_art * occ.p_art + mult.beta_vls * occ.p_vls
    else:
        diagnosed = ratios.mortality * occ.p_d
    denominator = occ.p_a + mult.beta_u * occ.p_u + mult.beta_s * occ.p_s + diagnosed
    if not denominator > 0:
        raise CalibrationError("mortality weights sum to zero")
    if occ.p_d <= 0:
        raise CalibrationError("no diagnosed population to average diagnosed mortality over")

    mu_a = mu_bar / MONTHS_PER_YEAR / denominator
    return StageMortality(
        mu_a=mu_a,
        mu_u=mult.beta_u * mu_a,
        mu_s=mult.beta_s * mu_a,
        mu_d=mu_a * diagnosed / occ.p_d,
    )


def derive_stage_testing(
    phi_bar: float,
    sens: CareSensitivities,
    mult: ContinuumMultipliers,
    split: UnawareSplit,
    alpha_weighting: bool = True,
) -> StageTesting:
    """
    Invert the aggregate testing rate for the chronic-stage rate.

    With ``alpha_weighting`` the acute and AIDS terms of the denominator
    carry their transmission multipliers; without it the denominator is
    the sensitivity-weighted stage mix only, which makes the aggregate
    diagnosis rate of the calibrated state equal phi_bar.
    """
    alpha_a, alpha_s = (mult.alpha_a, mult.alpha_s) if alpha_weighting else (1.0, 1.0)
    denominator = (
        sens.kappa_a * mult.nu_a * alpha_a * split.p_acute_given_unaware
        + mult.nu_s * sens.kappa_s * alpha_s * split.p_aids_given_unaware
        + sens.kappa_u * split.p_chronic_given_unaware
    )
    if not denominator > 0:
        raise CalibrationError("testing weights sum to zero")
    return StageTesting.from_chronic(phi_bar / denominator, mult.nu_a, mult.nu_s)


def fit_unaware_split(
    record: SurveillanceRecord,
    mult: ContinuumMultipliers,
    sens: CareSensitivities,
    progression: StageProgression,
    initial: Optional[UnawareSplit] = None,
    alpha_weighting: bool = True,
    ratios: Optional[DiagnosedRatios] = None,
) -> UnawareSplit:
    """
    Solve the acute and AIDS shares of the undiagnosed population so that
    both compartments are stationary at t=0 under baseline testing.

    Acute balance: incidence (lambda_bar, per person with HIV) equals the
    acute outflow. AIDS balance: chronic progression equals the AIDS
    outflow. Testing and mortality depend on the split, so the pair is a
    fixed point.
    """
    p_unaware = 1.0 - record.aware_fraction
    if p_unaware <= 0:
        raise DegenerateJurisdiction(f"{record.jurisdiction}: nobody is unaware", jurisdiction=record.jurisdiction)
    initial = initial or UnawareSplit(0.04, 0.12)

    def update(shares: np.ndarray) -> np.ndarray:
        split = UnawareSplit(float(shares[0]), float(shares[1]))
        occ = stage_occupancy(record.aware_fraction, split, record.p_nocare, record.p_art, record.p_vls)
        mort = derive_stage_mortality(record.mu_bar, mult, occ, ratios)
        testing = derive_stage_testing(record.phi_bar, sens, mult, split, alpha_weighting)
        p_a = record.lambda_bar / (progression.sigma_a_to_u + sens.kappa_a * testing.phi_a + mort.mu_a)
        p_s = progression.sigma_u_to_s * (p_unaware - p_a) / (
            sens.kappa_s * testing.phi_s + mort.mu_s + progression.sigma_u_to_s
        )
        return np.array([p_a, p_s]) / p_unaware

    start = np.array([initial.p_acute_given_unaware, initial.p_aids_given_unaware])
    try:
        shares = optimize.fixed_point(update, start, xtol=1e-12, maxiter=500)
        split = UnawareSplit(float(shares[0]), float(shares[1]))
    except (RuntimeError, ParameterError) as exc:
        raise CalibrationError(
            f"{record.jurisdiction}: stage balance has no admissible unaware split ({exc})",
            jurisdiction=record.jurisdiction,
        ) from exc

    logger.debug(
        f"{record.jurisdiction}: fitted P(A|unaware)={split.p_acute_given_unaware:.4f}, "
        f"P(S|unaware)={split.p_aids_given_unaware:.4f}"
    )
    return split


def stage_parameters(
    record: SurveillanceRecord,
    mult: ContinuumMultipliers,
    split: UnawareSplit,
    sens: CareSensitivities,
    progression: StageProgression,
    alpha_weighting: bool = True,
    ratios: Optional[DiagnosedRatios] = None,
) -> Tuple[StageParameters, StageOccupancy]:
    """Stage parameters and occupancy for a given unaware split"""
    occ = stage_occupancy(record.aware_fraction, split, record.p_nocare, record.p_art, record.p_vls)
    parameters = StageParameters(
        progression=progression,
        mortality=derive_stage_mortality(record.mu_bar, mult, occ, ratios),
        transmission=derive_stage_transmission(record.lambda_bar, mult, occ, ratios),
        testing=derive_stage_testing(record.phi_bar, sens, mult, split, alpha_weighting),
    )
    return parameters, occ


def baseline_reproduction_numbers(parameters: StageParameters, sens: CareSensitivities) -> Tuple[float, float]:
    """(R_t, R_Awr) under clinic testing only"""
    testing = parameters.testing
    r_t = r_t_closed_form(
        parameters.transmission,
        parameters.progression,
        parameters.mortality,
        sens.kappa_a * testing.phi_a,
        sens.kappa_u * testing.phi_u,
        sens.kappa_s * testing.phi_s,
    )
    return r_t, awareness_reproduction_number(r_t, parameters.transmission.lambda_d, parameters.mortality.mu_d)


def fit_diagnosed_ratios(
    record: SurveillanceRecord,
    mult: ContinuumMultipliers,
    split: UnawareSplit,
    sens: CareSensitivities,
    progression: StageProgression,
    alpha_weighting: bool = True,
    fit_split: bool = False,
) -> Tuple[DiagnosedRatios, UnawareSplit]:
    """
    Solve the diagnosed transmission and mortality ratios so that the
    calibrated jurisdiction reproduces the record's R_t and R_Awr.

    The ratios replace the care-continuum averages, so lambda_bar and
    mu_bar stay reproduced. They are bounded by alpha_a and beta_s, which
    keeps acute transmission and AIDS mortality the largest stage rates.
    When ``fit_split`` is set the unaware split is refitted for every
    trial pair.

    Raises:
        CalibrationError: the record has no targets or no trial pair
            admits a valid parameter set
    """
    if not record.has_reproduction_targets:
        raise CalibrationError(f"{record.jurisdiction}: no R_t / R_Awr targets to fit", jurisdiction=record.jurisdiction)
    targets = np.array([record.r_t_target, record.r_awr_target])
    lower = np.log([RATIO_FLOOR, RATIO_FLOOR])
    ceiling = np.array([mult.alpha_a, mult.beta_s])
    upper = np.log(ceiling)

    def solve(log_ratios: np.ndarray) -> Tuple[DiagnosedRatios, UnawareSplit, StageParameters]:
        ratios = DiagnosedRatios(*(float(value) for value in np.minimum(np.exp(log_ratios), ceiling)))
        fitted = fit_unaware_split(record, mult, sens, progression, split, alpha_weighting, ratios) if fit_split else split
        parameters, _ = stage_parameters(record, mult, fitted, sens, progression, alpha_weighting, ratios)
        return ratios, fitted, parameters

    def residuals(log_ratios: np.ndarray) -> np.ndarray:
        try:
            _, _, parameters = solve(log_ratios)
        except (CalibrationError, ParameterError):
            return np.full(2, INFEASIBLE_RESIDUAL)
        return np.array(baseline_reproduction_numbers(parameters, sens)) - targets

    occ = stage_occupancy(record.aware_fraction, split, record.p_nocare, record.p_art, record.p_vls)
    care = DiagnosedRatios.from_care(mult, occ)
    start = np.log([max(care.transmission, RATIO_FLOOR), max(care.mortality, RATIO_FLOOR)])
    start = np.clip(start, lower + 1e-9, upper - 1e-9)
    result = optimize.least_squares(residuals, start, bounds=(lower, upper), xtol=1e-12, ftol=1e-12, gtol=1e-12)

    ratios, fitted, _ = solve(result.x)
    miss = float(np.max(np.abs(result.fun)))
    if miss > REPRODUCTION_ATOL:
        logger.warning(
            f"{record.jurisdiction}: reproduction numbers fitted to within {miss:.3g} only "
            f"(R_t {record.r_t_target + result.fun[0]:.3f} vs {record.r_t_target:.3f}, "
            f"R_Awr {record.r_awr_target + result.fun[1]:.3f} vs {record.r_awr_target:.3f})"
        )
    logger.debug(
        f"{record.jurisdiction}: lambda_d/lambda_u={ratios.transmission:.4f}, mu_d/mu_a={ratios.mortality:.4f} "
        f"after {result.nfev} evaluations"
    )
    return ratios, fitted


def calibrate(
    record: SurveillanceRecord,
    mult: ContinuumMultipliers,
    split: UnawareSplit,
    sens: CareSensitivities,
    progression: StageProgression,
    alpha_weighting: bool = True,
    fit_split: bool = False,
    match_reproduction: bool = False,
) -> CalibratedJurisdiction:
    """
    Turn a surveillance record into a calibrated jurisdiction.

    Args:
        record: surveillance aggregates
        mult: stage multipliers
        split: unaware split, or the starting guess when ``fit_split`` is set
        sens: clinic test sensitivities
        progression: stage progression rates
        alpha_weighting: carry alpha factors in the testing inversion
        fit_split: solve the unaware split from stage balance
        match_reproduction: when the record carries R_t / R_Awr targets,
            solve the diagnosed ratios to reproduce them

    Raises:
        DegenerateJurisdiction: everybody is already diagnosed
        CalibrationError: the aggregates admit no valid parameter set
    """
    if record.aware_fraction >= 1:
        raise DegenerateJurisdiction(
            f"{record.jurisdiction}: aware fraction is 1, no undiagnosed population to seed",
            jurisdiction=record.jurisdiction,
        )
    if record.aware_fraction <= 0:
        raise CalibrationError(f"{record.jurisdiction}: aware fraction is 0", jurisdiction=record.jurisdiction)

    try:
        ratios = None
        if match_reproduction and record.has_reproduction_targets:
            ratios, split = fit_diagnosed_ratios(record, mult, split, sens, progression, alpha_weighting, fit_split)
        elif fit_split:
            split = fit_unaware_split(record, mult, sens, progression, split, alpha_weighting)
        parameters, occ = stage_parameters(record, mult, split, sens, progression, alpha_weighting, ratios)
    except CalibrationError as exc:
        if exc.jurisdiction is None:
            raise CalibrationError(f"{record.jurisdiction}: {exc.message}", jurisdiction=record.jurisdiction) from exc
        raise
    except ParameterError as exc:
        raise CalibrationError(f"{record.jurisdiction}: {exc.message}", jurisdiction=record.jurisdiction) from exc

    x0 = occ.as_array()
    calibrated = CalibratedJurisdiction(
        name=record.jurisdiction,
        parameters=parameters,
        occupancy=occ,
        split=split,
        initial_state=StateVector.from_array(x0 / x0.sum()),
    )
    logger.debug(f"Calibrated {record.jurisdiction}: lambda_u={parameters.transmission.lambda_u:.5g}, phi_u={parameters.testing.phi_u:.5g}")
    return calibrated


def calibrate_with_config(record: SurveillanceRecord, config) -> CalibratedJurisdiction:
    """calibrate() with every constant taken from a RunConfig"""
    return calibrate(
        record,
        config.multipliers(),
        config.unaware_split(),
        config.care_sensitivities(),
        config.progression(),
        alpha_weighting=config.testing_alpha_weighting,
        fit_split=config.fit_unaware_split,
        match_reproduction=config.match_reproduction_numbers,
    )


def instantaneous_aggregates(cal: CalibratedJurisdiction, constants: PolicyConstants) -> Dict[str, float]:
    """Surveillance-style aggregates of the calibrated state at t=0 under baseline testing"""
    det = detection_rates(cal.testing, constants.baseline)
    flows = stage_flows(cal.initial_state, cal.parameters, det)
    return {
        "lambda_bar": flows["incidence"] / flows["prevalence"],
        "mu_bar": flows["deaths"] / flows["prevalence"] * MONTHS_PER_YEAR,
        "aware_fraction": cal.initial_state.d / flows["prevalence"],
        "phi_bar": flows["diagnoses"] / flows["unaware"],
    }


def simulated_aggregates(
    cal: CalibratedJurisdiction,
    constants: PolicyConstants,
    horizon: float = VALIDATION_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> Dict[str, float]:
    """
    Surveillance-style aggregates over a baseline run.

    Rates are ratios of time integrals of the flows to time integrals of
    the population they are drawn from; the aware fraction is a time
    average.
    """
    policy = constants.baseline
    det = detection_rates(cal.testing, policy)
    traj = integrate_linear(build_matrices(cal.parameters, policy), cal.initial_state, horizon, step)

    x = traj.states
    prevalence = x.sum(axis=1)
    unaware = x[:, :3].sum(axis=1)
    incidence = x @ cal.transmission.as_array()
    deaths = x @ cal.mortality.as_array()
    diagnoses = x[:, :3] @ det

    def area(values: np.ndarray) -> float:
        return float(integrate.trapezoid(values, traj.times))

    return {
        "lambda_bar": area(incidence) / area(prevalence),
        "mu_bar": area(deaths) / area(prevalence) * MONTHS_PER_YEAR,
        "aware_fraction": area(x[:, 3] / prevalence) / horizon,
        "phi_bar": area(diagnoses) / area(unaware),
    }


def validate_against_surveillance(
    cal: CalibratedJurisdiction,
    record: SurveillanceRecord,
    constants: PolicyConstants,
    horizon: float = VALIDATION_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> ValidationReport:
    """Compare surveillance aggregates with the calibrated model; horizon 0 compares at t=0"""
    if horizon == 0:
        simulated = instantaneous_aggregates(cal, constants)
    else:
        simulated = simulated_aggregates(cal, constants, horizon, step)

    report = ValidationReport(jurisdiction=cal.name, horizon=horizon)
    for indicator in INDICATORS:
        row = ValidationRow(indicator, getattr(record, indicator), simulated[indicator])
        if indicator == "aware_fraction" and record.aware_low is not None and record.aware_high is not None:
            row.within_range = record.aware_low - _SHARE_TOL <= row.simulated <= record.aware_high + _SHARE_TOL
        report.rows.append(row)
    return report
