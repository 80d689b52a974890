"""
Configuration management for hivst

Two layers, both pydantic-settings models:

* ``Settings`` holds process-level knobs (logging, parallelism) read from
  the environment and an optional ``.env`` in the working directory.
* ``RunConfig`` holds the study constants, multipliers and numerical
  controls. It is read from a dotenv-grammar file passed on the command
  line; environment variables with the same ``HIVST_`` key override it.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError, ParameterError

ENV_PREFIX = "HIVST_"


class Settings(BaseSettings):
    """Process settings with environment variable support"""

    app_name: str = Field(default="hivst", description="Application name")
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[str] = Field(default=None, description="Log file path")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Log format string"
    )
    workers: int = Field(default=1, ge=1, description="Processes used for cohort and sweep maps")
    json_errors: bool = Field(default=False, description="Emit machine-readable errors on stderr")

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


class RunConfig(BaseSettings):
    """Study configuration: model constants, multipliers, grids and steps"""

    # Stage progression, given as mean durations
    sigma_a_to_u_days: float = Field(default=60.0, gt=0, description="Mean acute stage duration (days)")
    sigma_u_to_s_years: float = Field(default=11.8, gt=0, description="Mean chronic stage duration (years)")

    # Self-test confirmation delays
    t_confirm_au_days: float = Field(default=90.0, ge=0, description="Positive self-test to diagnosis, acute and chronic (days)")
    t_confirm_s_days: float = Field(default=30.0, ge=0, description="Positive self-test to diagnosis, AIDS (days)")

    # Test sensitivities
    kappa_care_a: float = Field(default=0.83, ge=0, le=1)
    kappa_care_u: float = Field(default=1.0, ge=0, le=1)
    kappa_care_s: float = Field(default=1.0, ge=0, le=1)
    kappa_self_a: float = Field(default=0.0, ge=0, le=1)
    kappa_self_u: float = Field(default=0.92, ge=0, le=1)
    kappa_self_s: float = Field(default=0.92, ge=0, le=1)

    # Testing multipliers relative to chronic-unaware
    nu_a: float = Field(default=1.0, gt=0)
    nu_s: float = Field(default=4.08, gt=0)

    # Mortality multipliers relative to acute
    beta_u: float = Field(default=2.538, gt=0)
    beta_s: float = Field(default=6.172, gt=0)
    beta_nocare: float = Field(default=2.538, gt=0)
    beta_art: float = Field(default=2.538, gt=0)
    beta_vls: float = Field(default=0.6346, gt=0)

    # Transmission multipliers relative to chronic-unaware; no defaults
    alpha_a: float = Field(gt=0)
    alpha_s: float = Field(gt=0)
    alpha_nocare: float = Field(gt=0)
    alpha_art: float = Field(gt=0)
    alpha_vls: float = Field(gt=0)

    # Split of the undiagnosed population
    fit_unaware_split: bool = Field(default=False, description="Solve P(A|unaware), P(S|unaware) from stage balance")
    p_acute_given_unaware: float = Field(default=0.04, ge=0, le=1)
    p_aids_given_unaware: float = Field(default=0.12, ge=0, le=1)
    testing_alpha_weighting: bool = Field(default=True, description="Carry alpha factors in the testing-rate inversion")
    match_reproduction_numbers: bool = Field(
        default=False,
        description="Solve diagnosed transmission and mortality ratios to reproduce per-jurisdiction R_t and R_Awr targets",
    )

    # Policy grid
    grid_step: float = Field(default=0.05, gt=0, le=1)
    gamma_max: float = Field(default=1.0, ge=0, le=1)
    chi_max: float = Field(default=1.0, ge=0, le=1)
    exclude_gamma_zero: bool = Field(default=False, description="Drop the gamma=0 column from the mean reduction")

    # Threshold search
    threshold_gammas: List[float] = Field(default=[0.25, 0.5, 0.75, 1.0])
    threshold_tolerance: float = Field(default=1e-4, gt=0)
    threshold_chi_cap: float = Field(default=2.0, gt=0)

    # Integration
    horizon_months: float = Field(default=120.0, gt=0)
    step_months: float = Field(default=0.25, gt=0)
    validation_horizon_months: float = Field(default=36.0, gt=0)

    # Nonlinear shell used by the linearization certificate
    shell_sigma0: float = Field(default=0.995, gt=0, lt=1)
    shell_population: float = Field(default=1.0e6, gt=0)
    shell_mu_e_fraction: float = Field(default=0.5, gt=0, lt=1)

    output_dir: str = Field(default="results")

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="forbid",
    )

    @model_validator(mode="after")
    def _check_steps(self) -> "RunConfig":
        for name in ("horizon_months", "validation_horizon_months"):
            steps = getattr(self, name) / self.step_months
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"{name} must be a multiple of step_months")
        if self.p_acute_given_unaware + self.p_aids_given_unaware >= 1:
            raise ValueError("p_acute_given_unaware + p_aids_given_unaware must be below 1")
        for gamma in self.threshold_gammas:
            if not 0 < gamma <= 1:
                raise ValueError("threshold_gammas must lie in (0, 1]")
        return self

    def progression(self):
        from ..model import DAYS_PER_MONTH, MONTHS_PER_YEAR, StageProgression

        return StageProgression(
            sigma_a_to_u=DAYS_PER_MONTH / self.sigma_a_to_u_days,
            sigma_u_to_s=1.0 / (self.sigma_u_to_s_years * MONTHS_PER_YEAR),
        )

    def policy_constants(self):
        from ..model import DAYS_PER_MONTH, PolicyConstants

        return PolicyConstants(
            kappa_self_a=self.kappa_self_a,
            kappa_self_u=self.kappa_self_u,
            kappa_self_s=self.kappa_self_s,
            kappa_care_a=self.kappa_care_a,
            kappa_care_u=self.kappa_care_u,
            kappa_care_s=self.kappa_care_s,
            t_confirm_au=self.t_confirm_au_days / DAYS_PER_MONTH,
            t_confirm_s=self.t_confirm_s_days / DAYS_PER_MONTH,
        )

    def multipliers(self):
        from ..calibration import ContinuumMultipliers

        return ContinuumMultipliers(
            alpha_a=self.alpha_a,
            alpha_s=self.alpha_s,
            alpha_nocare=self.alpha_nocare,
            alpha_art=self.alpha_art,
            alpha_vls=self.alpha_vls,
            beta_u=self.beta_u,
            beta_s=self.beta_s,
            beta_nocare=self.beta_nocare,
            beta_art=self.beta_art,
            beta_vls=self.beta_vls,
            nu_a=self.nu_a,
            nu_s=self.nu_s,
        )

    def unaware_split(self):
        from ..calibration import UnawareSplit

        return UnawareSplit(
            p_acute_given_unaware=self.p_acute_given_unaware,
            p_aids_given_unaware=self.p_aids_given_unaware,
        )

    def care_sensitivities(self):
        from ..calibration import CareSensitivities

        return CareSensitivities(
            kappa_a=self.kappa_care_a,
            kappa_u=self.kappa_care_u,
            kappa_s=self.kappa_care_s,
        )

    def gamma_grid(self) -> np.ndarray:
        return _grid(self.gamma_max, self.grid_step)

    def chi_grid(self) -> np.ndarray:
        return _grid(self.chi_max, self.grid_step)


def _grid(upper: float, step: float) -> np.ndarray:
    count = int(np.floor(upper / step + 1e-9))
    values = np.round(np.arange(count + 1) * step, 12)
    if upper - values[-1] > 1e-9:
        values = np.append(values, upper)
    return values


def _env_key(loc: tuple) -> str:
    return ENV_PREFIX + "_".join(str(part) for part in loc).upper() if loc else "<config>"


def load_run_config(path: Optional[str] = None, **overrides: Any) -> RunConfig:
    """
    Load the study configuration

    Args:
        path: dotenv-grammar file; None reads the environment only
        **overrides: values that win over file and environment (CLI flags)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: naming every missing or invalid key
    """
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"Config file not found: {path}")

    try:
        config = RunConfig(_env_file=path, **overrides)
    except ValidationError as exc:
        missing = []
        problems: List[Dict[str, Any]] = []
        for error in exc.errors():
            key = _env_key(error["loc"])
            if error["type"] == "missing":
                missing.append(key)
            problems.append({"field": key, "message": error["msg"], "code": error["type"]})
        if missing:
            message = f"Missing required config keys: {', '.join(missing)}"
        else:
            message = "Invalid config: " + "; ".join(f"{p['field']}: {p['message']}" for p in problems)
        raise ConfigError(message, keys=missing or [p["field"] for p in problems], problems=problems) from exc

    # Domain invariants that span several keys
    try:
        config.progression()
        config.policy_constants()
        config.multipliers()
    except ParameterError as exc:
        raise ConfigError(f"Invalid config: {exc.message}", keys=[_env_key((exc.field,))] if exc.field else None) from exc

    return config


# Global settings instance
settings = Settings()
