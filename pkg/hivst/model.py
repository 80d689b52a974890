"""
Stage parameters and the linear infection system

State order is (a, u, s, d): acute, chronic unaware, AIDS unaware and
diagnosed. All rates are per month.
"""
import logging
import math
from dataclasses import dataclass, fields
from typing import Dict, Sequence, Union

import numpy as np

from .core.errors import ParameterError

logger = logging.getLogger(__name__)

DAYS_PER_MONTH = 30.4375
MONTHS_PER_YEAR = 12.0

UNAWARE_STAGES = ("a", "u", "s")
COMPARTMENTS = ("a", "u", "s", "d")

# Tolerance for structural equalities on stored floats
_REL_TOL = 1e-9


def _require(condition: bool, message: str, field: str = None) -> None:
    if not condition:
        raise ParameterError(message, field=field)


def _require_finite(obj) -> None:
    for item in fields(obj):
        value = getattr(obj, item.name)
        if isinstance(value, float) and not math.isfinite(value):
            raise ParameterError(f"{item.name} must be finite, got {value}", field=item.name)


@dataclass(frozen=True)
class StageProgression:
    """Progression rates between untreated stages"""
    sigma_a_to_u: float
    sigma_u_to_s: float

    def __post_init__(self):
        _require_finite(self)
        _require(self.sigma_a_to_u > 0, "sigma_a_to_u must be positive", "sigma_a_to_u")
        _require(self.sigma_u_to_s > 0, "sigma_u_to_s must be positive", "sigma_u_to_s")
        _require(
            self.sigma_a_to_u > self.sigma_u_to_s,
            "acute stage must progress faster than the chronic stage",
            "sigma_a_to_u",
        )


@dataclass(frozen=True)
class StageMortality:
    mu_a: float
    mu_u: float
    mu_s: float
    mu_d: float

    def __post_init__(self):
        _require_finite(self)
        for name in ("mu_a", "mu_u", "mu_s", "mu_d"):
            _require(getattr(self, name) > 0, f"{name} must be positive", name)
        _require(
            self.mu_s * (1 + _REL_TOL) >= max(self.mu_a, self.mu_u, self.mu_d),
            "AIDS mortality must be the largest stage mortality",
            "mu_s",
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.mu_a, self.mu_u, self.mu_s, self.mu_d])


@dataclass(frozen=True)
class StageTransmission:
    """Transmission rates per infected person, already scaled by the susceptible fraction"""
    lambda_a: float
    lambda_u: float
    lambda_s: float
    lambda_d: float

    def __post_init__(self):
        _require_finite(self)
        for name in ("lambda_a", "lambda_u", "lambda_s", "lambda_d"):
            _require(getattr(self, name) >= 0, f"{name} must be nonnegative", name)
        _require(
            self.lambda_a * (1 + _REL_TOL) >= max(self.lambda_u, self.lambda_s, self.lambda_d),
            "acute transmission must dominate the other stages",
            "lambda_a",
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda_a, self.lambda_u, self.lambda_s, self.lambda_d])

    def scaled(self, factor: float) -> "StageTransmission":
        return StageTransmission(*(factor * self.as_array()).tolist())


@dataclass(frozen=True)
class StageTesting:
    """Baseline testing rates of the undiagnosed stages"""
    phi_a: float
    phi_u: float
    phi_s: float
    nu_a: float
    nu_s: float

    def __post_init__(self):
        _require_finite(self)
        for name in ("phi_a", "phi_u", "phi_s", "nu_a", "nu_s"):
            _require(getattr(self, name) > 0, f"{name} must be positive", name)
        _require(
            math.isclose(self.phi_a, self.nu_a * self.phi_u, rel_tol=_REL_TOL),
            "phi_a must equal nu_a * phi_u",
            "phi_a",
        )
        _require(
            math.isclose(self.phi_s, self.nu_s * self.phi_u, rel_tol=_REL_TOL),
            "phi_s must equal nu_s * phi_u",
            "phi_s",
        )

    @classmethod
    def from_chronic(cls, phi_u: float, nu_a: float, nu_s: float) -> "StageTesting":
        return cls(phi_a=nu_a * phi_u, phi_u=phi_u, phi_s=nu_s * phi_u, nu_a=nu_a, nu_s=nu_s)

    def rate(self, stage: str) -> float:
        _check_stage(stage)
        return getattr(self, f"phi_{stage}")


@dataclass(frozen=True)
class SelfTestPolicy:
    """
    A self-testing policy applied uniformly to all undiagnosed stages.

    gamma is the share of tests that are self-tests, chi the relative
    increase in overall testing. Delays are in months.
    """
    gamma: float
    chi: float
    kappa_self_a: float
    kappa_self_u: float
    kappa_self_s: float
    kappa_care_a: float
    kappa_care_u: float
    kappa_care_s: float
    t_confirm_au: float
    t_confirm_s: float

    def __post_init__(self):
        _require_finite(self)
        _require(0 <= self.gamma <= 1, "gamma must lie in [0, 1]", "gamma")
        _require(self.chi >= 0, "chi must be nonnegative", "chi")
        for stage in UNAWARE_STAGES:
            for kind in ("self", "care"):
                name = f"kappa_{kind}_{stage}"
                _require(0 <= getattr(self, name) <= 1, f"{name} must lie in [0, 1]", name)
        _require(
            self.kappa_self_a <= self.kappa_care_a,
            "self-test sensitivity to acute infection cannot exceed the clinic test",
            "kappa_self_a",
        )
        _require(self.t_confirm_au >= 0, "t_confirm_au must be nonnegative", "t_confirm_au")
        _require(self.t_confirm_s >= 0, "t_confirm_s must be nonnegative", "t_confirm_s")

    def kappa_self(self, stage: str) -> float:
        _check_stage(stage)
        return getattr(self, f"kappa_self_{stage}")

    def kappa_care(self, stage: str) -> float:
        _check_stage(stage)
        return getattr(self, f"kappa_care_{stage}")

    def t_confirm(self, stage: str) -> float:
        _check_stage(stage)
        return self.t_confirm_s if stage == "s" else self.t_confirm_au


@dataclass(frozen=True)
class PolicyConstants:
    """Test sensitivities and confirmation delays shared by every policy"""
    kappa_self_a: float
    kappa_self_u: float
    kappa_self_s: float
    kappa_care_a: float
    kappa_care_u: float
    kappa_care_s: float
    t_confirm_au: float
    t_confirm_s: float

    def __post_init__(self):
        # Validates the shared part once
        self.policy(0.0, 0.0)

    def policy(self, gamma: float, chi: float) -> SelfTestPolicy:
        return SelfTestPolicy(
            gamma=float(gamma),
            chi=float(chi),
            kappa_self_a=self.kappa_self_a,
            kappa_self_u=self.kappa_self_u,
            kappa_self_s=self.kappa_self_s,
            kappa_care_a=self.kappa_care_a,
            kappa_care_u=self.kappa_care_u,
            kappa_care_s=self.kappa_care_s,
            t_confirm_au=self.t_confirm_au,
            t_confirm_s=self.t_confirm_s,
        )

    @property
    def baseline(self) -> SelfTestPolicy:
        return self.policy(0.0, 0.0)


@dataclass(frozen=True)
class StateVector:
    a: float
    u: float
    s: float
    d: float

    def __post_init__(self):
        _require_finite(self)
        for name in COMPARTMENTS:
            _require(getattr(self, name) >= 0, f"compartment {name} must be nonnegative", name)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "StateVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (4,):
            raise ParameterError(f"state needs 4 compartments, got shape {values.shape}")
        return cls(*values.tolist())

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.u, self.s, self.d])

    @property
    def total(self) -> float:
        return self.a + self.u + self.s + self.d

    def scaled(self, factor: float) -> "StateVector":
        return StateVector.from_array(factor * self.as_array())


@dataclass(frozen=True)
class StageParameters:
    """Everything the linear system needs besides the policy"""
    progression: StageProgression
    mortality: StageMortality
    transmission: StageTransmission
    testing: StageTesting


@dataclass(frozen=True)
class ModelMatrices:
    F: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        V = np.asarray(self.V, dtype=float)
        _require(F.shape == (4, 4) and V.shape == (4, 4), "F and V must be 4x4", "F")
        _require(bool(np.all(np.isfinite(F)) and np.all(np.isfinite(V))), "F and V must be finite", "V")
        _require(not np.any(F[1:]), "F may only have entries in its first row", "F")
        _require(not np.any(np.triu(V, 1)), "V must be lower-triangular", "V")
        _require(bool(np.all(np.diag(V) > 0)), "V must have a positive diagonal", "V")
        _require(not np.any(np.tril(V, -1) > 0), "off-diagonal entries of V must be nonpositive", "V")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "V", V)

    @property
    def jacobian(self) -> np.ndarray:
        """F - V, the generator of the linear system"""
        return self.F - self.V


StateLike = Union[StateVector, Sequence[float], np.ndarray]


def _check_stage(stage: str) -> None:
    if stage not in UNAWARE_STAGES:
        raise ParameterError(f"unknown stage {stage!r}, expected one of {UNAWARE_STAGES}", field="stage")


def as_state_array(state: StateLike) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.as_array()
    values = np.asarray(state, dtype=float)
    if values.shape != (4,):
        raise ParameterError(f"state needs 4 compartments, got shape {values.shape}")
    return values


def effective_detection_rate(stage: str, testing: StageTesting, policy: SelfTestPolicy) -> float:
    """
    Diagnosis rate of stage ``stage`` under a self-testing policy.

    Self-tests reach diagnosis after the confirmation delay, so their
    contribution is the reciprocal of the mean waiting time
    1/((1+chi) phi) + t_confirm. Clinic tests scale the baseline rate.
    """
    _check_stage(stage)
    phi = testing.rate(stage)
    gamma, chi = policy.gamma, policy.chi

    self_term = 0.0
    if gamma > 0:
        boosted = (1 + chi) * phi
        if boosted <= 0:
            raise ParameterError(f"testing rate for stage {stage} must be positive under self-testing", field=f"phi_{stage}")
        self_term = policy.kappa_self(stage) * gamma / (1.0 / boosted + policy.t_confirm(stage))

    care_term = policy.kappa_care(stage) * (1 - gamma) * (1 + chi) * phi
    rate = self_term + care_term
    if not math.isfinite(rate) or rate < 0:
        raise ParameterError(f"detection rate for stage {stage} is not a finite nonnegative rate: {rate}", field=f"phi_{stage}")
    return rate


def detection_rates(testing: StageTesting, policy: SelfTestPolicy) -> np.ndarray:
    """Effective detection rates in stage order (a, u, s)"""
    return np.array([effective_detection_rate(stage, testing, policy) for stage in UNAWARE_STAGES])


def assemble_F(trans: StageTransmission) -> np.ndarray:
    F = np.zeros((4, 4))
    F[0] = trans.as_array()
    return F


def assemble_V(prog: StageProgression, mort: StageMortality, det_a: float, det_u: float, det_s: float) -> np.ndarray:
    V = np.zeros((4, 4))
    V[0, 0] = prog.sigma_a_to_u + det_a + mort.mu_a
    V[1, 0] = -prog.sigma_a_to_u
    V[1, 1] = prog.sigma_u_to_s + det_u + mort.mu_u
    V[2, 1] = -prog.sigma_u_to_s
    V[2, 2] = det_s + mort.mu_s
    V[3, 0] = -det_a
    V[3, 1] = -det_u
    V[3, 2] = -det_s
    V[3, 3] = mort.mu_d
    return V


def build_matrices(params: StageParameters, policy: SelfTestPolicy) -> ModelMatrices:
    """Assemble F and V for a parameter set under ``policy``"""
    det = detection_rates(params.testing, policy)
    return ModelMatrices(
        F=assemble_F(params.transmission),
        V=assemble_V(params.progression, params.mortality, *det),
    )


def derivative(state: StateLike, M: ModelMatrices) -> np.ndarray:
    """Right-hand side (F - V) x; components may be negative"""
    return M.jacobian @ as_state_array(state)


def incidence_rate(state: StateLike, trans: StageTransmission) -> float:
    """New infections per month, the inflow to the acute compartment"""
    return float(trans.as_array() @ as_state_array(state))


def stage_flows(state: StateLike, params: StageParameters, det: Sequence[float]) -> Dict[str, float]:
    """
    Instantaneous population flows at ``state``.

    Returns incidence, deaths (all infected compartments), diagnoses
    (unaware to diagnosed) and the unaware population they are drawn from.
    """
    x = as_state_array(state)
    det = np.asarray(det, dtype=float)
    return {
        "incidence": float(params.transmission.as_array() @ x),
        "deaths": float(params.mortality.as_array() @ x),
        "diagnoses": float(det @ x[:3]),
        "unaware": float(x[:3].sum()),
        "prevalence": float(x.sum()),
    }
