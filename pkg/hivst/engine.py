"""
Fixed-step integration of the linear and nonlinear transmission systems

The linear system x' = (F - V) x is integrated with classical RK4. For a
linear autonomous system one RK4 step is multiplication by the degree-4
Taylor polynomial of h(F - V), so the scheme is applied as a propagator
matrix. Cumulative incidence rides along as a fifth, pure-accumulator
component (c' = lambda . x) and is integrated by the same scheme.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .core.errors import NumericalError, ParameterError
from .model import (
    COMPARTMENTS,
    ModelMatrices,
    StageMortality,
    StageProgression,
    StageTransmission,
    StateLike,
    StateVector,
    as_state_array,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP_MONTHS = 0.25
DEFAULT_HORIZON_MONTHS = 120.0

# Allowed undershoot below zero before a state is declared invalid
NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """
    Sampled solution on a uniform time grid.

    ``states`` has one row per sample in compartment order (a, u, s, d).
    The nonlinear integrator also fills the susceptible series.
    """
    times: np.ndarray
    states: np.ndarray
    cumulative_incidence: np.ndarray
    susceptible: Optional[np.ndarray] = None

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def final_state(self) -> StateVector:
        return self.state(-1)

    def state(self, index: int) -> StateVector:
        return StateVector.from_array(np.clip(self.states[index], 0.0, None))

    @property
    def population(self) -> Optional[np.ndarray]:
        if self.susceptible is None:
            return None
        return self.susceptible + self.states.sum(axis=1)

    @property
    def susceptible_fraction(self) -> Optional[np.ndarray]:
        if self.susceptible is None:
            return None
        return self.susceptible / self.population

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(COMPARTMENTS))
        frame.insert(0, "time", self.times)
        frame["cumulative_incidence"] = self.cumulative_incidence
        if self.susceptible is not None:
            frame["e"] = self.susceptible
            frame["sigma"] = self.susceptible_fraction
        return frame


@dataclass(frozen=True)
class NonlinearParams:
    """Parameters of the five-compartment system with an eligible pool e"""
    recruitment: float
    mu_e: float
    lambda_tilde: StageTransmission
    progression: StageProgression
    mortality: StageMortality
    initial_e: float
    initial_infected: StateVector

    def __post_init__(self):
        if not self.recruitment >= 0:
            raise ParameterError("recruitment must be nonnegative", field="recruitment")
        if not self.mu_e > 0:
            raise ParameterError("mu_e must be positive", field="mu_e")
        if self.mu_e >= self.mortality.as_array().min():
            raise ParameterError("mu_e must be below every infected-stage mortality", field="mu_e")
        if not self.initial_e >= 0:
            raise ParameterError("initial_e must be nonnegative", field="initial_e")
        if self.initial_e + self.initial_infected.total <= 0:
            raise ParameterError("initial population must be positive", field="initial_e")

    @property
    def initial_population(self) -> float:
        return self.initial_e + self.initial_infected.total


@dataclass(frozen=True)
class ErrorCertificate:
    """Drift of the susceptible fraction against its two a priori bounds"""
    sigma0: float
    times: np.ndarray
    observed_drift: np.ndarray
    bound_pointwise: np.ndarray
    bound_uniform: np.ndarray
    n_min: float

    @property
    def passes_pointwise(self) -> np.ndarray:
        return self.observed_drift <= self.bound_pointwise + NEGATIVE_TOLERANCE

    @property
    def passes_uniform(self) -> np.ndarray:
        return self.observed_drift <= self.bound_uniform + NEGATIVE_TOLERANCE

    @property
    def passes(self) -> bool:
        return bool(np.all(self.passes_pointwise) and np.all(self.passes_uniform))

    @property
    def max_drift(self) -> float:
        return float(self.observed_drift.max())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.times,
            "observed_drift": self.observed_drift,
            "bound_pointwise": self.bound_pointwise,
            "bound_uniform": self.bound_uniform,
            "passes": self.passes_pointwise & self.passes_uniform,
        })


def step_count(horizon: float, step: float) -> int:
    """Number of steps on the grid; horizon must be a positive multiple of step"""
    if not (step > 0 and math.isfinite(step)):
        raise ParameterError(f"step must be positive, got {step}", field="step")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ParameterError(f"horizon must be positive, got {horizon}", field="horizon")
    steps = horizon / step
    count = int(round(steps))
    if abs(steps - count) > 1e-9 * max(1.0, steps):
        raise ParameterError(f"horizon {horizon} is not a multiple of step {step}", field="horizon")
    return count


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step for an autonomous system"""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def augmented_generator(M: ModelMatrices) -> np.ndarray:
    """5x5 generator of (a, u, s, d, cumulative incidence)"""
    A = np.zeros((5, 5))
    A[:4, :4] = M.jacobian
    A[4, :4] = M.F[0]
    return A


def rk4_propagator(A: np.ndarray, h: float) -> np.ndarray:
    """Matrix applied by one RK4 step to the linear system y' = A y"""
    hA = h * np.asarray(A, dtype=float)
    term = np.eye(hA.shape[0])
    P = term.copy()
    for order in range(1, 5):
        term = term @ hA / order
        P = P + term
    return P


def _initial_augmented(x0: StateLike) -> np.ndarray:
    y0 = np.zeros(5)
    y0[:4] = as_state_array(x0)
    if np.any(y0[:4] < 0) or not np.all(np.isfinite(y0)):
        raise ParameterError("initial state must be finite and nonnegative", field="x0")
    return y0


def _check_finite(y: np.ndarray, time: float) -> None:
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"state became non-finite at t={time:g} months", stage="integrate")


def integrate_linear(
    M: ModelMatrices,
    x0: StateLike,
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> Trajectory:
    n_steps = step_count(horizon, step)
    P = rk4_propagator(augmented_generator(M), step)

    out = np.empty((n_steps + 1, 5))
    out[0] = _initial_augmented(x0)
    for i in range(n_steps):
        out[i + 1] = P @ out[i]
    _check_finite(out[-1], horizon)

    low = out[:, :4].min()
    if low < -NEGATIVE_TOLERANCE * max(1.0, out[0, :4].sum()):
        raise NumericalError(f"state went negative ({low:.3g}); step {step} too large for these rates", stage="integrate")

    return Trajectory(
        times=np.arange(n_steps + 1) * step,
        states=out[:, :4],
        cumulative_incidence=out[:, 4],
    )


def final_state(
    M: ModelMatrices,
    x0: StateLike,
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> Tuple[np.ndarray, float]:
    """
    State and cumulative incidence at the horizon only.

    Same scheme as integrate_linear, evaluated as a matrix power.
    """
    n_steps = step_count(horizon, step)
    P = rk4_propagator(augmented_generator(M), step)
    y = np.linalg.matrix_power(P, n_steps) @ _initial_augmented(x0)
    _check_finite(y, horizon)
    return y[:4], float(y[4])


def _nonlinear_rhs(p: NonlinearParams, det: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    lam = p.lambda_tilde.as_array()
    mu = p.mortality.as_array()
    sigma_au = p.progression.sigma_a_to_u
    sigma_us = p.progression.sigma_u_to_s
    det_a, det_u, det_s = det

    def rhs(y: np.ndarray) -> np.ndarray:
        e, a, u, s, d = y[:5]
        n = e + a + u + s + d
        if not n > 0:
            raise NumericalError("total population vanished", stage="integrate_nonlinear")
        force = lam @ y[1:5] * e / n
        return np.array([
            p.recruitment - p.mu_e * e - force,
            force - (sigma_au + det_a + mu[0]) * a,
            sigma_au * a - (sigma_us + det_u + mu[1]) * u,
            sigma_us * u - (det_s + mu[2]) * s,
            det_a * a + det_u * u + det_s * s - mu[3] * d,
            force,
        ])

    return rhs


def integrate_nonlinear(
    p: NonlinearParams,
    det: Sequence[float],
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> Trajectory:
    """Integrate the system with an eligible pool; incidence is the force term"""
    n_steps = step_count(horizon, step)
    rhs = _nonlinear_rhs(p, np.asarray(det, dtype=float))

    out = np.empty((n_steps + 1, 6))
    out[0] = np.concatenate([[p.initial_e], p.initial_infected.as_array(), [0.0]])
    for i in range(n_steps):
        out[i + 1] = rk4_step(rhs, out[i], step)
        _check_finite(out[i + 1], (i + 1) * step)

    return Trajectory(
        times=np.arange(n_steps + 1) * step,
        states=out[:, 1:5],
        cumulative_incidence=out[:, 5],
        susceptible=out[:, 0],
    )


def linearization_certificate(p: NonlinearParams, traj: Trajectory) -> ErrorCertificate:
    """
    Check the drift of the susceptible fraction against its bounds.

    The pointwise bound uses, for each sample, the largest value of the
    bracket (Recruitment/n + lambda_a + mu_s - mu_e)(1 - Sigma) seen so
    far along the path, since the intermediate time in the mean-value
    argument is unknown. The uniform bound replaces n by its minimum and
    (1 - Sigma) by one.
    """
    if traj.susceptible is None:
        raise ParameterError("certificate needs a nonlinear trajectory", field="traj")

    n = traj.population
    sigma = traj.susceptible_fraction
    elapsed = traj.times - traj.times[0]
    excess = p.lambda_tilde.lambda_a + p.mortality.mu_s - p.mu_e

    bracket = (p.recruitment / n + excess) * (1.0 - sigma)
    bound_pointwise = np.maximum.accumulate(bracket) * elapsed

    n_min = float(n.min())
    bound_uniform = (p.recruitment / n_min + excess) * elapsed

    certificate = ErrorCertificate(
        sigma0=float(sigma[0]),
        times=traj.times,
        observed_drift=np.abs(sigma - sigma[0]),
        bound_pointwise=bound_pointwise,
        bound_uniform=bound_uniform,
        n_min=n_min,
    )
    if not certificate.passes:
        logger.warning(f"Linearization certificate failed; max drift {certificate.max_drift:.3g}")
    return certificate


def embed_in_nonlinear_shell(
    transmission: StageTransmission,
    progression: StageProgression,
    mortality: StageMortality,
    initial_state: StateLike,
    sigma0: float,
    population: float,
    mu_e_fraction: float,
) -> NonlinearParams:
    """
    Nonlinear system whose linearization at sigma0 is the given linear one.

    Transmission is unscaled by sigma0, the infected share of the population
    keeps the shape of ``initial_state`` and recruitment balances eligible
    deaths at t=0.
    """
    if not 0 < sigma0 < 1:
        raise ParameterError("sigma0 must lie in (0, 1)", field="sigma0")
    if not population > 0:
        raise ParameterError("population must be positive", field="population")

    x0 = as_state_array(initial_state)
    if x0.sum() <= 0:
        raise ParameterError("initial state has no infected population", field="initial_state")

    mu_e = mu_e_fraction * mortality.as_array().min()
    initial_e = sigma0 * population
    return NonlinearParams(
        recruitment=mu_e * initial_e,
        mu_e=mu_e,
        lambda_tilde=transmission.scaled(1.0 / sigma0),
        progression=progression,
        mortality=mortality,
        initial_e=initial_e,
        initial_infected=StateVector.from_array((1.0 - sigma0) * population * x0 / x0.sum()),
    )


def linear_vs_nonlinear(
    M: ModelMatrices,
    p: NonlinearParams,
    det: Sequence[float],
    horizon: float = DEFAULT_HORIZON_MONTHS,
    step: float = DEFAULT_STEP_MONTHS,
) -> float:
    """Relative difference in cumulative incidence, linear against nonlinear"""
    _, linear = final_state(M, p.initial_infected, horizon, step)
    nonlinear = integrate_nonlinear(p, det, horizon, step).cumulative_incidence[-1]
    if nonlinear <= 0:
        return 0.0 if linear <= 0 else math.inf
    return abs(linear - nonlinear) / nonlinear
