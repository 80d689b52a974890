"""
Next-generation matrix analytics for the linear system

K = F V^-1 has a single nonzero row, so its spectral radius is K[0, 0]
and the diagnosed-stage contribution is K[0, 3] = lambda_d / mu_d.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .core.errors import NumericalError, ParameterError
from .model import (
    ModelMatrices,
    SelfTestPolicy,
    StageMortality,
    StageParameters,
    StageProgression,
    StageTransmission,
    build_matrices,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NgmReport:
    K: np.ndarray
    r_t: float
    r_awr: float
    diagnosed_term: float


def invert_V_closed_form(V: np.ndarray) -> np.ndarray:
    """
    Inverse of the transition matrix from its entries.

    V must carry the structure of the model: lower-triangular with the
    progression chain a -> u -> s below the diagonal and the detection
    flows in the last row.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (4, 4):
        raise ParameterError(f"V must be 4x4, got shape {V.shape}", field="V")
    if np.any(np.triu(V, 1)):
        raise ParameterError("V must be lower-triangular", field="V")
    if V[2, 0] != 0:
        raise ParameterError("V has no direct acute to AIDS transfer", field="V")

    v11, v22, v33, v44 = np.diag(V)
    if min(v11, v22, v33, v44) <= 0:
        raise NumericalError("V is singular or has a nonpositive diagonal", stage="ngm")

    sigma_au = -V[1, 0]
    sigma_us = -V[2, 1]
    det_a, det_u, det_s = -V[3, 0], -V[3, 1], -V[3, 2]

    inv = np.zeros((4, 4))
    inv[0, 0] = 1.0 / v11
    inv[1, 1] = 1.0 / v22
    inv[2, 2] = 1.0 / v33
    inv[3, 3] = 1.0 / v44
    inv[1, 0] = sigma_au / (v11 * v22)
    inv[2, 1] = sigma_us / (v22 * v33)
    inv[2, 0] = sigma_au * sigma_us / (v11 * v22 * v33)
    inv[3, 0] = (det_a * v22 * v33 + sigma_au * det_u * v33 + sigma_au * sigma_us * det_s) / (v11 * v22 * v33 * v44)
    inv[3, 1] = (det_u * v33 + sigma_us * det_s) / (v22 * v33 * v44)
    inv[3, 2] = det_s / (v33 * v44)
    return inv


def r_t_closed_form(
    trans: StageTransmission,
    prog: StageProgression,
    mort: StageMortality,
    det_a: float,
    det_u: float,
    det_s: float,
) -> float:
    """Effective reproduction number as the sum of its four stage terms"""
    v11 = prog.sigma_a_to_u + det_a + mort.mu_a
    v22 = prog.sigma_u_to_s + det_u + mort.mu_u
    v33 = det_s + mort.mu_s

    acute = trans.lambda_a / v11
    chronic = trans.lambda_u * prog.sigma_a_to_u / (v11 * v22)
    aids = trans.lambda_s * prog.sigma_a_to_u * prog.sigma_u_to_s / (v11 * v22 * v33)
    reach_diagnosis = det_a * v22 * v33 + prog.sigma_a_to_u * det_u * v33 + prog.sigma_a_to_u * prog.sigma_u_to_s * det_s
    diagnosed = trans.lambda_d * reach_diagnosis / (mort.mu_d * v11 * v22 * v33)
    return acute + chronic + aids + diagnosed


def spectral_radius(K: np.ndarray) -> float:
    eigenvalues = np.linalg.eigvals(np.asarray(K, dtype=float))
    return float(np.max(np.abs(eigenvalues)))


def r_t_spectral(M: ModelMatrices) -> float:
    """Spectral radius of F V^-1 with a dense inverse"""
    try:
        V_inv = np.linalg.inv(M.V)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"V is singular: {exc}", stage="ngm") from exc
    return spectral_radius(M.F @ V_inv)


def awareness_reproduction_number(r_t: float, lambda_d: float, mu_d: float) -> float:
    """Transmissions attributable to the time before diagnosis"""
    if mu_d <= 0:
        raise ParameterError("mu_d must be positive", field="mu_d")
    return r_t - lambda_d / mu_d


def next_generation_report(M: ModelMatrices, trans: StageTransmission, mort: StageMortality) -> NgmReport:
    K = M.F @ invert_V_closed_form(M.V)
    if not np.all(np.isfinite(K)):
        raise NumericalError("next-generation matrix is not finite", stage="ngm")

    r_t = spectral_radius(K)
    r_awr = awareness_reproduction_number(r_t, trans.lambda_d, mort.mu_d)
    if r_awr < 0:
        logger.warning(f"Awareness reproduction number is negative ({r_awr:.4g}); diagnosed transmission dominates")
    return NgmReport(K=K, r_t=r_t, r_awr=r_awr, diagnosed_term=float(K[0, 3]))


def report_for_parameters(params: StageParameters, policy: SelfTestPolicy) -> NgmReport:
    return next_generation_report(build_matrices(params, policy), params.transmission, params.mortality)
