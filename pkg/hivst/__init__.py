"""
hivst: linear HIV transmission model with jurisdiction calibration,
reproduction-number analytics and self-testing policy scenarios
"""

from .calibration import (
    CalibratedJurisdiction,
    CareSensitivities,
    ContinuumMultipliers,
    SurveillanceRecord,
    UnawareSplit,
    calibrate,
)
from .engine import Trajectory, integrate_linear, integrate_nonlinear
from .model import (
    ModelMatrices,
    PolicyConstants,
    SelfTestPolicy,
    StageMortality,
    StageParameters,
    StageProgression,
    StageTesting,
    StageTransmission,
    StateVector,
    build_matrices,
)
from .ngm import NgmReport, next_generation_report
from .scenario import ScenarioRunner, ScenarioSpec, SweepResult, ThresholdResult

__version__ = "0.1.0"

__all__ = [
    "CalibratedJurisdiction",
    "CareSensitivities",
    "ContinuumMultipliers",
    "SurveillanceRecord",
    "UnawareSplit",
    "calibrate",
    "Trajectory",
    "integrate_linear",
    "integrate_nonlinear",
    "ModelMatrices",
    "PolicyConstants",
    "SelfTestPolicy",
    "StageMortality",
    "StageParameters",
    "StageProgression",
    "StageTesting",
    "StageTransmission",
    "StateVector",
    "build_matrices",
    "NgmReport",
    "next_generation_report",
    "ScenarioRunner",
    "ScenarioSpec",
    "SweepResult",
    "ThresholdResult",
]
