import numpy as np
import pytest

from hivst.calibration import SurveillanceRecord, calibrate, calibrate_with_config
from hivst.cli import REFERENCE_CONFIG, REFERENCE_JURISDICTIONS
from hivst.core.config import load_run_config
from hivst.data import load_jurisdictions
from hivst.model import (
    PolicyConstants,
    StageMortality,
    StageProgression,
    StageTransmission,
    assemble_F,
    assemble_V,
    ModelMatrices,
)
from hivst.scenario import benefit_risk_table

KING_COUNTY = dict(
    jurisdiction="King County, WA",
    lambda_bar=0.0025,
    mu_bar=0.011,
    aware_fraction=0.875,
    phi_bar=0.017,
    p_nocare=0.21,
    p_art=0.0875,
    p_vls=0.5775,
    aware_low=0.871,
    aware_high=0.880,
)

JURISDICTION_HEADER = (
    "name,lambda_bar_per_month,mu_bar_per_year,aware_fraction,phi_bar_per_month,"
    "p_nocare,p_art,p_vls,aware_low,aware_high"
)
JURISDICTION_ROWS = [
    '"King County, WA",0.0025,0.011,0.8750,0.017,0.21,0.0875,0.5775,0.8710,0.8800',
    '"San Diego County, CA",0.00233333,0.009,0.8630,0.013,0.20712,0.0863,0.56958,0.8630,0.8640',
    '"New York County, NY",0.000916667,0.010,0.9440,0.016,0.22656,0.0944,0.62304,0.9420,0.9460',
]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def reference_config():
    return load_run_config(str(REFERENCE_CONFIG))


@pytest.fixture(scope="session")
def reference_csv():
    return REFERENCE_JURISDICTIONS


@pytest.fixture(scope="session")
def constants(reference_config) -> PolicyConstants:
    return reference_config.policy_constants()


@pytest.fixture
def king_county() -> SurveillanceRecord:
    return SurveillanceRecord(**KING_COUNTY)


@pytest.fixture(scope="session")
def calibrated(reference_config):
    """King County calibrated with a stationary acute and AIDS split"""
    return calibrate(
        SurveillanceRecord(**KING_COUNTY),
        reference_config.multipliers(),
        reference_config.unaware_split(),
        reference_config.care_sensitivities(),
        reference_config.progression(),
        alpha_weighting=False,
        fit_split=True,
    )


@pytest.fixture(scope="session")
def reference_cohort(reference_csv):
    return load_jurisdictions(reference_csv)


@pytest.fixture(scope="session")
def calibrated_cohort(reference_cohort, reference_config):
    """The 38 reference jurisdictions calibrated with the reference config"""
    return [calibrate_with_config(record, reference_config) for record in reference_cohort]


@pytest.fixture(scope="session")
def cohort_table(calibrated_cohort, reference_cohort, reference_config):
    return benefit_risk_table(calibrated_cohort, reference_config, reference_cohort.records).set_index("jurisdiction")


@pytest.fixture
def jurisdiction_csv(tmp_path):
    path = tmp_path / "jurisdictions.csv"
    path.write_text("\n".join([JURISDICTION_HEADER, *JURISDICTION_ROWS]) + "\n")
    return path


def random_parameters(rng):
    """One random parameter set satisfying every stage invariant, plus detection rates"""
    prog = StageProgression(sigma_a_to_u=rng.uniform(0.2, 1.0), sigma_u_to_s=rng.uniform(0.002, 0.02))
    mu_a, mu_u, mu_d = rng.uniform(1e-4, 5e-3, size=3)
    mort = StageMortality(mu_a, mu_u, max(mu_a, mu_u, mu_d) * rng.uniform(1.0, 8.0), mu_d)
    lambda_a = rng.uniform(1e-3, 5e-2)
    trans = StageTransmission(lambda_a, *rng.uniform(0.0, lambda_a, size=3))
    det = rng.uniform(1e-3, 0.1, size=3)
    return trans, prog, mort, det


def random_matrices(rng):
    trans, prog, mort, det = random_parameters(rng)
    return ModelMatrices(F=assemble_F(trans), V=assemble_V(prog, mort, *det))
