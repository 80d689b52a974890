#!/usr/bin/env python3
"""
hivst command line

    hivst calibrate  --jurisdictions data.csv --config study.env --out results/
    hivst ngm        ...
    hivst simulate   --jurisdiction "King County, WA" --gamma 0.5 --chi 0.1
    hivst sweep      --grid-step 0.05
    hivst threshold  --gamma 0.25
    hivst validate
    hivst report

Without --config and --jurisdictions the packaged reference files are used.
Exit status: 0 success, 2 config error, 3 data error, 4 numerical failure,
1 anything else.
"""
import argparse
import logging
import re
import sys
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .calibration import CalibratedJurisdiction, calibrate_with_config, validate_against_surveillance
from .core.config import RunConfig, load_run_config, settings
from .core.errors import EXIT_OK, EXIT_UNEXPECTED, DataError, HivstError
from .core.logging import setup_logging
from .data import (
    JurisdictionFile,
    calibrated_frame,
    calibrated_to_dict,
    load_calibrated,
    load_jurisdictions,
    write_csv,
    write_json,
)
from .engine import (
    embed_in_nonlinear_shell,
    integrate_linear,
    integrate_nonlinear,
    linear_vs_nonlinear,
    linearization_certificate,
)
from .model import build_matrices, detection_rates
from .models.error import ErrorResponse, ErrorType
from .ngm import r_t_closed_form, report_for_parameters
from .parallel import parallel_map
from .scenario import (
    ScenarioRunner,
    association_summary,
    benefit_risk_table,
    scatter_series,
)
from .tables import cohort_table, frame_table

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
REFERENCE_CONFIG = DATA_DIR / "reference.env"
REFERENCE_JURISDICTIONS = DATA_DIR / "reference_jurisdictions.csv"

COMMANDS = ("calibrate", "ngm", "simulate", "sweep", "threshold", "validate", "report")


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jurisdictions", type=str, default=None, help="Jurisdiction CSV (default: packaged reference cohort)")
    common.add_argument("--config", type=str, default=None, help="Study config in KEY=VALUE form (default: packaged reference config)")
    common.add_argument("--out", type=str, default=None, help="Output directory (default: HIVST_OUTPUT_DIR)")
    common.add_argument("--jurisdiction", action="append", default=None, help="Restrict to this jurisdiction; repeatable")
    common.add_argument("--horizon-months", type=float, default=None, help="Simulation horizon in months")
    common.add_argument("--step-months", type=float, default=None, help="Integration step in months")
    common.add_argument("--workers", type=int, default=None, help="Processes for cohort work")
    common.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--json-errors", action="store_true", help="Write errors to stderr as JSON")

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument("--gamma", type=float, default=0.0, help="Share of tests that are self-tests")
    policy.add_argument("--chi", type=float, default=0.0, help="Relative increase in overall testing")

    calibrated = argparse.ArgumentParser(add_help=False)
    calibrated.add_argument("--calibrated", type=str, default=None, help="Use parameters from a calibrate JSON instead of calibrating")

    parser = argparse.ArgumentParser(prog="hivst", description="Linear HIV transmission model with self-testing scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="Calibrate stage parameters per jurisdiction")
    sub.add_parser("ngm", parents=[common, policy, calibrated], help="Reproduction numbers R_t and R_Awr")
    sub.add_parser("simulate", parents=[common, policy, calibrated], help="Trajectory of one jurisdiction")
    sweep_parser = sub.add_parser("sweep", parents=[common], help="Incidence change over the (gamma, chi) grid")
    sweep_parser.add_argument("--grid-step", type=float, default=None, help="Grid spacing on both axes")
    threshold_parser = sub.add_parser("threshold", parents=[common], help="Threshold testing levels by bisection")
    threshold_parser.add_argument("--gamma", type=float, action="append", default=None, help="Self-test share; repeatable")
    sub.add_parser("validate", parents=[common], help="Surveillance agreement and linearization certificate")
    report_parser = sub.add_parser("report", parents=[common], help="Cohort table with scatter series")
    report_parser.add_argument("--grid-step", type=float, default=None, help="Grid spacing on both axes")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {}
    if args.horizon_months is not None:
        overrides["horizon_months"] = args.horizon_months
    if args.step_months is not None:
        overrides["step_months"] = args.step_months
    if getattr(args, "grid_step", None) is not None:
        overrides["grid_step"] = args.grid_step
    if args.command == "threshold" and args.gamma:
        overrides["threshold_gammas"] = args.gamma
    if args.out is not None:
        overrides["output_dir"] = args.out
    path = args.config or str(REFERENCE_CONFIG)
    config = load_run_config(path, **overrides)
    logger.info(f"Loaded config {path}")
    return config


def load_records(args: argparse.Namespace) -> JurisdictionFile:
    records = load_jurisdictions(args.jurisdictions or REFERENCE_JURISDICTIONS)
    return records.select(args.jurisdiction)


def calibrate_cohort(records: JurisdictionFile, config: RunConfig, n_jobs: int) -> List[CalibratedJurisdiction]:
    cohort = parallel_map(list(records), partial(calibrate_with_config, config=config), n_jobs, desc="calibrate")
    logger.info(f"Calibrated {len(cohort)} jurisdictions")
    return cohort


def resolve_cohort(args: argparse.Namespace, config: RunConfig, n_jobs: int) -> List[CalibratedJurisdiction]:
    if getattr(args, "calibrated", None):
        cohort = load_calibrated(args.calibrated)
        if args.jurisdiction:
            known = {cal.name: cal for cal in cohort}
            missing = [name for name in args.jurisdiction if name not in known]
            if missing:
                raise DataError(f"Unknown jurisdiction(s): {', '.join(missing)}", path=args.calibrated, field="name")
            cohort = [known[name] for name in args.jurisdiction]
        return cohort
    return calibrate_cohort(load_records(args), config, n_jobs)


def cmd_calibrate(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    cohort = calibrate_cohort(load_records(args), config, n_jobs)
    write_csv(calibrated_frame(cohort), out / "calibrated.csv")
    write_json({"jurisdictions": [calibrated_to_dict(cal) for cal in cohort]}, out / "calibrated.json")
    frame = calibrated_frame(cohort)[["jurisdiction", "lambda_u", "mu_a", "phi_u", "p_acute_given_unaware", "p_aids_given_unaware"]]
    print(frame_table(frame))


def cmd_ngm(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    constants = config.policy_constants()
    policy = constants.policy(args.gamma, args.chi)
    rows = []
    for cal in resolve_cohort(args, config, n_jobs):
        report = report_for_parameters(cal.parameters, policy)
        det = detection_rates(cal.testing, policy)
        rows.append({
            "jurisdiction": cal.name,
            "r_t": report.r_t,
            "r_t_closed_form": r_t_closed_form(cal.transmission, cal.progression, cal.mortality, *det),
            "r_awr": report.r_awr,
            "lambda_d_over_mu_d": report.diagnosed_term,
        })
    frame = pd.DataFrame(rows)
    write_csv(frame, out / "ngm.csv")
    print(frame_table(frame))


def cmd_simulate(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    cohort = resolve_cohort(args, config, n_jobs)
    if len(cohort) != 1:
        raise DataError(f"simulate needs exactly one jurisdiction, got {len(cohort)}; use --jurisdiction", field="name")
    cal = cohort[0]
    M = build_matrices(cal.parameters, config.policy_constants().policy(args.gamma, args.chi))
    traj = integrate_linear(M, cal.initial_state, config.horizon_months, config.step_months)
    frame = traj.to_frame()
    frame["aware_fraction"] = frame["d"] / frame[["a", "u", "s", "d"]].sum(axis=1)
    write_csv(frame, out / f"trajectory_{slugify(cal.name)}.csv")
    print(f"{cal.name}: cumulative incidence over {config.horizon_months:g} months = {traj.cumulative_incidence[-1]:.6g}")


def _sweep_one(cal: CalibratedJurisdiction, config: RunConfig):
    runner = ScenarioRunner(cal, config.policy_constants(), config.horizon_months, config.step_months)
    return runner.sweep(config.gamma_grid(), config.chi_grid(), config.exclude_gamma_zero)


def cmd_sweep(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    cohort = calibrate_cohort(load_records(args), config, n_jobs)
    results = parallel_map(cohort, partial(_sweep_one, config=config), n_jobs, desc="sweep")
    write_csv(pd.concat([result.to_frame() for result in results], ignore_index=True), out / "sweep.csv")
    summary = pd.DataFrame([
        {"jurisdiction": r.jurisdiction, "pct_inc_red": r.mean_reduction, "monotone_in_chi": r.is_monotone_in_chi()}
        for r in results
    ])
    write_csv(summary, out / "sweep_summary.csv")
    print(frame_table(summary))


def _thresholds_one(cal: CalibratedJurisdiction, config: RunConfig) -> List[Dict[str, Any]]:
    runner = ScenarioRunner(cal, config.policy_constants(), config.horizon_months, config.step_months)
    rows = []
    for gamma in config.threshold_gammas:
        found = runner.threshold(gamma, config.threshold_tolerance, config.threshold_chi_cap)
        rows.append({
            "jurisdiction": cal.name,
            "gamma": gamma,
            "chi_threshold": found.chi_threshold,
            "bracket_lo": found.bracket[0],
            "bracket_hi": found.bracket[1],
            "iterations": found.iterations,
        })
    return rows


def cmd_threshold(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    cohort = calibrate_cohort(load_records(args), config, n_jobs)
    chunks = parallel_map(cohort, partial(_thresholds_one, config=config), n_jobs, desc="threshold")
    frame = pd.DataFrame([row for chunk in chunks for row in chunk])
    write_csv(frame, out / "thresholds.csv")
    print(frame_table(frame[["jurisdiction", "gamma", "chi_threshold"]], {"gamma": lambda v: f"{v:.2f}"}))


def certify(cal: CalibratedJurisdiction, config: RunConfig) -> Dict[str, Any]:
    """Embed a jurisdiction in the nonlinear system and check the linearization"""
    policy = config.policy_constants().baseline
    det = detection_rates(cal.testing, policy)
    shell = embed_in_nonlinear_shell(
        cal.transmission,
        cal.progression,
        cal.mortality,
        cal.initial_state,
        config.shell_sigma0,
        config.shell_population,
        config.shell_mu_e_fraction,
    )
    traj = integrate_nonlinear(shell, det, config.horizon_months, config.step_months)
    certificate = linearization_certificate(shell, traj)
    return {
        "jurisdiction": cal.name,
        "sigma0": certificate.sigma0,
        "max_drift": certificate.max_drift,
        "bound_pointwise_end": float(certificate.bound_pointwise[-1]),
        "bound_uniform_end": float(certificate.bound_uniform[-1]),
        "passes": certificate.passes,
        "incidence_rel_diff": linear_vs_nonlinear(
            build_matrices(cal.parameters, policy), shell, det, config.horizon_months, config.step_months
        ),
    }


def cmd_validate(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    records = load_records(args)
    cohort = calibrate_cohort(records, config, n_jobs)
    constants = config.policy_constants()
    reports = [
        validate_against_surveillance(
            cal, records.records[cal.name], constants, config.validation_horizon_months, config.step_months
        )
        for cal in cohort
    ]
    validation = pd.concat([report.to_frame() for report in reports], ignore_index=True)
    write_csv(validation, out / "validation.csv")

    certificates = pd.DataFrame(parallel_map(cohort, partial(certify, config=config), n_jobs, desc="certify"))
    write_csv(certificates, out / "certificate.csv")

    print(frame_table(validation, {"surveillance": lambda v: f"{v:.4f}", "simulated": lambda v: f"{v:.4f}", "delta": lambda v: f"{v:+.4f}"}))
    print()
    print(frame_table(certificates))
    failed = certificates.loc[~certificates["passes"], "jurisdiction"].tolist()
    if failed:
        logger.warning(f"Linearization certificate failed for: {', '.join(failed)}")


def cmd_report(args, config: RunConfig, n_jobs: int, out: Path) -> None:
    records = load_records(args)
    cohort = calibrate_cohort(records, config, n_jobs)
    table = benefit_risk_table(cohort, config, records.records, n_jobs)
    write_csv(table, out / "report.csv")
    write_csv(scatter_series(table), out / "scatter.csv")
    associations = association_summary(table)
    write_json(associations, out / "associations.json")

    print(cohort_table(table))
    reduction = table["pct_inc_red"]
    print(f"\nMean reduction {100 * reduction.mean():.1f}%, median {100 * reduction.median():.1f}%")


HANDLERS = {
    "calibrate": cmd_calibrate,
    "ngm": cmd_ngm,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "threshold": cmd_threshold,
    "validate": cmd_validate,
    "report": cmd_report,
}


def _report_error(response: ErrorResponse, as_json: bool) -> None:
    if as_json:
        sys.stderr.write(response.model_dump_json() + "\n")
    else:
        sys.stderr.write(f"hivst {response.command}: {response.error_type.value}: {response.message}\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    json_errors = args.json_errors or settings.json_errors
    n_jobs = args.workers or settings.workers

    try:
        setup_logging(level=args.log_level)
        config = load_config(args)
        out = Path(config.output_dir)
        HANDLERS[args.command](args, config, n_jobs, out)
    except HivstError as exc:
        logger.debug("Command failed", exc_info=True)
        _report_error(exc.to_response(args.command), json_errors)
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"Unexpected error in {args.command}")
        _report_error(
            ErrorResponse(error_type=ErrorType.SYSTEM_ERROR, message=str(exc), exit_code=EXIT_UNEXPECTED, command=args.command),
            json_errors,
        )
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
