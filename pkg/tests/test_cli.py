import orjson
import pandas as pd
import pytest

from hivst.cli import main, slugify
from hivst.core.errors import EXIT_CONFIG, EXIT_DATA, EXIT_OK

from conftest import JURISDICTION_HEADER

KING = "King County, WA"


def run(*argv):
    return main([str(arg) for arg in argv])


class TestCommands:
    def test_calibrate_then_simulate_from_json(self, jurisdiction_csv, tmp_path):
        calibrated_dir = tmp_path / "calibrated"
        assert run("calibrate", "--jurisdictions", jurisdiction_csv, "--out", calibrated_dir) == EXIT_OK
        assert len(pd.read_csv(calibrated_dir / "calibrated.csv")) == 3

        direct, reloaded = tmp_path / "direct", tmp_path / "reloaded"
        common = ["--jurisdiction", KING, "--horizon-months", 24, "--gamma", 0.5, "--chi", 0.1]
        assert run("simulate", "--jurisdictions", jurisdiction_csv, "--out", direct, *common) == EXIT_OK
        assert run("simulate", "--calibrated", calibrated_dir / "calibrated.json", "--out", reloaded, *common) == EXIT_OK

        name = f"trajectory_{slugify(KING)}.csv"
        assert (direct / name).read_bytes() == (reloaded / name).read_bytes()
        trajectory = pd.read_csv(direct / name)
        assert len(trajectory) == 97
        assert trajectory["cumulative_incidence"].is_monotonic_increasing

    def test_output_independent_of_workers(self, jurisdiction_csv, tmp_path):
        assert run("calibrate", "--jurisdictions", jurisdiction_csv, "--out", tmp_path / "one") == EXIT_OK
        assert run("calibrate", "--jurisdictions", jurisdiction_csv, "--out", tmp_path / "two", "--workers", 2) == EXIT_OK
        for name in ("calibrated.csv", "calibrated.json"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_ngm(self, jurisdiction_csv, tmp_path):
        assert run("ngm", "--jurisdictions", jurisdiction_csv, "--out", tmp_path) == EXIT_OK
        frame = pd.read_csv(tmp_path / "ngm.csv")
        assert list(frame.columns) == ["jurisdiction", "r_t", "r_t_closed_form", "r_awr", "lambda_d_over_mu_d"]
        pd.testing.assert_series_equal(frame["r_t"], frame["r_t_closed_form"], check_names=False, rtol=1e-5)

    def test_sweep(self, jurisdiction_csv, tmp_path):
        assert run("sweep", "--jurisdictions", jurisdiction_csv, "--grid-step", 0.5, "--out", tmp_path) == EXIT_OK
        assert len(pd.read_csv(tmp_path / "sweep.csv")) == 3 * 9
        summary = pd.read_csv(tmp_path / "sweep_summary.csv")
        assert summary["monotone_in_chi"].all()

    def test_threshold(self, jurisdiction_csv, tmp_path):
        assert run("threshold", "--jurisdictions", jurisdiction_csv, "--gamma", 0.25, "--out", tmp_path) == EXIT_OK
        frame = pd.read_csv(tmp_path / "thresholds.csv")
        assert list(frame["gamma"]) == [0.25, 0.25, 0.25]
        assert frame["chi_threshold"].between(0.0, 0.5).all()

    def test_validate(self, jurisdiction_csv, tmp_path):
        assert run("validate", "--jurisdictions", jurisdiction_csv, "--out", tmp_path) == EXIT_OK
        assert len(pd.read_csv(tmp_path / "validation.csv")) == 3 * 4
        certificates = pd.read_csv(tmp_path / "certificate.csv")
        assert certificates["passes"].all()

    def test_report(self, jurisdiction_csv, tmp_path):
        assert run("report", "--jurisdictions", jurisdiction_csv, "--grid-step", 0.5, "--out", tmp_path) == EXIT_OK
        table = pd.read_csv(tmp_path / "report.csv")
        assert list(table.columns) == [
            "jurisdiction", "lambda_bar", "phi_bar", "r_t", "r_awr", "pct_inc_red",
            "chi_025", "chi_050", "chi_075", "chi_100",
        ]
        assert len(table) == 3
        king = table.set_index("jurisdiction").loc["King County, WA"]
        assert king["lambda_bar"] == pytest.approx(0.03, rel=1e-5)
        assert king["phi_bar"] == pytest.approx(0.017, rel=1e-5)
        assert (tmp_path / "scatter.csv").exists()
        associations = orjson.loads((tmp_path / "associations.json").read_bytes())
        assert "r_awr_vs_pct_inc_red" in associations

    @pytest.mark.cohort
    def test_reference_cohort_calibrates(self, tmp_path):
        assert run("calibrate", "--out", tmp_path) == EXIT_OK
        assert len(pd.read_csv(tmp_path / "calibrated.csv")) == 38


class TestFailures:
    def test_missing_alpha_exits_with_config_status(self, jurisdiction_csv, tmp_path, capsys):
        config = tmp_path / "study.env"
        config.write_text("HIVST_ALPHA_A=5.0\n")
        status = run("ngm", "--jurisdictions", jurisdiction_csv, "--config", config, "--out", tmp_path, "--json-errors")
        assert status == EXIT_CONFIG
        lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
        error = orjson.loads(lines[-1])
        assert error["error_type"] == "config_error"
        assert error["exit_code"] == EXIT_CONFIG
        assert "HIVST_ALPHA_S" in error["message"]

    def test_bad_row_exits_with_data_status(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text(JURISDICTION_HEADER + '\n"X",0.002,0.01,1.2,0.015,0.2,0.1,0.5,,\n')
        assert run("calibrate", "--jurisdictions", path, "--out", tmp_path) == EXIT_DATA
        assert "aware_fraction" in capsys.readouterr().err

    def test_simulate_needs_one_jurisdiction(self, jurisdiction_csv, tmp_path):
        assert run("simulate", "--jurisdictions", jurisdiction_csv, "--out", tmp_path) == EXIT_DATA

    def test_unknown_log_level(self, jurisdiction_csv, tmp_path):
        assert run("ngm", "--jurisdictions", jurisdiction_csv, "--out", tmp_path, "--log-level", "LOUD") == EXIT_CONFIG
