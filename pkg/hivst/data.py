"""
Input and output files: jurisdiction CSV, calibrated parameter JSON and
result writers
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import orjson
import pandas as pd

from .calibration import (
    CalibratedJurisdiction,
    SurveillanceRecord,
    StageOccupancy,
    UnawareSplit,
    aggregate_mortality_rate,
    aggregate_testing_rate,
    aggregate_transmission_rate,
)
from .core.errors import CalibrationError, DataError, NumericalError, ParameterError
from .model import (
    StageMortality,
    StageParameters,
    StageProgression,
    StageTesting,
    StageTransmission,
    StateVector,
)

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("name", "aware_fraction", "p_nocare", "p_art", "p_vls")
RATE_COLUMNS = ("lambda_bar_per_month", "mu_bar_per_year", "phi_bar_per_month")
COUNT_COLUMNS = ("incidence_per_year", "prevalence", "deaths_per_year", "new_diagnoses_per_year", "unaware_prev_year")
RANGE_COLUMNS = ("aware_low", "aware_high")
TARGET_COLUMNS = ("r_t_target", "r_awr_target")

# Count columns each rate can be derived from
_RATE_SOURCES = {
    "lambda_bar_per_month": ("incidence_per_year", "prevalence"),
    "mu_bar_per_year": ("deaths_per_year", "prevalence"),
    "phi_bar_per_month": ("new_diagnoses_per_year", "unaware_prev_year", "incidence_per_year"),
}

CSV_FLOAT_FORMAT = "%.6g"


@dataclass
class JurisdictionFile:
    """Surveillance records keyed by jurisdiction name, in file order"""
    path: str
    records: Dict[str, SurveillanceRecord] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SurveillanceRecord]:
        return iter(self.records.values())

    @property
    def names(self) -> List[str]:
        return list(self.records)

    def select(self, names: Optional[Sequence[str]]) -> "JurisdictionFile":
        """Subset by name; None keeps everything"""
        if not names:
            return self
        missing = [name for name in names if name not in self.records]
        if missing:
            raise DataError(f"Unknown jurisdiction(s): {', '.join(missing)}", path=self.path, field="name")
        return JurisdictionFile(self.path, {name: self.records[name] for name in names})


def _cell(row: pd.Series, column: str) -> Optional[float]:
    if column not in row.index:
        return None
    value = row[column]
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return float(value)


def _rate_from_counts(column: str, row: pd.Series) -> Optional[float]:
    counts = [_cell(row, source) for source in _RATE_SOURCES[column]]
    if any(value is None for value in counts):
        return None
    if column == "lambda_bar_per_month":
        return aggregate_transmission_rate(*counts)
    if column == "mu_bar_per_year":
        return aggregate_mortality_rate(*counts)
    return aggregate_testing_rate(*counts)


def _parse_row(row: pd.Series, path: str, line: int) -> SurveillanceRecord:
    name = str(row["name"]).strip() if not pd.isna(row["name"]) else ""
    rates = {}
    for column in RATE_COLUMNS:
        given = _cell(row, column)
        try:
            derived = _rate_from_counts(column, row)
        except CalibrationError as exc:
            raise DataError(f"{path}:{line}: {exc.message}", path=path, line=line, field=column) from exc
        if given is not None and derived is not None:
            logger.warning(f"{path}:{line}: {name} has both {column} and raw counts; using the rate")
        value = given if given is not None else derived
        if value is None:
            raise DataError(f"{path}:{line}: missing {column} and the counts to derive it", path=path, line=line, field=column)
        rates[column] = value

    values = {}
    for column in REQUIRED_COLUMNS[1:]:
        value = _cell(row, column)
        if value is None:
            raise DataError(f"{path}:{line}: missing {column}", path=path, line=line, field=column)
        values[column] = value

    try:
        return SurveillanceRecord(
            jurisdiction=name,
            lambda_bar=rates["lambda_bar_per_month"],
            mu_bar=rates["mu_bar_per_year"],
            aware_fraction=values["aware_fraction"],
            phi_bar=rates["phi_bar_per_month"],
            p_nocare=values["p_nocare"],
            p_art=values["p_art"],
            p_vls=values["p_vls"],
            aware_low=_cell(row, "aware_low"),
            aware_high=_cell(row, "aware_high"),
            r_t_target=_cell(row, "r_t_target"),
            r_awr_target=_cell(row, "r_awr_target"),
        )
    except ParameterError as exc:
        raise DataError(f"{path}:{line}: {exc.message}", path=path, line=line, field=exc.field) from exc


def _content_lines(path: str) -> List[int]:
    """1-based numbers of the lines pandas keeps: not blank, not a comment"""
    numbers = []
    with open(path, encoding="utf-8", errors="replace") as handle:
        for number, text in enumerate(handle, start=1):
            if text.split("#", 1)[0].strip():
                numbers.append(number)
    return numbers


def load_jurisdictions(path: Union[str, Path]) -> JurisdictionFile:
    """
    Read a jurisdiction CSV.

    Rate columns take precedence over raw counts. The optional
    r_t_target and r_awr_target columns come as a pair per row. Any
    invalid row rejects the whole file; errors carry the 1-based file
    line, counting comment and blank lines.

    Raises:
        DataError: unreadable file, schema mismatch or invalid row
    """
    path = str(path)
    try:
        frame = pd.read_csv(path, skipinitialspace=True, comment="#")
    except FileNotFoundError as exc:
        raise DataError(f"Jurisdiction file not found: {path}", path=path) from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"Jurisdiction file has no header: {path}", path=path) from exc
    except (pd.errors.ParserError, UnicodeDecodeError, OSError) as exc:
        raise DataError(f"Cannot parse {path}: {exc}", path=path) from exc

    frame.columns = [str(column).strip() for column in frame.columns]
    content = _content_lines(path)
    header_line = content[0] if content else 1

    def file_line(index: int) -> int:
        position = index + 1
        return content[position] if position < len(content) else header_line + position

    missing = [column for column in REQUIRED_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(missing)}", path=path, line=header_line, field=missing[0])
    for column in RATE_COLUMNS:
        if column not in frame.columns and not all(source in frame.columns for source in _RATE_SOURCES[column]):
            raise DataError(f"{path}: need {column} or the columns {', '.join(_RATE_SOURCES[column])}", path=path, line=header_line, field=column)

    numeric = [c for c in (*REQUIRED_COLUMNS[1:], *RATE_COLUMNS, *COUNT_COLUMNS, *RANGE_COLUMNS, *TARGET_COLUMNS) if c in frame.columns]
    for column in numeric:
        converted = pd.to_numeric(frame[column], errors="coerce")
        bad = converted.isna() & frame[column].notna()
        if bad.any():
            line = file_line(int(bad.idxmax()))
            raise DataError(f"{path}:{line}: {column} is not a number", path=path, line=line, field=column)
        frame[column] = converted

    result = JurisdictionFile(path)
    for index, row in frame.iterrows():
        line = file_line(int(index))
        record = _parse_row(row, path, line)
        if record.jurisdiction in result.records:
            raise DataError(f"{path}:{line}: duplicate jurisdiction {record.jurisdiction!r}", path=path, line=line, field="name")
        result.records[record.jurisdiction] = record

    if not result.records:
        logger.warning(f"{path} holds no jurisdictions")
    else:
        logger.info(f"Loaded {len(result)} jurisdictions from {path}")
    return result


def calibrated_to_dict(cal: CalibratedJurisdiction) -> Dict[str, Any]:
    return dataclasses.asdict(cal)


def calibrated_from_dict(payload: Dict[str, Any]) -> CalibratedJurisdiction:
    try:
        parameters = payload["parameters"]
        return CalibratedJurisdiction(
            name=payload["name"],
            parameters=StageParameters(
                progression=StageProgression(**parameters["progression"]),
                mortality=StageMortality(**parameters["mortality"]),
                transmission=StageTransmission(**parameters["transmission"]),
                testing=StageTesting(**parameters["testing"]),
            ),
            occupancy=StageOccupancy(**payload["occupancy"]),
            split=UnawareSplit(**payload["split"]),
            initial_state=StateVector(**payload["initial_state"]),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"Calibrated parameters are incomplete: {exc}", field=str(exc)) from exc
    except ParameterError as exc:
        raise DataError(f"Calibrated parameters are invalid: {exc.message}", field=exc.field) from exc


def load_calibrated(path: Union[str, Path]) -> List[CalibratedJurisdiction]:
    """Read the JSON written by the calibrate command"""
    try:
        payload = orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as exc:
        raise DataError(f"Calibrated file not found: {path}", path=str(path)) from exc
    except orjson.JSONDecodeError as exc:
        raise DataError(f"Calibrated file is not JSON: {exc}", path=str(path)) from exc
    items = payload.get("jurisdictions") if isinstance(payload, dict) else None
    if not isinstance(items, list):
        raise DataError("Calibrated file has no 'jurisdictions' list", path=str(path))
    return [calibrated_from_dict(item) for item in items]


def _check_finite_payload(obj: Any, where: str) -> None:
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise NumericalError(f"non-finite value in {where}", stage="write")
    elif isinstance(obj, dict):
        for key, value in obj.items():
            _check_finite_payload(value, f"{where}.{key}")
    elif isinstance(obj, (list, tuple)):
        for index, value in enumerate(obj):
            _check_finite_payload(value, f"{where}[{index}]")
    elif isinstance(obj, np.ndarray) and obj.dtype.kind == "f":
        if not np.all(np.isfinite(obj)):
            raise NumericalError(f"non-finite value in {where}", stage="write")


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    """Sorted, indented JSON with full float precision"""
    path = Path(path)
    _check_finite_payload(payload, path.name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY))
    logger.info(f"Wrote {path}")
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with 6 significant digits"""
    path = Path(path)
    numbers = frame.select_dtypes(include="number")
    if not np.all(np.isfinite(numbers.to_numpy(dtype=float))):
        raise NumericalError(f"non-finite value in {path.name}", stage="write")
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def calibrated_frame(cohort: Sequence[CalibratedJurisdiction]) -> pd.DataFrame:
    """Flat per-jurisdiction parameter table"""
    rows = []
    for cal in cohort:
        row = {"jurisdiction": cal.name}
        for part in (cal.progression, cal.mortality, cal.transmission, cal.testing, cal.occupancy, cal.split):
            row.update(dataclasses.asdict(part))
        rows.append(row)
    return pd.DataFrame(rows)
