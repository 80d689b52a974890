"""
Plain-text tables for the terminal
"""
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd


def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """
    Render rows of strings as an aligned table.

    Args:
        headers: column titles
        rows: cells, already formatted

    Returns:
        str: header, separator and one line per row
    """
    # Calculate column widths
    col_widths = [len(header) for header in headers]
    for row in rows:
        for idx, cell in enumerate(row):
            col_widths[idx] = max(col_widths[idx], len(cell))

    header_line = " | ".join(header.ljust(col_widths[idx]) for idx, header in enumerate(headers))
    separator = "-+-".join("-" * col_widths[idx] for idx in range(len(headers)))
    row_lines = [" | ".join(cell.ljust(col_widths[idx]) for idx, cell in enumerate(row)) for row in rows]
    return "\n".join([header_line, separator] + row_lines)


def percent(value: float) -> str:
    """Decimal fraction as a one-decimal percentage"""
    return f"{100 * value:.1f}%"


def rate(value: float) -> str:
    return f"{value:.3f}"


def ratio(value: float) -> str:
    return f"{value:.3f}"


COHORT_FORMATS: Dict[str, Callable[[float], str]] = {
    "lambda_bar": rate,
    "phi_bar": rate,
    "r_t": ratio,
    "r_awr": ratio,
    "pct_inc_red": percent,
}


def frame_table(frame: pd.DataFrame, formats: Dict[str, Callable[[float], str]] = None) -> str:
    """
    Format a result frame; columns named chi_* and pct_* print as percentages
    unless ``formats`` says otherwise.
    """
    formats = dict(formats or {})
    headers: List[str] = [str(column) for column in frame.columns]
    rows = []
    for record in frame.itertuples(index=False):
        row = []
        for column, value in zip(headers, record):
            if isinstance(value, str) or value is None:
                row.append("" if value is None else value)
            elif column in formats:
                row.append(formats[column](value))
            elif column.startswith(("chi_", "pct_", "aware")):
                row.append(percent(value))
            elif isinstance(value, (bool, np.bool_)):
                row.append("yes" if value else "no")
            else:
                row.append(f"{value:.4g}")
        rows.append(row)
    return format_table(headers, rows)


def cohort_table(frame: pd.DataFrame) -> str:
    return frame_table(frame, COHORT_FORMATS)
