import pandas as pd

from hivst.tables import cohort_table, format_table, frame_table, percent


def test_format_table_aligns_columns():
    text = format_table(["name", "value"], [["a", "1"], ["longer", "22"]])
    lines = text.splitlines()
    assert lines[0] == "name   | value"
    assert lines[1] == "-------+------"
    assert lines[3] == "longer | 22   "


def test_percent_has_one_decimal():
    assert percent(0.073) == "7.3%"


def test_frame_table_formats_by_column():
    frame = pd.DataFrame({"jurisdiction": ["A"], "chi_025": [0.0412], "passes": [True], "r_t": [2.2123]})
    lines = frame_table(frame).splitlines()
    assert [cell.strip() for cell in lines[2].split(" | ")] == ["A", "4.1%", "yes", "2.212"]


def test_cohort_table():
    frame = pd.DataFrame({"jurisdiction": ["A"], "lambda_bar": [0.029], "r_awr": [0.37], "pct_inc_red": [0.073]})
    assert "7.3%" in cohort_table(frame)
    assert "0.029" in cohort_table(frame)
