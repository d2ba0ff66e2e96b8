"""Column conventions shared across the pipeline.

Tables travel as pandas DataFrames with these documented columns; delimited
exports and re-imports go through the helpers here so float formatting stays
round-trip exact and byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd

# RecordSet
RECORD_COLUMNS = ["record_id", "sex", "race", "age", "zip", "result", "result_date"]

# CellTable
CELL_COLUMNS = ["sex", "age_group", "race", "zip", "week_index", "n_tests", "n_positive"]

# PoststratTable
POSTSTRAT_COLUMNS = ["sex", "age_group", "race", "zip", "population_count"]

SEX_LEVELS = ("female", "male")
RACE_LEVELS = ("Black", "Other", "White")

#: printf-style float format that round-trips float64 exactly
FLOAT_FORMAT = "%.17g"


def write_table(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_table(path: str | Path, **kwargs) -> pd.DataFrame:
    return pd.read_csv(
        path,
        dtype={"zip": str, "county_fips": str, "tract_id": str},
        float_precision="round_trip",
        **kwargs,
    )
