"""Raw record parsing with a rejects report, and marginal imputation.

Rows that fail validation are never silently dropped: each lands in the
rejects frame with its line number and a reason. Missing demographics
(sex, race, age) are allowed through and filled later by impute_missing;
a missing or malformed result, zip, or date identifies the row and is a
reject.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.ingest.config import SchemaConfig

ZIP_RE = re.compile(r"^[0-9]{5}$")


@dataclass
class ParseResult:
    records: pd.DataFrame
    rejects: pd.DataFrame  # columns: line, reason
    rows_read: int = 0

    @property
    def reject_reasons(self) -> dict[str, int]:
        if self.rejects.empty:
            return {}
        return self.rejects["reason"].value_counts().to_dict()


def parse_records(source, config: SchemaConfig | None = None) -> ParseResult:
    """Validate a delimited test-record file against the schema config."""
    config = config if config is not None else SchemaConfig()
    raw = pd.read_csv(
        source, sep=config.delimiter, dtype=str, keep_default_na=False, engine="python"
    )

    required = ("sex", "race", "age", "zip", "result", "result_date")
    missing_cols = [
        config.column(f) for f in required if config.column(f) not in raw.columns
    ]
    if missing_cols:
        raise InputError(f"required columns not found in header: {missing_cols}")

    n = len(raw)
    reasons = np.full(n, "", dtype=object)

    def claim(mask: np.ndarray, reason: str) -> None:
        fresh = mask & (reasons == "")
        reasons[fresh] = reason

    zips = raw[config.column("zip")].str.strip()
    claim(~zips.str.match(ZIP_RE).to_numpy(), "invalid zip")

    result_raw = raw[config.column("result")].str.strip().str.lower()
    result = result_raw.map(config.result_map)
    claim(result.isna().to_numpy(), "invalid result")

    date_raw = raw[config.column("result_date")].str.strip()
    claim((date_raw == "").to_numpy(), "missing date")
    parsed_dates = pd.to_datetime(date_raw, format=config.date_format, errors="coerce")
    claim(((date_raw != "") & parsed_dates.isna()).to_numpy(), "invalid date")
    if config.study_start is not None:
        claim(
            (parsed_dates.dt.date < config.study_start).fillna(False).to_numpy(),
            "date outside study window",
        )
    if config.study_end is not None:
        claim(
            (parsed_dates.dt.date > config.study_end).fillna(False).to_numpy(),
            "date outside study window",
        )

    sex_raw = raw[config.column("sex")].str.strip().str.lower()
    sex = sex_raw.map(config.sex_map)
    claim(((sex_raw != "") & sex.isna()).to_numpy(), "unmapped sex value")

    race_raw = raw[config.column("race")].str.strip().str.lower()
    race = race_raw.map(config.race_map)
    claim(((race_raw != "") & race.isna()).to_numpy(), "unmapped race value")

    age_raw = raw[config.column("age")].str.strip()
    age = pd.to_numeric(age_raw, errors="coerce")
    bad_age = (age_raw != "") & (age.isna() | (age < 0) | (age % 1 != 0))
    claim(bad_age.to_numpy(), "invalid age")

    id_col = config.column("record_id")
    if id_col in raw.columns:
        record_id = raw[id_col].str.strip()
        record_id = record_id.where(record_id != "", [f"row{i}" for i in range(n)])
    else:
        record_id = pd.Series([f"row{i}" for i in range(n)])

    ok = reasons == ""
    records = pd.DataFrame(
        {
            "record_id": record_id[ok].to_numpy(),
            "sex": sex[ok].to_numpy(),
            "race": race[ok].to_numpy(),
            "age": age[ok].to_numpy(),
            "zip": zips[ok].to_numpy(),
            "result": result[ok].astype(int).to_numpy(),
            "result_date": parsed_dates[ok].dt.date.to_numpy(),
        }
    ).reset_index(drop=True)
    rejects = pd.DataFrame(
        {"line": np.flatnonzero(~ok) + 2, "reason": reasons[~ok]}  # 1-based + header
    )

    if n > 0 and len(rejects) / n > 0.5:
        raise InputError(
            f"{len(rejects)} of {n} rows rejected (>50%); reasons: "
            f"{rejects['reason'].value_counts().to_dict()}"
        )
    return ParseResult(records=records, rejects=rejects, rows_read=n)


def impute_missing(records: pd.DataFrame, seed: int) -> tuple[pd.DataFrame, dict[str, int]]:
    """Fill missing sex/race/age by independent draws from observed frequencies."""
    records = records.copy()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    counts: dict[str, int] = {}
    for col in ("sex", "race", "age"):
        values = records[col]
        missing = values.isna()
        counts[col] = int(missing.sum())
        if not missing.any():
            continue
        observed = values[~missing]
        if observed.empty:
            raise InputError(f"column {col!r} has no observed values to impute from")
        freq = observed.value_counts().sort_index()
        levels = freq.index.to_numpy()
        probs = freq.to_numpy() / freq.sum()
        records.loc[missing, col] = rng.choice(levels, size=counts[col], p=probs)
    records["age"] = records["age"].astype(np.int64)
    return records, counts
