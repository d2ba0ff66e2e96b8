"""Aggregation of records into poststratification cells and geographic filtering."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.ingest.config import age_bin_labels

CELL_KEYS = ["sex", "age_group", "race", "zip", "week_index"]


def default_week_origin(dates) -> date:
    """Monday on or before the earliest result date."""
    earliest = min(dates)
    return earliest - timedelta(days=earliest.weekday())


def aggregate_to_cells(
    records: pd.DataFrame, age_bins: tuple[int, ...], week_origin: date | None = None
) -> tuple[pd.DataFrame, date]:
    """Cross-tabulate records into (sex, age_group, race, zip, week) cells.

    Totals are preserved exactly: sum(n_tests) equals the record count and
    sum(n_positive) the positives.
    """
    for col in ("sex", "race", "age"):
        if records[col].isna().any():
            raise InputError(f"records still have missing {col}; impute first")
    if records.empty:
        raise InputError("no records to aggregate")

    if week_origin is None:
        week_origin = default_week_origin(records["result_date"])

    ages = records["age"].to_numpy()
    if ages.min() < age_bins[0]:
        raise InputError(f"age {int(ages.min())} below the first bin edge {age_bins[0]}")
    labels = age_bin_labels(age_bins)
    bin_idx = np.searchsorted(np.asarray(age_bins), ages, side="right") - 1
    age_group = np.asarray(labels, dtype=object)[bin_idx]

    days = np.asarray([(d - week_origin).days for d in records["result_date"]])
    if days.min() < 0:
        raise InputError("record dated before the week origin")
    week_index = days // 7

    work = pd.DataFrame(
        {
            "sex": records["sex"].to_numpy(),
            "age_group": age_group,
            "race": records["race"].to_numpy(),
            "zip": records["zip"].to_numpy(),
            "week_index": week_index,
            "result": records["result"].to_numpy(),
        }
    )
    cells = (
        work.groupby(CELL_KEYS, sort=True)
        .agg(n_tests=("result", "size"), n_positive=("result", "sum"))
        .reset_index()
    )
    assert cells["n_tests"].sum() == len(records)
    assert cells["n_positive"].sum() == records["result"].sum()
    return cells, week_origin


def filter_geography(
    cells: pd.DataFrame, zip_state_map: dict[str, str]
) -> tuple[pd.DataFrame, dict]:
    """Drop sparse zips, then marginal states, in exactly that order.

    Pass one removes zips with five or fewer records; pass two removes states
    holding under 1% of the remaining records. Idempotent: surviving shares
    only grow.
    """
    unresolved = sorted(set(cells["zip"]) - set(zip_state_map))
    if unresolved:
        raise InputError(f"zips not resolvable to a state: {unresolved[:10]}")

    zip_totals = cells.groupby("zip")["n_tests"].sum()
    keep_zips = set(zip_totals[zip_totals > 5].index)
    dropped_zips = sorted(set(zip_totals.index) - keep_zips)
    after_zip = cells[cells["zip"].isin(keep_zips)]
    dropped_zip_records = int(zip_totals[dropped_zips].sum()) if dropped_zips else 0

    states = after_zip["zip"].map(zip_state_map)
    state_totals = after_zip.groupby(states)["n_tests"].sum()
    total = state_totals.sum()
    keep_states = set(state_totals[state_totals / total >= 0.01].index)
    dropped_states = sorted(set(state_totals.index) - keep_states)
    result = after_zip[states.isin(keep_states)].reset_index(drop=True)

    if result.empty:
        raise InputError("no cells left after geographic filtering")

    report = {
        "dropped_zips": dropped_zips,
        "dropped_zip_records": dropped_zip_records,
        "dropped_states": dropped_states,
        "dropped_state_records": int(total - result["n_tests"].sum()),
        "retained_zips": sorted(result["zip"].unique()),
        "retained_records": int(result["n_tests"].sum()),
    }
    return result, report
