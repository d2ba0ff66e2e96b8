"""Population counts per poststratification cell, zero-filled to the full cross."""

from __future__ import annotations

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.ingest.config import DEFAULT_RACE_MAP, DEFAULT_SEX_MAP, age_bin_labels, age_group_of
from mrpkit.tables import RACE_LEVELS, SEX_LEVELS


def build_poststrat_table(
    population_cells: pd.DataFrame,
    retained_zips: list[str],
    age_bins: tuple[int, ...],
    sex_map: dict[str, str] | None = None,
    race_map: dict[str, str] | None = None,
) -> pd.DataFrame:
    """Complete sex x age-bin x race x zip table of population counts.

    The source may carry an age_group column matching the bin labels or an
    age column in years (binned here). Combinations absent from the source
    get a zero count; the total is preserved for the retained zips.
    """
    sex_map = sex_map if sex_map is not None else dict(DEFAULT_SEX_MAP)
    race_map = race_map if race_map is not None else dict(DEFAULT_RACE_MAP)
    source = population_cells.copy()

    count_col = next((c for c in ("population_count", "count") if c in source.columns), None)
    if count_col is None:
        raise InputError("population file needs a population_count (or count) column")
    required = {"zip", "sex", "race"}
    missing = required - set(source.columns)
    if missing:
        raise InputError(f"population file is missing columns {sorted(missing)}")

    source["zip"] = source["zip"].astype(str)
    retained = sorted(str(z) for z in retained_zips)
    absent = sorted(set(retained) - set(source["zip"]))
    if absent:
        raise InputError(f"retained zips absent from the population source: {absent[:20]}")
    source = source[source["zip"].isin(set(retained))]

    sex = source["sex"].astype(str).str.strip().str.lower().map(sex_map)
    if sex.isna().any():
        bad = sorted(source.loc[sex.isna(), "sex"].unique())
        raise InputError(f"unmapped sex values in population file: {bad[:10]}")
    race = source["race"].astype(str).str.strip().str.lower().map(race_map)
    if race.isna().any():
        bad = sorted(source.loc[race.isna(), "race"].unique())
        raise InputError(f"unmapped race values in population file: {bad[:10]}")

    labels = age_bin_labels(age_bins)
    if "age_group" in source.columns:
        age_group = source["age_group"].astype(str)
        unknown = sorted(set(age_group) - set(labels))
        if unknown:
            raise InputError(
                f"age_group values not matching the configured bins {labels}: {unknown[:10]}"
            )
    elif "age" in source.columns:
        ages = pd.to_numeric(source["age"], errors="coerce")
        if ages.isna().any():
            raise InputError("non-numeric age values in population file")
        age_group = pd.Series([age_group_of(int(a), age_bins) for a in ages], index=source.index)
    else:
        raise InputError("population file needs an age_group or age column")

    counts = pd.to_numeric(source[count_col], errors="coerce")
    if counts.isna().any() or (counts < 0).any():
        raise InputError("population counts must be nonnegative numbers")
    source_total = float(counts.sum())

    work = pd.DataFrame(
        {
            "sex": sex.to_numpy(),
            "age_group": age_group.to_numpy(),
            "race": race.to_numpy(),
            "zip": source["zip"].to_numpy(),
            "population_count": counts.to_numpy(),
        }
    )
    collapsed = (
        work.groupby(["sex", "age_group", "race", "zip"], sort=True)["population_count"]
        .sum()
        .reset_index()
    )

    full = pd.MultiIndex.from_product(
        [SEX_LEVELS, labels, RACE_LEVELS, retained],
        names=["sex", "age_group", "race", "zip"],
    ).to_frame(index=False)
    table = full.merge(collapsed, how="left", on=["sex", "age_group", "race", "zip"])
    table["population_count"] = table["population_count"].fillna(0.0)

    total = float(table["population_count"].sum())
    if source_total > 0 and abs(total - source_total) > 1e-6 * source_total:
        raise InputError(
            f"population total changed during cross-classification: {source_total} -> {total}"
        )
    return table
