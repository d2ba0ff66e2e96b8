"""Descriptive summaries of the preprocessed data: weekly positivity, county
extremes, and sample-vs-population demographic comparison."""

from __future__ import annotations

import numpy as np
import pandas as pd

from mrpkit.poststrat import week_label


def weekly_positivity(cells: pd.DataFrame, week_origin=None) -> pd.DataFrame:
    weekly = (
        cells.groupby("week_index")[["n_tests", "n_positive"]].sum().reset_index()
    )
    weekly["positivity"] = weekly["n_positive"] / weekly["n_tests"]
    if week_origin is not None:
        weekly.insert(1, "week_label", [week_label(w, week_origin) for w in weekly["week_index"]])
    return weekly


def county_summary(cells: pd.DataFrame, county_for_zip: dict[str, str]) -> pd.DataFrame:
    """Per county: total sample size and the highest weekly positivity."""
    work = cells.assign(county_fips=cells["zip"].map(county_for_zip))
    by_week = (
        work.groupby(["county_fips", "week_index"])[["n_tests", "n_positive"]]
        .sum()
        .reset_index()
    )
    by_week["positivity"] = by_week["n_positive"] / by_week["n_tests"]
    out = (
        by_week.groupby("county_fips")
        .agg(
            n_tests=("n_tests", "sum"),
            max_weekly_positivity=("positivity", "max"),
        )
        .reset_index()
        .sort_values("county_fips")
        .reset_index(drop=True)
    )
    return out


def demographic_comparison(cells: pd.DataFrame, poststrat: pd.DataFrame) -> pd.DataFrame:
    """Sample shares (weighted by tests) vs population shares, per dimension."""
    rows = []
    for dim in ("sex", "age_group", "race"):
        sample = cells.groupby(dim)["n_tests"].sum()
        sample_share = sample / sample.sum()
        pop = poststrat.groupby(dim)["population_count"].sum()
        pop_share = pop / pop.sum()
        levels = sorted(set(sample_share.index) | set(pop_share.index))
        for lvl in levels:
            rows.append(
                {
                    "dimension": dim,
                    "level": lvl,
                    "sample_share": float(sample_share.get(lvl, 0.0)),
                    "population_share": float(pop_share.get(lvl, 0.0)),
                }
            )
    return pd.DataFrame(rows)
