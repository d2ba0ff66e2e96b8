"""Zip-level predictor construction from tract measures via the crosswalk.

Measures aggregate to the zip as tract-population-weighted means over the
covered tracts; the county assignment is the county holding the largest share
of the zip's residential addresses (crosswalk ratios), ties to the smallest
fips. Standardization metadata is kept so estimates can be mapped back to the
original predictor scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.tables import read_table, write_table


@dataclass
class GeoPredictorTable:
    frame: pd.DataFrame  # zip, county_fips, <predictor columns>
    scale: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def predictor_columns(self) -> list[str]:
        return [c for c in self.frame.columns if c not in ("zip", "county_fips")]

    @property
    def columns(self):
        return self.frame.columns

    def zip_state_map(self) -> dict[str, str]:
        return {
            z: fips[:2]
            for z, fips in zip(self.frame["zip"], self.frame["county_fips"])
        }

    def save(self, csv_path: str | Path, scale_path: str | Path | None = None) -> None:
        write_table(self.frame, csv_path)
        if scale_path is not None:
            Path(scale_path).write_text(json.dumps(self.scale, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path: str | Path, scale_path: str | Path | None = None) -> "GeoPredictorTable":
        frame = read_table(csv_path)
        scale = {}
        if scale_path is not None and Path(scale_path).exists():
            scale = json.loads(Path(scale_path).read_text())
        return cls(frame=frame, scale=scale)


def validate_crosswalk(crosswalk: pd.DataFrame) -> pd.DataFrame:
    required = {"zip", "tract_id", "residential_ratio"}
    missing = required - set(crosswalk.columns)
    if missing:
        raise InputError(f"crosswalk is missing columns {sorted(missing)}")
    crosswalk = crosswalk.copy()
    crosswalk["zip"] = crosswalk["zip"].astype(str)
    crosswalk["tract_id"] = crosswalk["tract_id"].astype(str)
    ratio = crosswalk["residential_ratio"].astype(float)
    if (ratio < 0).any() or (ratio > 1).any():
        raise InputError("residential_ratio values must lie in [0, 1]")
    sums = crosswalk.groupby("zip")["residential_ratio"].sum()
    bad = sums[sums > 1.0 + 1e-6]
    if not bad.empty:
        raise InputError(f"residential ratios exceed 1 for zips {list(bad.index)[:10]}")
    return crosswalk


def link_zip_predictors(
    crosswalk: pd.DataFrame,
    tract_measures: pd.DataFrame,
    tract_populations: pd.Series | None = None,
    zips: list[str] | None = None,
) -> GeoPredictorTable:
    """Population-weighted tract-to-zip aggregation plus county assignment.

    tract_measures must carry tract_id plus numeric measure columns; the
    population may come as a 'population' column or a separate series.
    """
    crosswalk = validate_crosswalk(crosswalk)
    measures = tract_measures.copy()
    if "tract_id" not in measures.columns:
        raise InputError("tract measures need a tract_id column")
    measures["tract_id"] = measures["tract_id"].astype(str)
    if tract_populations is None:
        if "population" not in measures.columns:
            raise InputError("tract populations missing: no 'population' column or series")
        tract_populations = measures.set_index("tract_id")["population"]
    tract_populations = tract_populations.astype(float)

    if zips is None:
        zips = sorted(crosswalk["zip"].unique())
    else:
        zips = sorted(str(z) for z in zips)

    cw = crosswalk[crosswalk["zip"].isin(set(zips))]
    orphan = sorted(set(zips) - set(cw["zip"]))
    if orphan:
        raise InputError(f"zips with no crosswalk entry: {orphan[:20]}")

    value_cols = [
        c for c in measures.columns if c not in ("tract_id", "population")
    ]
    if not value_cols:
        raise InputError("tract measures have no predictor columns")
    indexed = measures.set_index("tract_id")

    rows = []
    for z, group in cw.groupby("zip", sort=True):
        tracts = [t for t in group["tract_id"] if t in indexed.index]
        pops = np.asarray([tract_populations.get(t, 0.0) for t in tracts], dtype=float)
        covered = pops > 0
        if not covered.any():
            raise InputError(f"zip {z} has no crosswalked tract with population > 0")
        weights = pops[covered] / pops[covered].sum()
        block = indexed.loc[np.asarray(tracts)[covered], value_cols].to_numpy(dtype=float)
        values = weights @ block

        county_share = group.groupby(group["tract_id"].str[:5])["residential_ratio"].sum()
        best = county_share[county_share == county_share.max()].index.min()
        rows.append({"zip": z, "county_fips": best, **dict(zip(value_cols, values))})
    frame = pd.DataFrame(rows)
    return GeoPredictorTable(frame=frame)


def zip_state_from_crosswalk(crosswalk: pd.DataFrame) -> dict[str, str]:
    """State (county fips prefix) of each zip's dominant county."""
    crosswalk = validate_crosswalk(crosswalk)
    out: dict[str, str] = {}
    for z, group in crosswalk.groupby("zip"):
        county_share = group.groupby(group["tract_id"].str[:5])["residential_ratio"].sum()
        best = county_share[county_share == county_share.max()].index.min()
        out[str(z)] = best[:2]
    return out


def standardize_predictors(geo: GeoPredictorTable) -> GeoPredictorTable:
    """Center and scale each predictor column (sample sd, n-1 denominator)."""
    frame = geo.frame.copy()
    scale: dict[str, dict[str, float]] = {}
    for col in geo.predictor_columns:
        values = frame[col].astype(float)
        distinct = values.nunique()
        if distinct < 2:
            raise InputError(f"predictor column {col!r} needs at least 2 distinct values")
        mean = float(values.mean())
        sd = float(values.std(ddof=1))
        if sd == 0.0:
            raise InputError(f"zero-variance predictor column: {col!r}")
        frame[col] = (values - mean) / sd
        scale[col] = {"mean": mean, "sd": sd}
    return GeoPredictorTable(frame=frame, scale=scale)


def destandardize(geo: GeoPredictorTable) -> pd.DataFrame:
    """Invert standardize_predictors using the stored metadata."""
    frame = geo.frame.copy()
    for col, meta in geo.scale.items():
        frame[col] = frame[col] * meta["sd"] + meta["mean"]
    return frame
