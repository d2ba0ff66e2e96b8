"""Poststratification: combine posterior incidence with population counts.

Estimates are computed per posterior draw and then summarized, preserving the
nonlinearity of the model: for draw d and group g,

    estimate_g(d) = sum_{cells j in g} N_j * pi_j(d) / sum_{j in g} N_j

over *population* cells (the full sex x age x race x zip table crossed with
every model week), so cells and weeks with no observed tests still contribute
model predictions. Zips present in the population table but absent from the
fitted data get their zip-level random error drawn per draw from its
posterior-width normal (seeded, documented); their predictor rows must be
supplied via the geo table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit

from mrpkit.errors import InputError
from mrpkit.model.compile import GROUP_ORDER, ModelData
from mrpkit.model.posterior import unconstrain
from mrpkit.sampler.run import DrawsMatrix
from mrpkit.tables import FLOAT_FORMAT

GROUPINGS = ("overall", "week", "sex", "race", "age", "county")

_KEY_COLUMNS = {
    "week": "week_index",
    "sex": "sex",
    "race": "race",
    "age": "age_group",
    "county": "county_fips",
}

STAT_COLUMNS = ["mean", "sd", "l-95%", "u-95%"]


@dataclass
class EstimateSeries:
    """Grouped poststratified estimates plus optional per-draw values."""

    frame: pd.DataFrame
    grouping: tuple[str, ...]
    notes: list[str] = field(default_factory=list)
    draw_estimates: np.ndarray | None = None  # (draws, groups), aligned with frame rows

    @property
    def key_columns(self) -> list[str]:
        return [_KEY_COLUMNS[g] for g in self.grouping]


def parse_grouping(grouping) -> tuple[str, ...]:
    if isinstance(grouping, str):
        grouping = () if grouping == "overall" else tuple(grouping.split(":"))
    grouping = tuple(grouping)
    for g in grouping:
        if g not in _KEY_COLUMNS:
            raise InputError(
                f"unknown grouping {g!r}; expected subset of {sorted(_KEY_COLUMNS)} or 'overall'"
            )
    if len(set(grouping)) != len(grouping):
        raise InputError("repeated grouping dimension")
    return grouping


def poststratify(
    draws: DrawsMatrix,
    data: ModelData,
    ps: pd.DataFrame,
    grouping="week",
    geo: pd.DataFrame | None = None,
    seed: int = 0,
    chunk: int = 256,
    keep_draws: bool = False,
) -> EstimateSeries:
    """Population-weighted incidence estimates for one grouping."""
    grouping = parse_grouping(grouping)
    notes: list[str] = []
    required = {"sex", "age_group", "race", "zip", "population_count"}
    missing = required - set(ps.columns)
    if missing:
        raise InputError(f"poststratification table is missing columns {sorted(missing)}")
    ps = ps.copy()
    ps["zip"] = ps["zip"].astype(str)

    for col, levels, label in (
        ("age_group", data.age_levels, "age"),
        ("race", data.race_levels, "race"),
    ):
        unseen = set(map(str, ps[col].unique())) - set(levels)
        if unseen:
            raise InputError(
                f"population table has {label} levels the model never saw: {sorted(unseen)}"
            )
    bad_sex = set(map(str, ps["sex"].unique())) - {"female", "male"}
    if bad_sex:
        raise InputError(f"population table has unknown sex levels: {sorted(bad_sex)}")

    geo_frame = getattr(geo, "frame", geo)
    model_zips = list(data.zip_levels)
    ps_zips = sorted(set(ps["zip"]))
    unseen_zips = [z for z in ps_zips if z not in set(model_zips)]
    if unseen_zips:
        if geo_frame is None:
            raise InputError(
                f"population table covers zips the model never saw {unseen_zips[:10]}; "
                "pass the geo predictor table to predict them"
            )
        geo_idx = geo_frame.set_index(geo_frame["zip"].astype(str))
        orphan = [z for z in unseen_zips if z not in geo_idx.index]
        if orphan:
            raise InputError(f"no predictor rows for unseen zips {orphan[:10]}")
        z_unseen = (
            geo_idx.loc[unseen_zips, list(data.z_columns)].to_numpy(dtype=np.float64)
            if data.z_columns
            else np.zeros((len(unseen_zips), 0))
        )
        notes.append(
            f"{len(unseen_zips)} zips predicted without sampled cells "
            "(zip error drawn from its posterior-width normal per draw)"
        )
        z_ext = np.vstack([data.design.z, z_unseen])
    else:
        z_ext = data.design.z
    all_zips = model_zips + unseen_zips
    zip_lookup = {z: i for i, z in enumerate(all_zips)}

    county_for_zip = None
    if "county" in grouping:
        if geo_frame is None or "county_fips" not in getattr(geo_frame, "columns", []):
            raise InputError("county grouping requires the geo table with county_fips")
        county_for_zip = dict(
            zip(geo_frame["zip"].astype(str), geo_frame["county_fips"].astype(str))
        )
        missing_county = [z for z in ps_zips if z not in county_for_zip]
        if missing_county:
            raise InputError(f"no county assignment for zips {missing_county[:10]}")

    # prediction cells: population rows crossed with every model week
    n_weeks = data.n_weeks
    base = ps[["sex", "age_group", "race", "zip", "population_count"]].reset_index(drop=True)
    reps = len(base)
    cells = base.loc[base.index.repeat(n_weeks)].reset_index(drop=True)
    cells["week_index"] = np.tile(np.arange(n_weeks), reps)

    age_lookup = {lvl: i for i, lvl in enumerate(data.age_levels)}
    race_lookup = {lvl: i for i, lvl in enumerate(data.race_levels)}
    male = (cells["sex"] == "male").to_numpy(dtype=np.float64)
    age_idx = cells["age_group"].map(age_lookup).to_numpy(dtype=np.int64)
    race_idx = cells["race"].map(race_lookup).to_numpy(dtype=np.int64)
    zip_idx = cells["zip"].map(zip_lookup).to_numpy(dtype=np.int64)
    time_idx = cells["week_index"].to_numpy(dtype=np.int64)
    weight = cells["population_count"].to_numpy(dtype=np.float64)
    if np.any(weight < 0):
        raise InputError("negative population counts")

    # group ids
    if grouping:
        key_frame = pd.DataFrame(index=cells.index)
        for g in grouping:
            if g == "county":
                key_frame["county_fips"] = cells["zip"].map(county_for_zip)
            else:
                key_frame[_KEY_COLUMNS[g]] = cells[_KEY_COLUMNS[g]]
        group_keys, group_ids = np.unique(
            key_frame.astype(str).agg("\x1f".join, axis=1).to_numpy(), return_inverse=True
        )
        key_rows = [dict(zip(key_frame.columns, k.split("\x1f"))) for k in group_keys]
    else:
        group_ids = np.zeros(len(cells), dtype=np.int64)
        key_rows = [{}]
    n_groups = len(key_rows)

    order = np.argsort(group_ids, kind="stable")
    group_ids_sorted = group_ids[order]
    boundaries = np.searchsorted(group_ids_sorted, np.arange(n_groups))
    w_sorted = weight[order]
    totals = np.add.reduceat(w_sorted, boundaries) if len(w_sorted) else np.zeros(n_groups)

    male_s, age_s, race_s = male[order], age_idx[order], race_idx[order]
    zip_s, time_s = zip_idx[order], time_idx[order]

    # per-draw evaluation, chunked
    layout = data.layout
    spec = data.spec
    flat = draws.flat()
    n_draws = flat.shape[0]

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 404]))
    e_unseen = (
        rng.standard_normal((n_draws, len(unseen_zips))) if unseen_zips else None
    )

    zvals_slope = {}
    for group, pred in spec.varying_slopes:
        zvals_slope[(group, pred)] = z_ext[zip_s, data.z_column(pred)]

    sums = np.empty((n_draws, n_groups))
    for start in range(0, n_draws, chunk):
        stop = min(start + chunk, n_draws)
        block = np.stack([unconstrain(row, layout) for row in flat[start:stop]])
        eta = np.repeat(
            block[:, layout.block("intercept").start][:, None], len(male_s), axis=1
        )
        if layout.has("male"):
            eta += block[:, layout.block("male").start][:, None] * male_s[None, :]
        if layout.has("geo_coef"):
            alpha = block[:, layout.sl("geo_coef")]
            eta += (alpha @ z_ext.T)[:, zip_s]
        for group in GROUP_ORDER:
            name = f"raw_{group}"
            if not layout.has(name):
                continue
            sigma = np.exp(block[:, layout.block(f"log_sigma_{group}").start])
            raw = block[:, layout.sl(name)]
            if group == "zip" and unseen_zips:
                effect = np.hstack(
                    [sigma[:, None] * raw, sigma[:, None] * e_unseen[start:stop]]
                )
                eta += effect[:, zip_s]
            else:
                idx = {"age": age_s, "race": race_s, "time": time_s, "zip": zip_s}[group]
                eta += (sigma[:, None] * raw)[:, idx]
        for group, pred in spec.varying_slopes:
            coefs = block[:, layout.sl(f"slope_{group}_{pred}")]
            idx = {"age": age_s, "race": race_s, "time": time_s, "zip": zip_s}[group]
            eta += coefs[:, idx] * zvals_slope[(group, pred)][None, :]
        pi = expit(eta)
        sums[start:stop] = np.add.reduceat(pi * w_sorted[None, :], boundaries, axis=1)

    keep = totals > 0
    if not np.all(keep):
        dropped = [key_rows[i] for i in np.flatnonzero(~keep)]
        notes.append(f"{len(dropped)} groups omitted (zero population): {dropped[:5]}")
    est = sums[:, keep] / totals[None, keep]

    rows = []
    for col_idx, key in enumerate(k for i, k in enumerate(key_rows) if keep[i]):
        values = est[:, col_idx]
        q_lo, q_hi = np.quantile(values, [0.025, 0.975])
        row = dict(key)
        row.update(
            {
                "mean": float(values.mean()),
                "sd": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                "l-95%": float(q_lo),
                "u-95%": float(q_hi),
            }
        )
        rows.append(row)
    frame = pd.DataFrame(rows)
    key_cols = [c for c in frame.columns if c not in STAT_COLUMNS]
    if "week_index" in key_cols:
        frame["week_index"] = frame["week_index"].astype(int)
    order_index = np.arange(len(frame))
    if key_cols:
        frame = frame.sort_values(key_cols, kind="stable")
        order_index = frame.index.to_numpy()
        frame = frame.reset_index(drop=True)

    series = EstimateSeries(frame=frame, grouping=grouping, notes=notes)
    if keep_draws:
        series.draw_estimates = est[:, order_index]
    return series


def week_label(week_index: int, week_origin) -> str:
    from datetime import timedelta

    return (week_origin + timedelta(weeks=int(week_index))).isoformat()


def export_estimates(
    series: EstimateSeries,
    fmt: str = "delimited",
    path: str | Path | None = None,
    week_origin=None,
) -> str:
    """Serialize an EstimateSeries; stable column order, ISO week labels."""
    if series.frame.empty:
        raise InputError("empty estimate series")
    frame = series.frame.copy()
    key_cols = [c for c in frame.columns if c not in STAT_COLUMNS]
    if "week_index" in frame.columns and week_origin is not None:
        frame["week_label"] = [week_label(w, week_origin) for w in frame["week_index"]]
        ordered = key_cols + ["week_label"] + STAT_COLUMNS
    else:
        ordered = key_cols + STAT_COLUMNS
    frame = frame[[c for c in ordered if c in frame.columns]]

    if fmt == "delimited":
        text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    elif fmt == "json":
        payload = {
            "grouping": list(series.grouping) if series.grouping else ["overall"],
            "notes": series.notes,
            "rows": json.loads(
                frame.to_json(orient="records", double_precision=15)
            ),
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise InputError(f"unknown export format {fmt!r}")
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text
