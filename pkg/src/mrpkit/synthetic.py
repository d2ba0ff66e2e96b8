"""Synthetic data generation.

Two layers:

- simulate_dataset: cell-level data drawn from a known model truth, used by
  calibration, recovery, and model-comparison tests.
- make_input_bundle: a full raw-input fixture (records, population counts,
  tract measures, crosswalk, schema config) for pipeline and service tests
  and for the shipped example dataset. Real test records are confidential,
  so synthetic bundles are the replication path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from mrpkit.model.compile import GROUP_ORDER, ModelData, compile_spec
from mrpkit.model.posterior import adjust_positivity, cell_incidence
from mrpkit.model.spec import ModelSpec
from mrpkit.tables import write_table

DEFAULT_AGE_GROUPS = ("[0,18)", "[18,35)", "[35,50)", "[50,65)", "[65,75)", "[75,inf)")
RACES = ("Black", "Other", "White")
SEXES = ("female", "male")


def synth_geo(zips: list[str], predictors: tuple[str, ...], rng: np.random.Generator,
              county_for_zip: dict[str, str] | None = None) -> pd.DataFrame:
    """Standardized zip-level predictor table with a county assignment."""
    raw = rng.standard_normal((len(zips), len(predictors)))
    raw = (raw - raw.mean(axis=0)) / raw.std(axis=0, ddof=1)
    frame = pd.DataFrame(raw, columns=list(predictors))
    frame.insert(0, "zip", zips)
    if county_for_zip is None:
        county_for_zip = {z: f"26{(i // 3) + 1:03d}" for i, z in enumerate(zips)}
    frame.insert(1, "county_fips", [county_for_zip[z] for z in zips])
    return frame


@dataclass
class SimulatedDataset:
    cells: pd.DataFrame
    geo: pd.DataFrame
    data: ModelData
    truth: np.ndarray  # unconstrained parameter vector
    truth_by_name: dict[str, float]


def default_truth(data: ModelData, rng: np.random.Generator,
                  sigma_truth: dict[str, float] | None = None,
                  intercept: float = -3.0) -> np.ndarray:
    """Draw a moderate ground-truth parameter vector for the given layout."""
    sigma_truth = dict(sigma_truth or {})
    layout = data.layout
    truth = np.zeros(layout.size)
    truth[layout.block("intercept").start] = intercept + 0.3 * rng.standard_normal()
    if layout.has("male"):
        truth[layout.block("male").start] = 0.5 * rng.standard_normal()
    if layout.has("geo_coef"):
        sl = layout.sl("geo_coef")
        truth[sl] = 0.3 * rng.standard_normal(sl.stop - sl.start)
    defaults = {"age": 0.5, "race": 0.4, "time": 0.8, "zip": 0.5}
    for group in GROUP_ORDER:
        name = f"raw_{group}"
        if not layout.has(name):
            continue
        sl = layout.sl(name)
        truth[sl] = rng.standard_normal(sl.stop - sl.start)
        sigma = sigma_truth.get(group, defaults[group])
        truth[layout.block(f"log_sigma_{group}").start] = np.log(sigma)
    for group, pred in data.spec.varying_slopes:
        sl = layout.sl(f"slope_{group}_{pred}")
        truth[sl] = 0.3 * rng.standard_normal(sl.stop - sl.start)
    return truth


def simulate_dataset(
    spec: ModelSpec,
    n_zips: int = 10,
    n_weeks: int = 40,
    age_groups: tuple[str, ...] = DEFAULT_AGE_GROUPS,
    races: tuple[str, ...] = RACES,
    mean_tests: float = 20.0,
    cell_keep: float = 0.35,
    seed: int = 0,
    sigma_truth: dict[str, float] | None = None,
    intercept: float = -3.0,
    truth: np.ndarray | None = None,
) -> SimulatedDataset:
    """Cell table + geo table + counts drawn from a known parameter vector.

    A random subset of the full sex x age x race x zip x week cross is
    populated (cell_keep fraction), with Poisson test counts; empty cells are
    dropped, matching what aggregation of real records produces.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    zips = [f"49{i:03d}" for i in range(n_zips)]
    geo = synth_geo(zips, spec.geo_predictors, rng)

    full = pd.MultiIndex.from_product(
        [SEXES, age_groups, races, zips, range(n_weeks)],
        names=["sex", "age_group", "race", "zip", "week_index"],
    ).to_frame(index=False)
    keep = rng.random(len(full)) < cell_keep
    cells = full[keep].reset_index(drop=True)
    n = rng.poisson(mean_tests, size=len(cells))
    cells["n_tests"] = n
    cells = cells[cells["n_tests"] > 0].reset_index(drop=True)
    cells["n_positive"] = 0

    data = compile_spec(spec, cells, geo)
    if truth is None:
        truth = default_truth(data, rng, sigma_truth=sigma_truth, intercept=intercept)
    pi = cell_incidence(truth, data)
    p = adjust_positivity(pi, spec.sensitivity, spec.specificity)
    cells["n_positive"] = rng.binomial(cells["n_tests"].to_numpy(), p)

    data = compile_spec(spec, cells, geo)
    names = data.layout.names
    return SimulatedDataset(
        cells=cells,
        geo=geo,
        data=data,
        truth=truth,
        truth_by_name={names[i]: float(truth[i]) for i in range(len(names))},
    )


# ---------------------------------------------------------------------------
# Raw input bundle


def _age_group_of(age: int) -> str:
    edges = [18, 35, 50, 65, 75]
    labels = DEFAULT_AGE_GROUPS
    for edge, label in zip(edges, labels):
        if age < edge:
            return label
    return labels[-1]


def make_input_bundle(
    out_dir: str | Path,
    seed: int = 20220321,
    n_records: int = 6000,
    n_zips: int = 12,
    n_weeks: int = 16,
    start: date = date(2021, 11, 1),
    malformed_rate: float = 0.02,
    missing_rate: float = 0.04,
) -> dict[str, Path]:
    """Write a complete raw-input fixture and return the paths.

    The geography is a synthetic Michigan-like state "26" plus a sliver of
    out-of-state zips (state "39") small enough to be dropped by the 1% state
    filter, and one zip with five records to be dropped by the zip filter.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    main_zips = [f"48{i:03d}" for i in range(n_zips)]
    rare_zip = "48990"  # exactly five records: dropped by the zip pass
    foreign_zips = ["43001"]  # out-of-state sliver: dropped by the state pass
    all_zips = main_zips + [rare_zip] + foreign_zips

    counties = {}
    for i, z in enumerate(main_zips):
        counties[z] = f"26{(i // 3) + 1:03d}"
    counties[rare_zip] = f"26{(len(main_zips) // 3) + 1:03d}"
    counties[foreign_zips[0]] = "39001"

    # tracts: two per zip, populations and measures
    tract_rows = []
    crosswalk_rows = []
    for z in all_zips:
        county = counties[z]
        for k in range(2):
            tract = f"{county}{(int(z[-3:]) * 2 + k + 1):06d}"
            pop = int(rng.integers(800, 6000))
            tract_rows.append(
                {
                    "tract_id": tract,
                    "population": pop,
                    "urbanicity": float(rng.integers(0, 2)),
                    "college": float(np.round(rng.uniform(10, 70), 2)),
                    "poverty": float(np.round(rng.uniform(3, 35), 2)),
                    "employment": float(np.round(rng.uniform(75, 98), 2)),
                    "income": float(np.round(rng.uniform(30000, 110000), 0)),
                    "adi": float(np.round(rng.uniform(20, 95), 1)),
                }
            )
            crosswalk_rows.append(
                {"zip": z, "tract_id": tract, "residential_ratio": 0.55 if k == 0 else 0.45}
            )
    tracts = pd.DataFrame(tract_rows)
    crosswalk = pd.DataFrame(crosswalk_rows)

    # population counts per poststratification cell
    pop_rows = []
    for z in main_zips + [rare_zip]:
        base = rng.integers(400, 4000)
        for sex in SEXES:
            for ag in DEFAULT_AGE_GROUPS:
                for race in RACES:
                    share = {"White": 0.7, "Black": 0.2, "Other": 0.1}[race]
                    count = float(np.round(base * share * rng.uniform(0.5, 1.5), 1))
                    pop_rows.append(
                        {
                            "zip": z,
                            "sex": sex,
                            "age_group": ag,
                            "race": race,
                            "population_count": count,
                        }
                    )
    population = pd.DataFrame(pop_rows)

    # records with a weekly wave in positivity
    week_effect = 0.8 * np.sin(np.linspace(0.0, 3.0, n_weeks)) - 4.0
    # the out-of-state sliver must clear the zip pass (> 5 records) yet stay
    # under 1% of the remainder so the state pass drops it
    n_foreign = max(6, n_records // 200)
    n_main = n_records - 5 - n_foreign
    zip_choice = rng.choice(len(main_zips), size=n_main)
    rows = []
    for i in range(n_main):
        z = main_zips[int(zip_choice[i])]
        week = int(rng.integers(0, n_weeks))
        age = int(rng.integers(0, 95))
        sex = SEXES[int(rng.random() < 0.45)]
        race = RACES[int(rng.choice(3, p=[0.2, 0.1, 0.7]))]
        pi = 1.0 / (1.0 + np.exp(-(week_effect[week] + 0.2 * (race != "White"))))
        result = int(rng.random() < 0.7 * pi)  # sensitivity 0.7 baked into truth
        rows.append(
            {
                "test_id": f"T{i:06d}",
                "patient_sex": sex,
                "patient_race": race,
                "patient_age": age,
                "zip_code": z,
                "test_result": result,
                "collection_date": (start + timedelta(days=int(week * 7 + rng.integers(0, 7)))).isoformat(),
            }
        )
    for j, z in enumerate([rare_zip] * 5 + foreign_zips * n_foreign):
        rows.append(
            {
                "test_id": f"X{j:04d}",
                "patient_sex": SEXES[j % 2],
                "patient_race": "White",
                "patient_age": 40,
                "zip_code": z,
                "test_result": 0,
                "collection_date": (start + timedelta(days=7 * (j % n_weeks))).isoformat(),
            }
        )
    records = pd.DataFrame(rows)

    # blank out some demographics (imputable), then corrupt a slice of rows
    records = records.astype(
        {"patient_age": object, "test_result": object, "collection_date": object}
    )
    n_rows = len(records)
    for col in ("patient_sex", "patient_race", "patient_age"):
        blank = rng.random(n_rows) < missing_rate
        records.loc[blank, col] = ""
    bad = rng.random(n_rows) < malformed_rate
    bad_idx = np.flatnonzero(bad)
    for k, idx in enumerate(bad_idx):
        mode = k % 3
        if mode == 0:
            records.loc[idx, "zip_code"] = "482A1"
        elif mode == 1:
            records.loc[idx, "test_result"] = "indeterminate"
        else:
            records.loc[idx, "collection_date"] = "not-a-date"

    paths = {
        "records": write_table(records, out / "records.csv"),
        "population": write_table(population, out / "population.csv"),
        "tracts": write_table(tracts, out / "tracts.csv"),
        "crosswalk": write_table(crosswalk, out / "crosswalk.csv"),
    }

    config = {
        "columns": {
            "record_id": "test_id",
            "sex": "patient_sex",
            "race": "patient_race",
            "age": "patient_age",
            "zip": "zip_code",
            "result": "test_result",
            "result_date": "collection_date",
        },
        "sex_map": {"female": "female", "male": "male", "f": "female", "m": "male"},
        "race_map": {
            "white": "White",
            "black": "Black",
            "other": "Other",
            "asian": "Other",
            "multiracial": "Other",
        },
        "result_map": {"0": 0, "1": 1, "negative": 0, "positive": 1},
        "delimiter": ",",
        "date_format": "%Y-%m-%d",
    }
    config_path = out / "schema_config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    paths["config"] = config_path
    return paths
