import numpy as np
import pandas as pd
import pytest

from mrpkit.errors import InputError
from mrpkit.model.compile import compile_spec
from mrpkit.model.spec import ModelSpec, model_a, model_b, model_c
from mrpkit.synthetic import simulate_dataset, synth_geo

from conftest import tiny_cells

SEVEN_PREDICTORS = (
    "urbanicity",
    "college",
    "employment",
    "income",
    "poverty",
    "adi",
    "density",
)


def seven_predictor_fixture():
    spec = model_a(fixed_effects=("male",) + SEVEN_PREDICTORS)
    return simulate_dataset(spec, n_zips=10, n_weeks=20, mean_tests=12.0, seed=6)


def test_intercept_only_single_cell():
    cells = tiny_cells(n_zips=1, n_weeks=1)
    spec = ModelSpec(
        label="intercept",
        fixed_effects=(),
        varying_intercepts=(),
        zip_regression=False,
        sensitivity=1.0,
        specificity=1.0,
    )
    geo = pd.DataFrame({"zip": sorted(cells["zip"].unique())})
    data = compile_spec(spec, cells, geo)
    assert data.layout.size == 1


def test_model_a_layout_length_hand_counted():
    # 1 intercept + 1 male + 7 zip predictors + 6 age + 3 race + 20 time
    # + 10 zip errors + 4 hyperparameter scales
    sim = seven_predictor_fixture()
    assert len(sim.data.age_levels) == 6
    assert len(sim.data.race_levels) == 3
    assert len(sim.data.zip_levels) == 10
    assert sim.data.n_weeks == 20
    assert sim.data.layout.size == 1 + 1 + 7 + 6 + 3 + 20 + 10 + 4 == 52


def test_model_c_drops_zip_errors_and_scale():
    spec_c = model_c(fixed_effects=("male",) + SEVEN_PREDICTORS)
    sim = simulate_dataset(spec_c, n_zips=10, n_weeks=20, mean_tests=12.0, seed=6)
    assert sim.data.layout.size == 52 - 10 - 1


def test_model_b_adds_race_slopes():
    a = simulate_dataset(model_a(), n_zips=6, n_weeks=8, seed=2)
    b = simulate_dataset(model_b(), n_zips=6, n_weeks=8, seed=2)
    assert b.data.layout.size == a.data.layout.size + 3  # one slope per race


def test_layout_manifest_records_order(tmp_path):
    sim = simulate_dataset(model_a(), n_zips=3, n_weeks=4, seed=5)
    manifest = sim.data.layout.manifest()
    assert manifest["size"] == sim.data.layout.size
    assert [b["name"] for b in manifest["blocks"]][:3] == ["intercept", "male", "geo_coef"]
    assert len(manifest["names"]) == manifest["size"]
    assert "log_sigma_zip" in manifest["names"]
    assert "sigma_zip" in manifest["constrained_names"]
    path = tmp_path / "layout.json"
    sim.data.layout.write_manifest(path)
    assert path.exists()


def test_levels_are_lexicographic():
    sim = simulate_dataset(model_a(), n_zips=4, n_weeks=3, seed=8)
    assert list(sim.data.race_levels) == sorted(sim.data.race_levels)
    assert list(sim.data.age_levels) == sorted(sim.data.age_levels)
    assert list(sim.data.zip_levels) == sorted(sim.data.zip_levels)


def test_unknown_zip_in_cells_rejected():
    cells = tiny_cells()
    geo = pd.DataFrame({"zip": ["49000"]})  # missing the second zip
    spec = ModelSpec(fixed_effects=(), varying_intercepts=("age",))
    with pytest.raises(InputError, match="missing from the predictor table"):
        compile_spec(spec, cells, geo)


def test_unknown_sex_rejected():
    cells = tiny_cells()
    cells.loc[0, "sex"] = "unknown"
    geo = synth_geo(sorted(cells["zip"].unique()), (), np.random.default_rng(0))
    spec = ModelSpec(fixed_effects=(), varying_intercepts=("age",))
    with pytest.raises(InputError, match="unknown sex"):
        compile_spec(spec, cells, geo)


def test_counts_validated():
    cells = tiny_cells()
    cells.loc[0, "n_positive"] = cells.loc[0, "n_tests"] + 1
    geo = synth_geo(sorted(cells["zip"].unique()), (), np.random.default_rng(0))
    spec = ModelSpec(fixed_effects=(), varying_intercepts=("age",))
    with pytest.raises(InputError, match="n_positive exceeds"):
        compile_spec(spec, cells, geo)


def test_drop_cell_keeps_levels():
    sim = simulate_dataset(model_a(), n_zips=3, n_weeks=4, seed=5)
    dropped = sim.data.drop_cell(0)
    assert dropped.n_cells == sim.data.n_cells - 1
    assert dropped.zip_levels == sim.data.zip_levels
    assert dropped.layout.size == sim.data.layout.size
