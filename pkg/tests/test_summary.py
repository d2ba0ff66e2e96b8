import numpy as np
import pytest

from mrpkit.model.spec import model_a
from mrpkit.sampler.run import DrawsMatrix, SamplerConfig, run_nuts, sample_target
from mrpkit.sampler.summary import SUMMARY_COLUMNS, display_label, summarize
from mrpkit.synthetic import simulate_dataset


def constant_draws(value, chains=2, iters=50):
    shape = (chains, iters, 1)
    return DrawsMatrix(
        draws=np.full(shape, value),
        param_names=["x"],
        divergent=np.zeros(shape[:2], dtype=bool),
        tree_depth=np.ones(shape[:2], dtype=np.int64),
        accept_stat=np.ones(shape[:2]),
        step_size=np.ones(shape[:2]),
        config=SamplerConfig(chains=chains, warmup_iters=1, sampling_iters=iters),
    )


def test_constant_draws_summary():
    with pytest.warns(UserWarning):
        table = summarize(constant_draws(2.5))
    row = table.loc["x"]
    assert row["Estimate"] == 2.5
    assert row["Est.Error"] == 0.0
    assert row["l-95%"] == 2.5
    assert row["u-95%"] == 2.5
    assert np.isnan(row["R-hat"])


def test_standard_normal_interval():
    cfg = SamplerConfig(chains=4, warmup_iters=400, sampling_iters=2500, seed=33)
    draws = sample_target(lambda q: (-0.5 * float(q @ q), -q), dim=1, cfg=cfg)
    table = summarize(draws)
    assert table.iloc[0]["l-95%"] == pytest.approx(-1.96, abs=0.08)
    assert table.iloc[0]["u-95%"] == pytest.approx(1.96, abs=0.08)


def test_column_set_exact():
    table = summarize(constant_draws(1.0))
    assert list(table.columns) == SUMMARY_COLUMNS


def test_model_summary_order_and_labels():
    sim = simulate_dataset(model_a(), n_zips=3, n_weeks=4, mean_tests=5.0, seed=19)
    cfg = SamplerConfig(chains=2, warmup_iters=150, sampling_iters=150, seed=5)
    draws = run_nuts(sim.data, cfg=cfg)
    table = summarize(draws)

    labels = list(table.index)
    assert labels[0] == "Intercept"
    assert labels[1] == "sex.male"
    assert labels[2:8] == ["urbanicity", "college", "employment", "income", "poverty", "ADI"]
    sigma_rows = [l for l in labels if "(intercept)" in l]
    assert sigma_rows == [
        "race (intercept)",
        "age (intercept)",
        "time (intercept)",
        "ZIP (intercept)",
    ]
    # sigma rows are on the positive scale
    assert (table.loc[sigma_rows, "Estimate"] > 0).all()
    # non-varying block comes before the sigma block
    assert labels.index("ADI") < labels.index("race (intercept)")


def test_display_labels():
    assert display_label("intercept") == "Intercept"
    assert display_label("male") == "sex.male"
    assert display_label("coef_adi") == "ADI"
    assert display_label("coef_college") == "college"
    assert display_label("sigma_zip") == "ZIP (intercept)"
    assert display_label("slope_race_college[White]") == "race:college[White]"
