"""LOO machinery: pointwise log-lik, PSIS smoothing, exact-refit oracle, comparisons."""

import math

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import binom

from mrpkit.errors import InputError
from mrpkit.evaluate.loglik import binom_logpmf, pointwise_loglik
from mrpkit.evaluate.loo import (
    LooResult,
    elpd_diff,
    fit_generalized_pareto,
    loo_compare,
    pareto_smooth,
    psis_loo,
)
from mrpkit.model.posterior import adjust_positivity, cell_incidence, log_posterior, unconstrain
from mrpkit.model.spec import model_a
from mrpkit.sampler.run import DrawsMatrix, SamplerConfig, run_nuts
from mrpkit.synthetic import simulate_dataset


@pytest.fixture(scope="module")
def fitted_small():
    sim = simulate_dataset(model_a(), n_zips=3, n_weeks=4, mean_tests=8.0, seed=29)
    cfg = SamplerConfig(chains=2, warmup_iters=200, sampling_iters=200, seed=12)
    draws = run_nuts(sim.data, cfg=cfg)
    return sim, draws


def test_binom_logpmf_matches_scipy():
    rng = np.random.default_rng(0)
    n = rng.integers(1, 50, size=100).astype(float)
    y = (rng.random(100) * (n + 1)).astype(int).astype(float)
    p = rng.uniform(0.01, 0.99, size=100)
    ours = binom_logpmf(y, n, p)
    ref = binom.logpmf(y, n, p)
    assert np.allclose(ours, ref, atol=1e-10)


def test_pointwise_symmetric_case(fitted_small):
    """With a perfect test, pi = 0.5 and n = 1, the log-pmf is log 0.5 regardless of y."""
    assert binom_logpmf(np.array([0.0]), np.array([1.0]), np.array([0.5]))[0] == pytest.approx(
        math.log(0.5)
    )
    assert binom_logpmf(np.array([1.0]), np.array([1.0]), np.array([0.5]))[0] == pytest.approx(
        math.log(0.5)
    )


def test_pointwise_single_draw_hand_computation(fitted_small):
    sim, draws = fitted_small
    ll = pointwise_loglik(draws, sim.data)
    d = 17
    params = unconstrain(draws.flat()[d], sim.data.layout)
    pi = cell_incidence(params, sim.data)
    p = adjust_positivity(pi, sim.data.spec.sensitivity, sim.data.spec.specificity)
    expected = binom.logpmf(sim.data.y, sim.data.n, p)
    assert np.allclose(ll[d], expected, atol=1e-10)


def test_pointwise_rows_match_log_posterior_likelihood_part(fitted_small):
    """Row sums equal the log-posterior likelihood plus the dropped constants."""
    sim, draws = fitted_small
    data = sim.data
    ll = pointwise_loglik(draws, data)
    from scipy.special import gammaln

    constants = float(
        np.sum(gammaln(data.n + 1) - gammaln(data.y + 1) - gammaln(data.n - data.y + 1))
    )
    for d in (0, 44):
        params = unconstrain(draws.flat()[d], data.layout)
        lp = log_posterior(params, data)
        prior_only = lp - _likelihood_part(params, data)
        assert ll[d].sum() == pytest.approx(_likelihood_part(params, data) + constants, abs=1e-8)
        assert lp == pytest.approx(prior_only + ll[d].sum() - constants, abs=1e-8)


def _likelihood_part(params, data):
    pi = cell_incidence(params, data)
    p = np.clip(
        adjust_positivity(pi, data.spec.sensitivity, data.spec.specificity), 1e-12, 1 - 1e-12
    )
    return float(np.sum(data.y * np.log(p) + (data.n - data.y) * np.log1p(-p)))


def test_dimension_mismatch_fatal(fitted_small):
    sim, draws = fitted_small
    other = simulate_dataset(model_a(), n_zips=4, n_weeks=4, seed=1)
    with pytest.raises(InputError, match="parameters"):
        pointwise_loglik(draws, other.data)


# ---------------------------------------------------------------------------
# PSIS


def test_degenerate_posterior_identical_draws():
    """All draws identical: elpd is the plain log-likelihood sum, weights equal."""
    ll = np.tile(np.array([-1.3, -0.2, -2.4]), (400, 1))
    result = psis_loo(ll)
    assert result.elpd_loo == pytest.approx(ll[0].sum(), abs=1e-12)
    assert np.allclose(result.pointwise, ll[0], atol=1e-12)
    assert not result.warnings


def test_psis_requires_draws():
    with pytest.raises(InputError, match="at least 100"):
        psis_loo(np.zeros((50, 3)))


def test_heavy_tail_triggers_k_warning():
    rng = np.random.default_rng(4)
    s = 2000
    # ll = log(1 - u) makes the importance ratio 1/(1-u) ~ Pareto(1), i.e. k near 1
    heavy = np.log1p(-rng.random(s))
    mild = rng.normal(-1.0, 0.05, size=(s, 2))
    ll = np.column_stack([heavy, mild])
    result = psis_loo(ll, cell_ids=["bad", "ok1", "ok2"])
    assert result.pareto_k[0] > 0.7
    assert result.warnings and "bad" in result.warnings[0]


def test_pareto_fit_recovers_shape():
    rng = np.random.default_rng(9)
    k_true, sigma_true = 0.4, 2.0
    u = rng.random(4000)
    x = sigma_true / k_true * ((1 - u) ** (-k_true) - 1)
    k_hat, sigma_hat = fit_generalized_pareto(x)
    assert k_hat == pytest.approx(k_true, abs=0.1)
    assert sigma_hat == pytest.approx(sigma_true, rel=0.15)


def test_pareto_smooth_caps_at_max():
    rng = np.random.default_rng(2)
    w = rng.exponential(size=500)
    smoothed, k = pareto_smooth(w)
    assert smoothed.max() <= w.max() + 1e-12
    assert len(smoothed) == len(w)
    assert np.isfinite(k)


def test_psis_not_above_in_sample_lpd(fitted_small):
    sim, draws = fitted_small
    ll = pointwise_loglik(draws, sim.data)
    result = psis_loo(ll)
    in_sample = float(np.sum(logsumexp(ll, axis=0) - np.log(ll.shape[0])))
    assert result.elpd_loo <= in_sample + 1e-9


# ---------------------------------------------------------------------------
# comparison


def make_result(pointwise, label):
    pw = np.asarray(pointwise, dtype=float)
    return LooResult(
        elpd_loo=float(pw.sum()),
        se_elpd=float(np.sqrt(len(pw) * np.var(pw, ddof=1))),
        pointwise=pw,
        pareto_k=np.zeros(len(pw)),
        label=label,
    )


def test_single_model_comparison():
    comp = loo_compare([make_result([-1, -2, -3], "only")])
    assert list(comp.table.columns) == ["elpd_diff", "se_diff"]
    assert comp.table.iloc[0]["elpd_diff"] == 0.0
    assert comp.table.iloc[0]["se_diff"] == 0.0


def test_best_row_zero_and_others_negative():
    a = make_result([-1.0, -1.1, -0.9, -1.0], "A")
    c = make_result([-1.4, -1.6, -1.2, -1.3], "C")
    comp = loo_compare([c, a])
    assert list(comp.table.index) == ["A", "C"]
    assert comp.table.loc["A", "elpd_diff"] == 0.0
    assert comp.table.loc["A", "se_diff"] == 0.0
    assert comp.table.loc["C", "elpd_diff"] < 0
    assert comp.table.loc["C", "se_diff"] > 0
    assert comp.covers_zero["A"]


def test_duplicate_result_diff_zero():
    a = make_result([-1.0, -2.0, -1.5], "A")
    b = make_result([-1.0, -2.0, -1.5], "B")
    comp = loo_compare([a, b])
    assert abs(comp.table.iloc[1]["elpd_diff"]) < 1e-12
    assert comp.table.iloc[1]["se_diff"] == 0.0


def test_elpd_diff_antisymmetric():
    a = make_result([-1.0, -2.0, -0.5], "A")
    b = make_result([-1.2, -1.8, -0.9], "B")
    dab, se_ab = elpd_diff(a, b)
    dba, se_ba = elpd_diff(b, a)
    assert dab == -dba
    assert se_ab == se_ba


def test_mismatched_cells_fatal():
    a = make_result([-1.0, -2.0], "A")
    b = make_result([-1.0, -2.0, -3.0], "B")
    with pytest.raises(InputError, match="mismatched cell sets"):
        loo_compare([a, b])
    a2 = make_result([-1.0, -2.0], "A")
    a2.cell_ids = ["c1", "c2"]
    b2 = make_result([-1.0, -2.0], "B")
    b2.cell_ids = ["c1", "c3"]
    with pytest.raises(InputError, match="identities"):
        elpd_diff(a2, b2)
