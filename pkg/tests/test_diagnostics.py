"""Split R-hat and ESS behavior on constructed chains."""

import numpy as np
import pytest

from mrpkit.sampler.diagnostics import ess, rank_normalize, split_chains, split_rhat


def test_split_chains_shape():
    x = np.arange(20.0).reshape(2, 10)
    s = split_chains(x)
    assert s.shape == (4, 5)
    assert np.allclose(s[0], x[0, :5])
    assert np.allclose(s[2], x[0, 5:])


def test_rank_normalize_is_monotone_and_standardish():
    rng = np.random.default_rng(0)
    x = rng.exponential(size=(4, 500))
    z = rank_normalize(x)
    flat_x = x.reshape(-1)
    flat_z = z.reshape(-1)
    order = np.argsort(flat_x)
    assert np.all(np.diff(flat_z[order]) >= 0)
    assert abs(flat_z.mean()) < 0.01
    assert np.std(flat_z) == pytest.approx(1.0, abs=0.02)


def test_rhat_identical_constant_chains_flagged():
    x = np.full((4, 100), 3.14)
    with pytest.warns(UserWarning, match="degenerate"):
        assert np.isnan(split_rhat(x))


def test_rhat_iid_chains_near_one():
    rng = np.random.default_rng(42)
    x = rng.standard_normal((4, 1000))
    r = split_rhat(x)
    assert 1.0 - 1e-9 <= r < 1.01


def test_rhat_separated_chains_large():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 1000))
    x[1] += 5.0
    assert split_rhat(x) > 1.5


def test_rhat_catches_nonstationary_scale():
    """Folded statistic catches chains that agree in mean but not spread."""
    rng = np.random.default_rng(2)
    x = np.vstack(
        [rng.standard_normal(1000), 8.0 * rng.standard_normal(1000)]
    )
    assert split_rhat(x) > 1.2


def test_ess_iid_close_to_n():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((4, 1000))
    n = x.size
    for kind in ("bulk", "tail"):
        value = ess(x, kind)
        assert 0.8 * n <= value <= 1.2 * n


def test_ess_ar1_matches_analytic():
    phi = 0.9
    rng = np.random.default_rng(5)
    m, n = 4, 5000
    x = np.empty((m, n))
    for c in range(m):
        e = rng.standard_normal(n)
        x[c, 0] = e[0]
        for t in range(1, n):
            x[c, t] = phi * x[c, t - 1] + np.sqrt(1 - phi**2) * e[t]
    expected = m * n * (1 - phi) / (1 + phi)
    assert ess(x, "bulk") == pytest.approx(expected, rel=0.25)


def test_ess_constant_chain_flagged():
    x = np.zeros((4, 200))
    with pytest.warns(UserWarning, match="degenerate"):
        assert np.isnan(ess(x, "bulk"))


def test_ess_bounded_above():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((4, 2000))
    assert ess(x, "bulk") <= x.size * 1.25
    assert ess(x, "tail") <= x.size * 1.25


def test_short_input_rejected():
    with pytest.raises(ValueError, match="half-chains"):
        split_rhat(np.zeros((2, 6)))
    with pytest.raises(ValueError, match="half-chains"):
        ess(np.zeros((2, 6)))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown ess kind"):
        ess(np.random.default_rng(0).standard_normal((2, 100)), "typical")
