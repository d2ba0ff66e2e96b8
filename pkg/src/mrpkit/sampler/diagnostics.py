"""Convergence diagnostics: rank-normalized split R-hat and bulk/tail ESS.

Input convention: a 2-d array of draws for one parameter, chains on axis 0.
Degenerate input (no within-chain variance anywhere) yields NaN plus a
warning rather than an exception, so summaries over partially degenerate
parameter sets still complete.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

#: reporting tolerance on the ESS upper bound: ESS is capped at (1 + this) x draws
ESS_TOLERANCE = 0.25


def split_chains(x: np.ndarray) -> np.ndarray:
    """Halve each chain, doubling the chain count; odd trailing draw dropped."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    half = x.shape[1] // 2
    return np.vstack([x[:, :half], x[:, half : 2 * half]])


def rank_normalize(x: np.ndarray) -> np.ndarray:
    """Map pooled draws to normal scores via fractional ranks (ties averaged)."""
    shape = x.shape
    ranks = rankdata(x, method="average").reshape(shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def _is_degenerate(chains: np.ndarray) -> bool:
    return bool(np.all(np.ptp(chains, axis=1) == 0.0))


def _rhat_basic(chains: np.ndarray) -> float:
    m, n = chains.shape
    chain_means = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean()
    between = n * np.var(chain_means, ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def split_rhat(x: np.ndarray) -> float:
    """Rank-normalized split R-hat: max of the bulk and folded statistics.

    >= 1 - 1e-9 for non-degenerate draws; NaN (with a warning) when every
    split half-chain is constant.
    """
    chains = split_chains(x)
    if chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError("split_rhat needs >= 2 half-chains of length >= 4")
    if _is_degenerate(chains):
        warnings.warn("split_rhat: degenerate draws (zero within-chain variance)")
        return float("nan")
    bulk = _rhat_basic(rank_normalize(chains))
    folded = _rhat_basic(rank_normalize(np.abs(chains - np.median(chains))))
    return max(bulk, folded)


def _autocovariance(chains: np.ndarray) -> np.ndarray:
    """Biased per-chain autocovariance via FFT, shape preserved."""
    m, n = chains.shape
    centered = chains - chains.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n].real
    return acov / n


def _ess_core(chains: np.ndarray) -> float:
    """Geyer initial-monotone-sequence ESS on (already transformed) split chains."""
    m, n = chains.shape
    acov = _autocovariance(chains)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = float(np.mean(chain_var))
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += float(np.var(chains.mean(axis=1), ddof=1))
    if var_plus == 0.0:
        return float("nan")

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, 1]))) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 4 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(np.mean(acov[:, t + 1]))) / var_plus
        rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, t + 2]))) / var_plus
        if (rho_even + rho_odd) >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho[max_t + 1] = rho_even
    # enforce monotone decreasing pair sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2

    total = m * n
    tau = -1.0 + 2.0 * float(np.sum(rho[: max_t + 1])) + float(rho[max_t + 1])
    tau = max(tau, 1.0 / (1.0 + ESS_TOLERANCE))
    return total / tau


def ess(x: np.ndarray, kind: str = "bulk") -> float:
    """Effective sample size on rank-normalized draws (bulk) or tail indicators."""
    chains = split_chains(x)
    if chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError("ess needs >= 2 half-chains of length >= 4")
    if _is_degenerate(chains):
        warnings.warn(f"ess ({kind}): degenerate draws (zero within-chain variance)")
        return float("nan")
    if kind == "bulk":
        return _ess_core(rank_normalize(chains))
    if kind == "tail":
        q05, q95 = np.quantile(chains, [0.05, 0.95])
        parts = []
        for q in (q05, q95):
            indicator = (chains <= q).astype(np.float64)
            if np.all(indicator == indicator.flat[0]):
                parts.append(float("nan"))
            else:
                parts.append(_ess_core(indicator))
        if np.all(np.isnan(parts)):
            warnings.warn("ess (tail): degenerate tail indicators")
            return float("nan")
        return float(np.nanmin(parts))
    raise ValueError(f"unknown ess kind {kind!r}; expected 'bulk' or 'tail'")


def mcse_mean(x: np.ndarray) -> float:
    """Monte Carlo standard error of the posterior mean via bulk ESS."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_eff = ess(x, kind="bulk")
    if np.isnan(n_eff):
        return float("nan")
    return float(np.std(x, ddof=1) / np.sqrt(n_eff))
