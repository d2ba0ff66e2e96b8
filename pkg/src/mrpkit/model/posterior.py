"""Differentiable log-posterior for the binomial incidence models.

The model, per cell j:

    y*_j ~ Binomial(n_j, p_j)
    p_j  = (1 - specificity) * (1 - pi_j) + sensitivity * pi_j
    logit(pi_j) = b1 + b2 * male_j + (Z a)_{s[j]}
                  + sum_g sigma_g * u_{g, g[j]}  (non-centered varying intercepts)
                  + sum_slopes c_{group[j]} * z_pred_{s[j]}

Priors: normal(0, 5) on the intercept, normal(0, 2.5) on fixed effects and
varying slopes, standard normal on the raw (non-centered) varying intercepts,
half-normal on each group scale (2.5 for age/race/zip, 5 for time).
Hyperparameters are carried on the log scale, with the change-of-variables
Jacobian included, so the whole parameter vector is unconstrained.

Binomial normalizing constants are dropped here (they do not depend on the
parameters); the pointwise log-likelihood used for model comparison adds them
back.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from mrpkit.model.compile import GROUP_ORDER, CellDesign, ModelData
from mrpkit.model.spec import ModelSpec

_LOG_2PI = float(np.log(2.0 * np.pi))
#: clamp applied to probabilities only inside log terms
_P_EPS = 1e-12
#: log-scale hyperparameters are exponentiated through this clip so transient
#: warmup excursions stay finite; the half-normal prior's restoring gradient
#: is astronomically strong long before the bound binds
_LOG_SIGMA_CLIP = 60.0


def _sigma_of(w: float) -> float:
    return float(np.exp(np.clip(w, -_LOG_SIGMA_CLIP, _LOG_SIGMA_CLIP)))


def inv_logit(x: np.ndarray) -> np.ndarray:
    """Numerically saturating inverse logit."""
    return expit(x)


def adjust_positivity(pi, sensitivity: float, specificity: float):
    """Map latent incidence to observed test positivity.

    Affine and strictly increasing in pi whenever sensitivity > 1 - specificity.
    """
    return (1.0 - specificity) * (1.0 - np.asarray(pi)) + sensitivity * np.asarray(pi)


def _check_finite(params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite parameter vector")
    return params


def linear_predictor(
    params: np.ndarray, data: ModelData, design: CellDesign | None = None
) -> np.ndarray:
    """Cellwise linear predictor eta_j for an unconstrained parameter vector."""
    design = design if design is not None else data.design
    layout = data.layout
    spec = data.spec

    eta = np.full(design.n_cells, params[layout.block("intercept").start], dtype=np.float64)
    if layout.has("male"):
        eta += params[layout.block("male").start] * design.male
    if layout.has("geo_coef"):
        alpha = params[layout.sl("geo_coef")]
        eta += (design.z @ alpha)[design.zip_idx]
    for group in GROUP_ORDER:
        name = f"raw_{group}"
        if layout.has(name):
            sigma = _sigma_of(params[layout.block(f"log_sigma_{group}").start])
            eta += sigma * params[layout.sl(name)][design.group_index(group)]
    for group, pred in spec.varying_slopes:
        coefs = params[layout.sl(f"slope_{group}_{pred}")]
        zvals = design.z[design.zip_idx, data.z_column(pred)]
        eta += coefs[design.group_index(group)] * zvals
    return eta


def cell_incidence(
    params: np.ndarray, data: ModelData, design: CellDesign | None = None
) -> np.ndarray:
    """Latent incidence pi_j in (0, 1) for every cell of the design."""
    params = _check_finite(params)
    return inv_logit(linear_predictor(params, data, design))


def _positivity(pi: np.ndarray, spec: ModelSpec) -> np.ndarray:
    return adjust_positivity(pi, spec.sensitivity, spec.specificity)


def log_posterior(params: np.ndarray, data: ModelData, spec: ModelSpec | None = None) -> float:
    """Joint log density (binomial coefficients dropped), never -inf."""
    params = _check_finite(params)
    spec = spec if spec is not None else data.spec
    layout = data.layout

    pi = inv_logit(linear_predictor(params, data))
    p = np.clip(_positivity(pi, spec), _P_EPS, 1.0 - _P_EPS)
    total = float(np.sum(data.y * np.log(p) + (data.n - data.y) * np.log1p(-p)))

    b1 = params[layout.block("intercept").start]
    s_int = spec.prior_scale("intercept")
    total += -0.5 * (b1 / s_int) ** 2 - np.log(s_int) - 0.5 * _LOG_2PI

    s_fix = spec.prior_scale("fixed")
    if layout.has("male"):
        b2 = params[layout.block("male").start]
        total += -0.5 * (b2 / s_fix) ** 2 - np.log(s_fix) - 0.5 * _LOG_2PI
    if layout.has("geo_coef"):
        alpha = params[layout.sl("geo_coef")]
        total += float(
            np.sum(-0.5 * (alpha / s_fix) ** 2 - np.log(s_fix) - 0.5 * _LOG_2PI)
        )

    s_slope = spec.prior_scale("slope")
    for group, pred in spec.varying_slopes:
        c = params[layout.sl(f"slope_{group}_{pred}")]
        total += float(np.sum(-0.5 * (c / s_slope) ** 2 - np.log(s_slope) - 0.5 * _LOG_2PI))

    for group in GROUP_ORDER:
        name = f"raw_{group}"
        if not layout.has(name):
            continue
        raw = params[layout.sl(name)]
        total += float(np.sum(-0.5 * raw**2 - 0.5 * _LOG_2PI))
        w = params[layout.block(f"log_sigma_{group}").start]
        sigma = _sigma_of(w)
        s_g = spec.prior_scale(f"sigma_{group}")
        # half-normal on sigma plus the log|d sigma / d w| = w Jacobian
        total += (
            0.5 * np.log(2.0 / np.pi)
            - np.log(s_g)
            - 0.5 * (sigma / s_g) ** 2
            + w
        )
    return total


def grad_log_posterior(
    params: np.ndarray, data: ModelData, spec: ModelSpec | None = None
) -> np.ndarray:
    """Analytic gradient of log_posterior with respect to the unconstrained vector."""
    params = _check_finite(params)
    spec = spec if spec is not None else data.spec
    layout = data.layout
    design = data.design
    grad = np.zeros_like(params)

    eta = linear_predictor(params, data)
    pi = inv_logit(eta)
    p = np.clip(_positivity(pi, spec), _P_EPS, 1.0 - _P_EPS)
    slope = spec.sensitivity + spec.specificity - 1.0
    # d loglik / d eta_j, chain rule through the positivity map and inverse logit
    dl_deta = (data.y / p - (data.n - data.y) / (1.0 - p)) * slope * pi * (1.0 - pi)

    b = layout.block("intercept")
    grad[b.start] = np.sum(dl_deta) - params[b.start] / spec.prior_scale("intercept") ** 2

    s_fix2 = spec.prior_scale("fixed") ** 2
    if layout.has("male"):
        b = layout.block("male")
        grad[b.start] = np.sum(dl_deta * design.male) - params[b.start] / s_fix2

    n_zips = design.z.shape[0]
    if layout.has("geo_coef"):
        per_zip = np.bincount(design.zip_idx, weights=dl_deta, minlength=n_zips)
        sl = layout.sl("geo_coef")
        grad[sl] = design.z.T @ per_zip - params[sl] / s_fix2

    for group in GROUP_ORDER:
        name = f"raw_{group}"
        if not layout.has(name):
            continue
        sl = layout.sl(name)
        raw = params[sl]
        wb = layout.block(f"log_sigma_{group}")
        sigma = _sigma_of(params[wb.start])
        idx = design.group_index(group)
        per_level = np.bincount(idx, weights=dl_deta, minlength=sl.stop - sl.start)
        grad[sl] = sigma * per_level - raw
        s_g = spec.prior_scale(f"sigma_{group}")
        grad[wb.start] = sigma * float(raw @ per_level) - sigma**2 / s_g**2 + 1.0

    s_slope2 = spec.prior_scale("slope") ** 2
    for group, pred in spec.varying_slopes:
        sl = layout.sl(f"slope_{group}_{pred}")
        zvals = design.z[design.zip_idx, data.z_column(pred)]
        idx = design.group_index(group)
        per_level = np.bincount(idx, weights=dl_deta * zvals, minlength=sl.stop - sl.start)
        grad[sl] = per_level - params[sl] / s_slope2
    return grad


def log_posterior_and_grad(params: np.ndarray, data: ModelData) -> tuple[float, np.ndarray]:
    """Fused evaluation: one pass over the cells for both value and gradient.

    This is what the sampler calls in its inner loop; the separate
    log_posterior / grad_log_posterior entry points remain the reference
    implementations it is tested against.
    """
    params = _check_finite(params)
    spec = data.spec
    layout = data.layout
    design = data.design
    grad = np.zeros_like(params)

    eta = linear_predictor(params, data)
    pi = inv_logit(eta)
    p = np.clip(_positivity(pi, spec), _P_EPS, 1.0 - _P_EPS)
    total = float(np.sum(data.y * np.log(p) + (data.n - data.y) * np.log1p(-p)))
    slope = spec.sensitivity + spec.specificity - 1.0
    dl_deta = (data.y / p - (data.n - data.y) / (1.0 - p)) * slope * pi * (1.0 - pi)

    b = layout.block("intercept")
    s_int = spec.prior_scale("intercept")
    b1 = params[b.start]
    total += -0.5 * (b1 / s_int) ** 2 - np.log(s_int) - 0.5 * _LOG_2PI
    grad[b.start] = np.sum(dl_deta) - b1 / s_int**2

    s_fix = spec.prior_scale("fixed")
    if layout.has("male"):
        b = layout.block("male")
        b2 = params[b.start]
        total += -0.5 * (b2 / s_fix) ** 2 - np.log(s_fix) - 0.5 * _LOG_2PI
        grad[b.start] = np.sum(dl_deta * design.male) - b2 / s_fix**2

    n_zips = design.z.shape[0]
    if layout.has("geo_coef"):
        sl = layout.sl("geo_coef")
        alpha = params[sl]
        total += float(np.sum(-0.5 * (alpha / s_fix) ** 2 - np.log(s_fix) - 0.5 * _LOG_2PI))
        per_zip = np.bincount(design.zip_idx, weights=dl_deta, minlength=n_zips)
        grad[sl] = design.z.T @ per_zip - alpha / s_fix**2

    for group in GROUP_ORDER:
        name = f"raw_{group}"
        if not layout.has(name):
            continue
        sl = layout.sl(name)
        raw = params[sl]
        wb = layout.block(f"log_sigma_{group}")
        w = params[wb.start]
        sigma = _sigma_of(w)
        s_g = spec.prior_scale(f"sigma_{group}")
        total += float(np.sum(-0.5 * raw**2 - 0.5 * _LOG_2PI))
        total += 0.5 * np.log(2.0 / np.pi) - np.log(s_g) - 0.5 * (sigma / s_g) ** 2 + w
        idx = design.group_index(group)
        per_level = np.bincount(idx, weights=dl_deta, minlength=sl.stop - sl.start)
        grad[sl] = sigma * per_level - raw
        grad[wb.start] = sigma * float(raw @ per_level) - sigma**2 / s_g**2 + 1.0

    s_slope = spec.prior_scale("slope")
    for group, pred in spec.varying_slopes:
        sl = layout.sl(f"slope_{group}_{pred}")
        c = params[sl]
        total += float(np.sum(-0.5 * (c / s_slope) ** 2 - np.log(s_slope) - 0.5 * _LOG_2PI))
        zvals = design.z[design.zip_idx, data.z_column(pred)]
        idx = design.group_index(group)
        per_level = np.bincount(idx, weights=dl_deta * zvals, minlength=sl.stop - sl.start)
        grad[sl] = per_level - c / s_slope**2
    return total, grad


def constrain(params: np.ndarray, layout) -> np.ndarray:
    """Map the unconstrained vector to the reporting scale (sigmas positive)."""
    out = np.array(params, dtype=np.float64, copy=True)
    for b in layout.blocks:
        if b.name.startswith("log_sigma"):
            out[b.start : b.stop] = np.exp(out[b.start : b.stop])
    return out


def unconstrain(params: np.ndarray, layout) -> np.ndarray:
    """Inverse of constrain: log-transform the positive hyperparameters."""
    out = np.array(params, dtype=np.float64, copy=True)
    for b in layout.blocks:
        if b.name.startswith("log_sigma"):
            out[b.start : b.stop] = np.log(out[b.start : b.stop])
    return out
