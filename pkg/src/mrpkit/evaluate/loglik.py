"""Pointwise log-likelihood matrix for model comparison.

Unlike the sampler's objective, these values include the binomial
normalizing constants so that expected log predictive densities are
comparable across models.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from mrpkit.errors import InputError
from mrpkit.model.compile import ModelData
from mrpkit.model.posterior import adjust_positivity, cell_incidence, unconstrain
from mrpkit.model.spec import ModelSpec
from mrpkit.sampler.run import DrawsMatrix

_P_EPS = 1e-12


def binom_logpmf(y: np.ndarray, n: np.ndarray, p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _P_EPS, 1.0 - _P_EPS)
    coef = gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
    return coef + y * np.log(p) + (n - y) * np.log1p(-p)


def pointwise_loglik(
    draws: DrawsMatrix, data: ModelData, spec: ModelSpec | None = None
) -> np.ndarray:
    """(draws, cells) matrix over cells with at least one test."""
    spec = spec if spec is not None else data.spec
    if draws.n_params != data.layout.size:
        raise InputError(
            f"draws have {draws.n_params} parameters but the model layout has {data.layout.size}"
        )
    mask = data.n > 0
    n = data.n[mask]
    y = data.y[mask]
    flat = draws.flat()
    out = np.empty((flat.shape[0], int(mask.sum())))
    for d in range(flat.shape[0]):
        params = unconstrain(flat[d], data.layout)
        pi = cell_incidence(params, data)[mask]
        p = adjust_positivity(pi, spec.sensitivity, spec.specificity)
        out[d] = binom_logpmf(y, n, p)
    if not np.all(np.isfinite(out)):
        raise InputError("non-finite pointwise log-likelihood entries")
    return out
