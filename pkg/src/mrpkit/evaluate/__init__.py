from mrpkit.evaluate.loglik import pointwise_loglik
from mrpkit.evaluate.loo import LooComparison, LooResult, elpd_diff, exact_loo, loo_compare, psis_loo
from mrpkit.evaluate.ppc import ReplicateSet, ppc_replicates

__all__ = [
    "pointwise_loglik",
    "LooResult",
    "LooComparison",
    "psis_loo",
    "exact_loo",
    "loo_compare",
    "elpd_diff",
    "ppc_replicates",
    "ReplicateSet",
]
