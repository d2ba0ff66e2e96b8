from mrpkit.model.spec import ModelSpec, model_a, model_b, model_c, validate_spec
from mrpkit.model.compile import ModelData, ParamLayout, compile_spec
from mrpkit.model.posterior import (
    adjust_positivity,
    cell_incidence,
    constrain,
    grad_log_posterior,
    inv_logit,
    log_posterior,
    unconstrain,
)

__all__ = [
    "ModelSpec",
    "model_a",
    "model_b",
    "model_c",
    "validate_spec",
    "ModelData",
    "ParamLayout",
    "compile_spec",
    "adjust_positivity",
    "cell_incidence",
    "constrain",
    "unconstrain",
    "inv_logit",
    "log_posterior",
    "grad_log_posterior",
]
