"""Multilevel regression and poststratification engine for test-based surveillance."""

__version__ = "0.1.0"

from mrpkit.model.spec import ModelSpec, model_a, model_b, model_c
from mrpkit.model.compile import ModelData, compile_spec
from mrpkit.model.posterior import (
    adjust_positivity,
    cell_incidence,
    grad_log_posterior,
    log_posterior,
)
from mrpkit.sampler.run import DrawsMatrix, SamplerConfig, run_nuts
from mrpkit.sampler.summary import summarize
from mrpkit.poststrat import poststratify, export_estimates

__all__ = [
    "ModelSpec",
    "model_a",
    "model_b",
    "model_c",
    "ModelData",
    "compile_spec",
    "adjust_positivity",
    "cell_incidence",
    "log_posterior",
    "grad_log_posterior",
    "SamplerConfig",
    "DrawsMatrix",
    "run_nuts",
    "summarize",
    "poststratify",
    "export_estimates",
]
