from mrpkit.sampler.run import DrawsMatrix, SamplerConfig, run_nuts, sample_target
from mrpkit.sampler.diagnostics import ess, mcse_mean, split_rhat
from mrpkit.sampler.summary import SUMMARY_COLUMNS, summarize

__all__ = [
    "SamplerConfig",
    "DrawsMatrix",
    "run_nuts",
    "sample_target",
    "split_rhat",
    "ess",
    "mcse_mean",
    "summarize",
    "SUMMARY_COLUMNS",
]
