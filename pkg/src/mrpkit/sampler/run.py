"""Multi-chain sampler driver and the draws container.

Chains are seeded independently from (seed, chain index) and merged by chain
index, so a run is fully determined by (seed, config, model). Draws are stored
on the constrained scale (group-level scales positive); per-draw diagnostics
travel with them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from mrpkit.errors import SamplingError
from mrpkit.model.compile import ModelData
from mrpkit.model.posterior import constrain, log_posterior_and_grad
from mrpkit.model.spec import ModelSpec
from mrpkit.sampler.nuts import find_initial_point, sample_chain
from mrpkit.tables import FLOAT_FORMAT

#: divergent-draw fraction above which reports carry a prominent warning
DIVERGENCE_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class SamplerConfig:
    """Run shape; the defaults reproduce 4 chains x 2500 post-warmup draws."""

    chains: int = 4
    warmup_iters: int = 1000
    sampling_iters: int = 2500
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_radius: float = 2.0
    divergence_threshold: float = 1000.0

    def validate(self) -> None:
        if self.chains < 1:
            raise SamplingError("chains must be >= 1")
        if self.warmup_iters < 1 or self.sampling_iters < 1:
            raise SamplingError("warmup_iters and sampling_iters must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise SamplingError("target_accept must be in (0, 1)")
        if self.max_tree_depth < 1:
            raise SamplingError("max_tree_depth must be >= 1")
        if self.init_radius <= 0:
            raise SamplingError("init_radius must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DrawsMatrix:
    """Posterior draws indexed (chain, iteration, parameter), constrained scale."""

    draws: np.ndarray
    param_names: list[str]
    divergent: np.ndarray
    tree_depth: np.ndarray
    accept_stat: np.ndarray
    step_size: np.ndarray
    config: SamplerConfig
    layout_manifest: dict | None = None
    warmup_divergences: int = 0

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_iters(self) -> int:
        return self.draws.shape[1]

    @property
    def n_params(self) -> int:
        return self.draws.shape[2]

    @property
    def n_draws(self) -> int:
        return self.n_chains * self.n_iters

    @property
    def divergence_count(self) -> int:
        return int(self.divergent.sum())

    @property
    def divergence_fraction(self) -> float:
        return self.divergence_count / self.n_draws

    def parameter(self, name_or_index) -> np.ndarray:
        """Draws for one parameter, shape (chains, iterations)."""
        if isinstance(name_or_index, str):
            idx = self.param_names.index(name_or_index)
        else:
            idx = int(name_or_index)
        return self.draws[:, :, idx]

    def flat(self) -> np.ndarray:
        """All draws pooled, shape (chains * iterations, parameters)."""
        return self.draws.reshape(-1, self.n_params)

    def warnings(self) -> list[str]:
        out = []
        if self.divergence_fraction > DIVERGENCE_WARN_FRACTION:
            out.append(
                f"WARNING: {self.divergence_count} divergent draws "
                f"({100 * self.divergence_fraction:.2f}% > "
                f"{100 * DIVERGENCE_WARN_FRACTION:.0f}%); estimates may be biased"
            )
        return out

    # -- persistence ---------------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        chains = np.repeat(np.arange(self.n_chains), self.n_iters)
        iters = np.tile(np.arange(self.n_iters), self.n_chains)
        frame = pd.DataFrame(self.flat(), columns=self.param_names)
        frame.insert(0, "chain", chains)
        frame.insert(1, "iteration", iters)
        frame["divergent"] = self.divergent.reshape(-1).astype(int)
        frame["tree_depth"] = self.tree_depth.reshape(-1)
        frame["accept_stat"] = self.accept_stat.reshape(-1)
        frame["step_size"] = self.step_size.reshape(-1)
        return frame

    def save(self, directory: str | Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        draws_path = directory / "draws.csv"
        self.to_frame().to_csv(
            draws_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
        meta = {
            "param_names": self.param_names,
            "config": self.config.to_dict(),
            "layout_manifest": self.layout_manifest,
            "divergence_count": self.divergence_count,
            "warmup_divergences": self.warmup_divergences,
            "n_chains": self.n_chains,
            "n_iters": self.n_iters,
            "warnings": self.warnings(),
        }
        meta_path = directory / "draws_meta.json"
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return {"draws": draws_path, "meta": meta_path}

    @classmethod
    def load(cls, directory: str | Path) -> "DrawsMatrix":
        directory = Path(directory)
        meta = json.loads((directory / "draws_meta.json").read_text())
        frame = pd.read_csv(directory / "draws.csv", float_precision="round_trip")
        names = meta["param_names"]
        n_chains, n_iters = meta["n_chains"], meta["n_iters"]
        draws = frame[names].to_numpy().reshape(n_chains, n_iters, len(names))
        return cls(
            draws=draws,
            param_names=names,
            divergent=frame["divergent"].to_numpy().reshape(n_chains, n_iters).astype(bool),
            tree_depth=frame["tree_depth"].to_numpy().reshape(n_chains, n_iters),
            accept_stat=frame["accept_stat"].to_numpy().reshape(n_chains, n_iters),
            step_size=frame["step_size"].to_numpy().reshape(n_chains, n_iters),
            config=SamplerConfig(**meta["config"]),
            layout_manifest=meta["layout_manifest"],
            warmup_divergences=meta["warmup_divergences"],
        )


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chain)]))


def sample_target(
    logp_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    dim: int,
    cfg: SamplerConfig,
    param_names: list[str] | None = None,
    transform: Callable[[np.ndarray], np.ndarray] | None = None,
    layout_manifest: dict | None = None,
    progress: Callable[[int, str, int, int], None] | None = None,
) -> DrawsMatrix:
    """Sample an arbitrary differentiable density (the model path plugs in here)."""
    cfg.validate()
    names = param_names if param_names is not None else [f"p{i}" for i in range(dim)]

    draws = np.empty((cfg.chains, cfg.sampling_iters, dim))
    divergent = np.empty((cfg.chains, cfg.sampling_iters), dtype=bool)
    tree_depth = np.empty((cfg.chains, cfg.sampling_iters), dtype=np.int64)
    accept_stat = np.empty((cfg.chains, cfg.sampling_iters))
    step_size = np.empty((cfg.chains, cfg.sampling_iters))
    warmup_div = 0

    for chain in range(cfg.chains):
        rng = _chain_rng(cfg.seed, chain)
        chain_progress = None
        if progress is not None:
            chain_progress = lambda phase, it, total, _c=chain: progress(_c, phase, it, total)
        try:
            result = sample_chain(
                logp_grad,
                dim,
                rng,
                warmup_iters=cfg.warmup_iters,
                sampling_iters=cfg.sampling_iters,
                target_accept=cfg.target_accept,
                max_depth=cfg.max_tree_depth,
                init_radius=cfg.init_radius,
                divergence_threshold=cfg.divergence_threshold,
                progress=chain_progress,
            )
        except RuntimeError as exc:
            raise SamplingError(f"chain {chain}: {exc}") from exc
        sl = result.draws
        if transform is not None:
            sl = np.stack([transform(row) for row in sl])
        draws[chain] = sl
        divergent[chain] = result.divergent
        tree_depth[chain] = result.tree_depth
        accept_stat[chain] = result.accept_stat
        step_size[chain] = result.step_size
        warmup_div += result.warmup_divergences

    if bool(divergent.all()):
        raise SamplingError("all post-warmup draws were divergent")

    return DrawsMatrix(
        draws=draws,
        param_names=names,
        divergent=divergent,
        tree_depth=tree_depth,
        accept_stat=accept_stat,
        step_size=step_size,
        config=cfg,
        layout_manifest=layout_manifest,
        warmup_divergences=warmup_div,
    )


def run_nuts(
    data: ModelData,
    spec: ModelSpec | None = None,
    cfg: SamplerConfig | None = None,
    progress: Callable[[int, str, int, int], None] | None = None,
) -> DrawsMatrix:
    """Fit a compiled model. Draws come back on the constrained scale."""
    if spec is not None and spec is not data.spec and spec != data.spec:
        raise SamplingError("spec does not match the compiled model data")
    cfg = cfg if cfg is not None else SamplerConfig()
    layout = data.layout
    return sample_target(
        lambda q: log_posterior_and_grad(q, data),
        dim=layout.size,
        cfg=cfg,
        param_names=layout.constrained_names,
        transform=lambda q: constrain(q, layout),
        layout_manifest=layout.manifest(),
        progress=progress,
    )
