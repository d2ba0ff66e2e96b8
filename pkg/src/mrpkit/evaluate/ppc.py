"""Posterior predictive checks: replicated grouped positivity vs raw rates.

Each replicate picks one posterior draw at random, simulates replacement
counts y-rep ~ Binomial(n_j, p_j(theta)) for every observed cell, and
aggregates to grouped positivity; the observed rates ride along for plotting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.model.compile import ModelData
from mrpkit.model.posterior import adjust_positivity, cell_incidence, unconstrain
from mrpkit.sampler.run import DrawsMatrix

_GROUP_KEYS = {"week": "week_index", "sex": "sex", "race": "race", "age": "age_group"}


@dataclass
class ReplicateSet:
    replicates: pd.DataFrame  # columns: rep, <group key>, rate
    observed: pd.DataFrame  # columns: <group key>, rate, n_tests
    group: str
    notes: list[str] = field(default_factory=list)


def _group_values(data: ModelData, group: str) -> np.ndarray:
    d = data.design
    if group == "week":
        return d.time_idx
    if group == "sex":
        return np.where(d.male > 0.5, "male", "female")
    if group == "race":
        return np.asarray(data.race_levels, dtype=object)[d.race_idx]
    if group == "age":
        return np.asarray(data.age_levels, dtype=object)[d.age_idx]
    raise InputError(f"unknown PPC grouping {group!r}; expected one of {sorted(_GROUP_KEYS)}")


def ppc_replicates(
    draws: DrawsMatrix,
    data: ModelData,
    spec=None,
    n_reps: int = 10,
    group: str = "week",
    seed: int = 0,
) -> ReplicateSet:
    spec = spec if spec is not None else data.spec
    if n_reps < 1:
        raise InputError("n_reps must be >= 1")
    key = _GROUP_KEYS.get(group)
    if key is None:
        raise InputError(f"unknown PPC grouping {group!r}; expected one of {sorted(_GROUP_KEYS)}")

    values = _group_values(data, group)
    levels, group_ids = np.unique(values, return_inverse=True)
    n_by_group = np.bincount(group_ids, weights=data.n, minlength=len(levels))
    y_by_group = np.bincount(group_ids, weights=data.y, minlength=len(levels))

    notes = []
    keep = n_by_group > 0
    if not np.all(keep):
        dropped = [levels[i] for i in np.flatnonzero(~keep)]
        notes.append(f"{len(dropped)} groups excluded (no tests): {dropped[:10]}")

    observed = pd.DataFrame(
        {
            key: levels[keep],
            "rate": y_by_group[keep] / n_by_group[keep],
            "n_tests": n_by_group[keep].astype(int),
        }
    )

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 808]))
    flat = draws.flat()
    rows = []
    for rep in range(n_reps):
        d = int(rng.integers(flat.shape[0]))
        params = unconstrain(flat[d], data.layout)
        pi = cell_incidence(params, data)
        p = adjust_positivity(pi, spec.sensitivity, spec.specificity)
        y_rep = rng.binomial(data.n.astype(np.int64), p)
        rep_by_group = np.bincount(group_ids, weights=y_rep, minlength=len(levels))
        rates = rep_by_group[keep] / n_by_group[keep]
        for lvl, rate in zip(levels[keep], rates):
            rows.append({"rep": rep, key: lvl, "rate": float(rate)})
    replicates = pd.DataFrame(rows)
    return ReplicateSet(replicates=replicates, observed=observed, group=group, notes=notes)
