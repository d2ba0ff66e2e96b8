"""Fit summaries: one row per labeled parameter, reporting-table column set.

Row order follows the reporting convention: non-varying effects first, then
varying slopes, then the standard deviations of the varying effects (race,
age, time, ZIP), then the individual raw varying intercepts.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from mrpkit.sampler.diagnostics import ess, split_rhat
from mrpkit.sampler.run import DrawsMatrix
from mrpkit.tables import FLOAT_FORMAT

SUMMARY_COLUMNS = ["Estimate", "Est.Error", "l-95%", "u-95%", "R-hat", "Bulk_ESS", "Tail_ESS"]

#: display order of varying-effect scales
_SIGMA_ORDER = ("race", "age", "time", "zip")


def display_label(name: str) -> str:
    if name == "intercept":
        return "Intercept"
    if name == "male":
        return "sex.male"
    if name.startswith("coef_"):
        pred = name[len("coef_") :]
        return "ADI" if pred == "adi" else pred
    if name.startswith("sigma_"):
        group = name[len("sigma_") :]
        return f"{'ZIP' if group == 'zip' else group} (intercept)"
    if name.startswith("slope_"):
        # slope_<group>_<pred>[level] -> <group>:<pred>[level]
        body = name[len("slope_") :]
        group, rest = body.split("_", 1)
        return f"{group}:{rest}"
    return name


def _ordered_names(draws: DrawsMatrix) -> list[str]:
    names = draws.param_names
    manifest = draws.layout_manifest
    if manifest is None:
        return list(names)
    by_block: dict[str, list[str]] = {}
    for block, cnames in zip(
        manifest["blocks"],
        _split_by_blocks(manifest, manifest["constrained_names"]),
    ):
        by_block[block["name"]] = cnames
    ordered: list[str] = []
    for key in ("intercept", "male", "geo_coef"):
        ordered.extend(by_block.get(key, []))
    for block in manifest["blocks"]:
        if block["name"].startswith("slope_"):
            ordered.extend(by_block[block["name"]])
    for group in _SIGMA_ORDER:
        ordered.extend(by_block.get(f"log_sigma_{group}", []))
    for group in _SIGMA_ORDER:
        ordered.extend(by_block.get(f"raw_{group}", []))
    # anything not covered (future blocks) keeps its layout position
    seen = set(ordered)
    ordered.extend(n for n in names if n not in seen)
    return ordered


def _split_by_blocks(manifest: dict, flat_names: list[str]) -> list[list[str]]:
    out = []
    for block in manifest["blocks"]:
        out.append(flat_names[block["start"] : block["start"] + block["size"]])
    return out


def summarize(draws: DrawsMatrix, layout_manifest: dict | None = None) -> pd.DataFrame:
    """Posterior mean/sd, central 95% interval, R-hat, bulk and tail ESS."""
    if draws.n_draws == 0:
        raise ValueError("empty draws")
    if layout_manifest is not None and draws.layout_manifest is None:
        draws.layout_manifest = layout_manifest

    rows = []
    index = []
    for name in _ordered_names(draws):
        x = draws.parameter(name)
        pooled = x.reshape(-1)
        q_lo, q_hi = np.quantile(pooled, [0.025, 0.975])
        can_diag = draws.n_chains * 2 >= 2 and draws.n_iters // 2 >= 4
        rows.append(
            {
                "Estimate": float(pooled.mean()),
                "Est.Error": float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0,
                "l-95%": float(q_lo),
                "u-95%": float(q_hi),
                "R-hat": split_rhat(x) if can_diag else float("nan"),
                "Bulk_ESS": ess(x, "bulk") if can_diag else float("nan"),
                "Tail_ESS": ess(x, "tail") if can_diag else float("nan"),
            }
        )
        index.append(display_label(name))
    table = pd.DataFrame(rows, index=pd.Index(index, name="parameter"))
    return table[SUMMARY_COLUMNS]


def write_summary(table: pd.DataFrame, csv_path=None, json_path=None) -> None:
    if csv_path is not None:
        table.to_csv(csv_path, float_format=FLOAT_FORMAT, lineterminator="\n")
    if json_path is not None:
        payload = table.reset_index().to_json(orient="records", double_precision=15)
        import json as _json
        from pathlib import Path

        Path(json_path).write_text(
            _json.dumps(_json.loads(payload), indent=2) + "\n"
        )
