"""Compile a ModelSpec against cell data into index arrays and a parameter layout.

The compiled ModelData is everything the log-posterior and its gradient need:
per-cell integer indices into each varying group, the cell-level male
indicator, the zip-by-predictor matrix, the binomial counts, and a recorded
parameter layout. Level ordering is lexicographic and emitted in the layout
manifest so draws stay interpretable downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from mrpkit.errors import InputError
from mrpkit.model.spec import ModelSpec, validate_spec

#: canonical ordering of varying-intercept groups in the parameter vector
GROUP_ORDER = ("age", "race", "time", "zip")


@dataclass(frozen=True)
class ParamBlock:
    name: str
    start: int
    size: int
    labels: tuple[str, ...]

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass(frozen=True)
class ParamLayout:
    """Ordered blocks of the unconstrained parameter vector."""

    blocks: tuple[ParamBlock, ...]

    @property
    def size(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    def block(self, name: str) -> ParamBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def has(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def sl(self, name: str) -> slice:
        b = self.block(name)
        return slice(b.start, b.stop)

    @property
    def names(self) -> list[str]:
        """Flat per-parameter labels on the unconstrained scale."""
        out: list[str] = []
        for b in self.blocks:
            out.extend(b.labels)
        return out

    @property
    def constrained_names(self) -> list[str]:
        """Per-parameter labels after mapping log-scale hyperparameters to sigma."""
        return [n[4:] if n.startswith("log_sigma") else n for n in self.names]

    def manifest(self) -> dict:
        return {
            "size": self.size,
            "blocks": [
                {"name": b.name, "start": b.start, "size": b.size, "labels": list(b.labels)}
                for b in self.blocks
            ],
            "names": self.names,
            "constrained_names": self.constrained_names,
        }

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class CellDesign:
    """Per-cell arrays the linear predictor is evaluated over.

    zip_idx indexes rows of z; group indices index the levels recorded in the
    owning ModelData. Used both for the fitted cells and for poststratification
    prediction cells.
    """

    male: np.ndarray
    age_idx: np.ndarray
    race_idx: np.ndarray
    zip_idx: np.ndarray
    time_idx: np.ndarray
    z: np.ndarray  # (n_zip_rows, n_predictors)

    @property
    def n_cells(self) -> int:
        return self.male.shape[0]

    def group_index(self, group: str) -> np.ndarray:
        return {
            "age": self.age_idx,
            "race": self.race_idx,
            "time": self.time_idx,
            "zip": self.zip_idx,
        }[group]


@dataclass(frozen=True)
class ModelData:
    """Compiled model: counts, design arrays, levels, and the parameter layout."""

    spec: ModelSpec
    n: np.ndarray  # tests per cell
    y: np.ndarray  # positives per cell
    design: CellDesign
    z_columns: tuple[str, ...]
    age_levels: tuple[str, ...]
    race_levels: tuple[str, ...]
    zip_levels: tuple[str, ...]
    n_weeks: int
    layout: ParamLayout

    @property
    def n_cells(self) -> int:
        return int(self.n.shape[0])

    def group_levels(self, group: str) -> tuple[str, ...]:
        if group == "age":
            return self.age_levels
        if group == "race":
            return self.race_levels
        if group == "zip":
            return self.zip_levels
        if group == "time":
            return tuple(str(t) for t in range(self.n_weeks))
        raise KeyError(group)

    def group_size(self, group: str) -> int:
        return len(self.group_levels(group))

    def z_column(self, name: str) -> int:
        return self.z_columns.index(name)

    def drop_cell(self, j: int) -> "ModelData":
        """Copy with cell j removed (leave-one-out refits). Levels are kept."""
        keep = np.arange(self.n_cells) != j
        design = CellDesign(
            male=self.design.male[keep],
            age_idx=self.design.age_idx[keep],
            race_idx=self.design.race_idx[keep],
            zip_idx=self.design.zip_idx[keep],
            time_idx=self.design.time_idx[keep],
            z=self.design.z,
        )
        return ModelData(
            spec=self.spec,
            n=self.n[keep],
            y=self.y[keep],
            design=design,
            z_columns=self.z_columns,
            age_levels=self.age_levels,
            race_levels=self.race_levels,
            zip_levels=self.zip_levels,
            n_weeks=self.n_weeks,
            layout=self.layout,
        )


def _levels(values: pd.Series, what: str) -> tuple[str, ...]:
    out = sorted(str(v) for v in values.unique())
    if not out:
        raise InputError(f"no {what} levels present in the cell table")
    return tuple(out)


def _index_into(values: pd.Series, levels: tuple[str, ...], what: str) -> np.ndarray:
    lookup = {lvl: i for i, lvl in enumerate(levels)}
    try:
        return np.asarray([lookup[str(v)] for v in values], dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"cell references unknown {what} level {exc.args[0]!r}") from exc


def compile_spec(spec: ModelSpec, cells: pd.DataFrame, geo) -> ModelData:
    """Build ModelData from a cell table and the zip-level predictor table.

    geo is a GeoPredictorTable (frame attribute) or a plain DataFrame with a
    zip column plus the predictor columns named by the spec.
    """
    validate_spec(spec)
    frame = getattr(geo, "frame", geo)

    required = {"sex", "age_group", "race", "zip", "week_index", "n_tests", "n_positive"}
    missing = required - set(cells.columns)
    if missing:
        raise InputError(f"cell table is missing columns {sorted(missing)}")

    age_levels = _levels(cells["age_group"], "age")
    race_levels = _levels(cells["race"], "race")
    zip_levels = _levels(cells["zip"], "zip")
    n_weeks = int(cells["week_index"].max()) + 1
    if cells["week_index"].min() < 0:
        raise InputError("negative week_index in cell table")

    sex_vals = set(str(s) for s in cells["sex"].unique())
    unknown_sex = sex_vals - {"female", "male"}
    if unknown_sex:
        raise InputError(f"cell references unknown sex level {sorted(unknown_sex)}")

    geo_zip = frame.set_index(frame["zip"].astype(str))
    missing_zips = [z for z in zip_levels if z not in geo_zip.index]
    if missing_zips:
        raise InputError(f"zips missing from the predictor table: {missing_zips[:10]}")
    z_cols = spec.geo_predictors
    for col in z_cols:
        if col not in geo_zip.columns:
            raise InputError(f"predictor column {col!r} not found in the geo table")
    z = (
        geo_zip.loc[list(zip_levels), list(z_cols)].to_numpy(dtype=np.float64)
        if z_cols
        else np.zeros((len(zip_levels), 0))
    )

    design = CellDesign(
        male=(cells["sex"].astype(str) == "male").to_numpy(dtype=np.float64),
        age_idx=_index_into(cells["age_group"], age_levels, "age"),
        race_idx=_index_into(cells["race"], race_levels, "race"),
        zip_idx=_index_into(cells["zip"].astype(str), zip_levels, "zip"),
        time_idx=cells["week_index"].to_numpy(dtype=np.int64),
        z=z,
    )

    n = cells["n_tests"].to_numpy(dtype=np.float64)
    y = cells["n_positive"].to_numpy(dtype=np.float64)
    if np.any(y > n):
        raise InputError("n_positive exceeds n_tests in the cell table")
    if np.any(n < 0):
        raise InputError("negative n_tests in the cell table")

    group_sizes = {
        "age": len(age_levels),
        "race": len(race_levels),
        "time": n_weeks,
        "zip": len(zip_levels),
    }
    layout = _layout_with_labels(spec, group_sizes, z_cols, age_levels, race_levels, zip_levels)

    return ModelData(
        spec=spec,
        n=n,
        y=y,
        design=design,
        z_columns=tuple(z_cols),
        age_levels=age_levels,
        race_levels=race_levels,
        zip_levels=zip_levels,
        n_weeks=n_weeks,
        layout=layout,
    )


def _layout_with_labels(
    spec: ModelSpec,
    group_sizes: dict[str, int],
    z_cols: tuple[str, ...],
    age_levels: tuple[str, ...],
    race_levels: tuple[str, ...],
    zip_levels: tuple[str, ...],
) -> ParamLayout:
    level_labels = {
        "age": age_levels,
        "race": race_levels,
        "time": tuple(str(t) for t in range(group_sizes["time"])),
        "zip": zip_levels,
    }
    blocks: list[ParamBlock] = []
    pos = 0

    def add(name: str, labels: list[str]) -> None:
        nonlocal pos
        blocks.append(ParamBlock(name=name, start=pos, size=len(labels), labels=tuple(labels)))
        pos += len(labels)

    add("intercept", ["intercept"])
    if spec.has_male:
        add("male", ["male"])
    if z_cols:
        add("geo_coef", [f"coef_{c}" for c in z_cols])
    for group in GROUP_ORDER:
        if group in spec.varying_intercepts:
            add(f"raw_{group}", [f"u_{group}[{lvl}]" for lvl in level_labels[group]])
    for group, pred in spec.varying_slopes:
        add(
            f"slope_{group}_{pred}",
            [f"slope_{group}_{pred}[{lvl}]" for lvl in level_labels[group]],
        )
    for group in GROUP_ORDER:
        if group in spec.varying_intercepts:
            add(f"log_sigma_{group}", [f"log_sigma_{group}"])
    return ParamLayout(blocks=tuple(blocks))
