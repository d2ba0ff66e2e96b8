"""Schema configuration for raw test-record ingestion.

A config file is a JSON document; every key is optional and defaults cover a
file already in canonical form. Documented keys:

  columns       mapping from canonical field names (record_id, sex, race, age,
                zip, result, result_date) to the input file's header names
  sex_map       input value (case-insensitive) -> {female, male}
  race_map      input value (case-insensitive) -> {White, Black, Other}
  result_map    input value (case-insensitive) -> {0, 1}
  delimiter     field separator, default ","
  date_format   strptime pattern, default ISO %Y-%m-%d
  study_window  {"start": ISO date, "end": ISO date}; records outside are rejected
  age_bins      ascending lower edges of the age bins, default
                [0, 18, 35, 50, 65, 75]; the last bin is open-ended
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from mrpkit.errors import InputError

CANONICAL_FIELDS = ("record_id", "sex", "race", "age", "zip", "result", "result_date")

DEFAULT_SEX_MAP = {"female": "female", "male": "male", "f": "female", "m": "male"}
DEFAULT_RACE_MAP = {
    "white": "White",
    "black": "Black",
    "african american": "Black",
    "other": "Other",
    "asian": "Other",
    "multiracial": "Other",
    "native american": "Other",
    "pacific islander": "Other",
}
DEFAULT_RESULT_MAP = {
    "0": 0,
    "1": 1,
    "negative": 0,
    "positive": 1,
    "neg": 0,
    "pos": 1,
    "detected": 1,
    "not detected": 0,
}
DEFAULT_AGE_BINS = (0, 18, 35, 50, 65, 75)


@dataclass
class SchemaConfig:
    columns: dict[str, str] = field(default_factory=dict)
    sex_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SEX_MAP))
    race_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_RACE_MAP))
    result_map: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_RESULT_MAP))
    delimiter: str = ","
    date_format: str = "%Y-%m-%d"
    study_start: date | None = None
    study_end: date | None = None
    age_bins: tuple[int, ...] = DEFAULT_AGE_BINS

    def column(self, canonical: str) -> str:
        return self.columns.get(canonical, canonical)

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemaConfig":
        known = {
            "columns",
            "sex_map",
            "race_map",
            "result_map",
            "delimiter",
            "date_format",
            "study_window",
            "age_bins",
        }
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown schema config keys: {sorted(unknown)}")
        cfg = cls()
        if "columns" in doc:
            bad = set(doc["columns"]) - set(CANONICAL_FIELDS)
            if bad:
                raise InputError(f"unknown canonical fields in columns mapping: {sorted(bad)}")
            cfg.columns = dict(doc["columns"])
        for key in ("sex_map", "race_map", "result_map"):
            if key in doc:
                setattr(cfg, key, {str(k).strip().lower(): v for k, v in doc[key].items()})
        if "delimiter" in doc:
            cfg.delimiter = doc["delimiter"]
        if "date_format" in doc:
            cfg.date_format = doc["date_format"]
        if "study_window" in doc:
            window = doc["study_window"]
            if "start" in window:
                cfg.study_start = date.fromisoformat(window["start"])
            if "end" in window:
                cfg.study_end = date.fromisoformat(window["end"])
        if "age_bins" in doc:
            edges = tuple(int(e) for e in doc["age_bins"])
            if list(edges) != sorted(set(edges)) or edges[0] < 0:
                raise InputError("age_bins must be ascending nonnegative edges")
            cfg.age_bins = edges
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "SchemaConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"schema config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def age_bin_labels(edges: tuple[int, ...]) -> list[str]:
    labels = []
    for lo, hi in zip(edges, edges[1:]):
        labels.append(f"[{lo},{hi})")
    labels.append(f"[{edges[-1]},inf)")
    return labels


def age_group_of(age: int, edges: tuple[int, ...]) -> str:
    if age < edges[0]:
        raise InputError(f"age {age} below the first bin edge {edges[0]}")
    labels = age_bin_labels(edges)
    for i, hi in enumerate(edges[1:]):
        if age < hi:
            return labels[i]
    return labels[-1]
