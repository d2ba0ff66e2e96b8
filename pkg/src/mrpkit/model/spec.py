"""Declarative specification of the binomial incidence models.

A ModelSpec captures one row of the model menu: which cell-level fixed
effects enter the linear predictor, which groups get varying intercepts,
optional group-by-predictor varying slopes, and the assumed test sensitivity
and specificity. Specs serialize to JSON so they can be shipped to the CLI
and the HTTP service unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from mrpkit.errors import SpecError

GEO_PREDICTORS = ("urbanicity", "college", "employment", "income", "poverty", "adi")
VARYING_GROUPS = ("age", "race", "time", "zip")

#: Prior scales (standard deviations). Fixed effects sit on standardized
#: predictors, so a common weakly informative scale is appropriate; the
#: intercept gets a wider one. Group-level scales are half-normal.
DEFAULT_PRIOR_SCALES = {
    "intercept": 5.0,
    "fixed": 2.5,
    "slope": 2.5,
    "sigma_age": 2.5,
    "sigma_race": 2.5,
    "sigma_zip": 2.5,
    "sigma_time": 5.0,
}


@dataclass(frozen=True)
class ModelSpec:
    """One model definition.

    fixed_effects lists "male" and/or zip-level predictor column names.
    varying_intercepts is a subset of {age, race, time, zip}. varying_slopes
    holds (group, zip-predictor) pairs, e.g. ("race", "college"). The
    zip_regression flag records whether the zip-level predictors are read as
    a regression on the zip effect (with a zip random error when "zip" is a
    varying intercept) or as plain cell-level fixed effects; the linear
    predictor is identical either way.
    """

    label: str = "model"
    sensitivity: float = 0.7
    specificity: float = 1.0
    fixed_effects: tuple[str, ...] = ("male",) + GEO_PREDICTORS
    varying_intercepts: tuple[str, ...] = ("age", "race", "time", "zip")
    varying_slopes: tuple[tuple[str, str], ...] = ()
    zip_regression: bool = True
    prior_scales: dict[str, float] = field(default_factory=dict)

    @property
    def geo_predictors(self) -> tuple[str, ...]:
        return tuple(f for f in self.fixed_effects if f != "male")

    @property
    def has_male(self) -> bool:
        return "male" in self.fixed_effects

    def prior_scale(self, key: str) -> float:
        if key in self.prior_scales:
            return float(self.prior_scales[key])
        return DEFAULT_PRIOR_SCALES[key]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "fixed_effects": list(self.fixed_effects),
            "varying_intercepts": list(self.varying_intercepts),
            "varying_slopes": [list(p) for p in self.varying_slopes],
            "zip_regression": self.zip_regression,
            "prior_scales": dict(self.prior_scales),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        known = {
            "label",
            "sensitivity",
            "specificity",
            "fixed_effects",
            "varying_intercepts",
            "varying_slopes",
            "zip_regression",
            "prior_scales",
        }
        unknown = set(doc) - known
        if unknown:
            raise SpecError(f"unknown model spec fields: {sorted(unknown)}")
        kwargs = dict(doc)
        if "fixed_effects" in kwargs:
            kwargs["fixed_effects"] = tuple(kwargs["fixed_effects"])
        if "varying_intercepts" in kwargs:
            kwargs["varying_intercepts"] = tuple(kwargs["varying_intercepts"])
        if "varying_slopes" in kwargs:
            kwargs["varying_slopes"] = tuple(tuple(p) for p in kwargs["varying_slopes"])
        spec = cls(**kwargs)
        validate_spec(spec)
        return spec

    @classmethod
    def from_json(cls, source: str | Path) -> "ModelSpec":
        path = Path(source)
        text = path.read_text() if path.exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"model spec is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def validate_spec(spec: ModelSpec) -> None:
    """Raise SpecError (with the offending field) on structural problems."""
    if not 0.0 < spec.sensitivity <= 1.0:
        raise SpecError(
            f"sensitivity must be in (0, 1], got {spec.sensitivity}", field="sensitivity"
        )
    if not 0.0 < spec.specificity <= 1.0:
        raise SpecError(
            f"specificity must be in (0, 1], got {spec.specificity}", field="specificity"
        )
    if spec.sensitivity <= 1.0 - spec.specificity:
        raise SpecError(
            "test is uninformative: sensitivity must exceed 1 - specificity "
            f"(got sensitivity={spec.sensitivity}, specificity={spec.specificity})",
            field="sensitivity",
        )
    seen: set[str] = set()
    for name in spec.fixed_effects:
        if not name or not isinstance(name, str):
            raise SpecError("fixed effect names must be non-empty strings", field="fixed_effects")
        if name in seen:
            raise SpecError(f"duplicate fixed effect {name!r}", field="fixed_effects")
        seen.add(name)
    for group in spec.varying_intercepts:
        if group not in VARYING_GROUPS:
            raise SpecError(
                f"unknown varying-intercept group {group!r}; expected one of {VARYING_GROUPS}",
                field="varying_intercepts",
            )
    if len(set(spec.varying_intercepts)) != len(spec.varying_intercepts):
        raise SpecError("duplicate varying-intercept group", field="varying_intercepts")
    for pair in spec.varying_slopes:
        if len(pair) != 2:
            raise SpecError("varying slopes must be (group, predictor) pairs", field="varying_slopes")
        group, pred = pair
        if group not in VARYING_GROUPS:
            raise SpecError(f"unknown varying-slope group {group!r}", field="varying_slopes")
        if pred not in spec.geo_predictors:
            raise SpecError(
                f"varying-slope predictor {pred!r} is not among the spec's zip-level predictors",
                field="varying_slopes",
            )
    for key in spec.prior_scales:
        if key not in DEFAULT_PRIOR_SCALES:
            raise SpecError(f"unknown prior scale key {key!r}", field="prior_scales")
        if not spec.prior_scales[key] > 0:
            raise SpecError(f"prior scale {key!r} must be positive", field="prior_scales")


def model_a(sensitivity: float = 0.7, specificity: float = 1.0, **overrides) -> ModelSpec:
    """Full model: sex + zip-level predictors, varying age/race/time/zip intercepts."""
    spec = ModelSpec(label="A", sensitivity=sensitivity, specificity=specificity, **overrides)
    validate_spec(spec)
    return spec


def model_b(sensitivity: float = 0.7, specificity: float = 1.0, **overrides) -> ModelSpec:
    """Model A plus a race-by-college varying slope."""
    spec = replace(
        model_a(sensitivity, specificity, **overrides),
        label="B",
        varying_slopes=(("race", "college"),),
    )
    validate_spec(spec)
    return spec


def model_c(sensitivity: float = 0.7, specificity: float = 1.0, **overrides) -> ModelSpec:
    """Model A without the zip varying intercept; zip predictors stay as fixed effects."""
    spec = replace(
        model_a(sensitivity, specificity, **overrides),
        label="C",
        varying_intercepts=("age", "race", "time"),
        zip_regression=False,
    )
    validate_spec(spec)
    return spec
