import json

import pytest

from mrpkit.errors import SpecError
from mrpkit.model.spec import ModelSpec, model_a, model_b, model_c, validate_spec


def test_presets_match_menu():
    a = model_a()
    assert a.has_male
    assert a.geo_predictors == ("urbanicity", "college", "employment", "income", "poverty", "adi")
    assert a.varying_intercepts == ("age", "race", "time", "zip")
    assert a.varying_slopes == ()

    b = model_b()
    assert b.varying_slopes == (("race", "college"),)
    assert b.varying_intercepts == a.varying_intercepts

    c = model_c()
    assert "zip" not in c.varying_intercepts
    assert c.geo_predictors == a.geo_predictors
    assert not c.zip_regression


def test_default_sensitivity_specificity():
    a = model_a()
    assert a.sensitivity == 0.7
    assert a.specificity == 1.0


def test_uninformative_test_rejected():
    with pytest.raises(SpecError, match="uninformative"):
        validate_spec(ModelSpec(sensitivity=0.2, specificity=0.5))


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.2])
def test_out_of_range_sensitivity(bad):
    with pytest.raises(SpecError) as err:
        validate_spec(ModelSpec(sensitivity=bad))
    assert err.value.field == "sensitivity"


def test_slope_predictor_must_be_listed():
    with pytest.raises(SpecError, match="not among"):
        validate_spec(
            ModelSpec(fixed_effects=("male", "adi"), varying_slopes=(("race", "college"),))
        )


def test_json_round_trip(tmp_path):
    spec = model_b(sensitivity=0.8, specificity=0.99)
    path = tmp_path / "spec.json"
    spec.to_json(path)
    loaded = ModelSpec.from_json(path)
    assert loaded == spec


def test_unknown_field_rejected():
    with pytest.raises(SpecError, match="unknown model spec fields"):
        ModelSpec.from_dict({"likelihood": "binomial"})


def test_from_json_reports_invalid_json():
    with pytest.raises(SpecError, match="not valid JSON"):
        ModelSpec.from_json("{nope")


def test_spec_json_is_documented_shape():
    doc = json.loads(model_a().to_json())
    assert set(doc) == {
        "label",
        "sensitivity",
        "specificity",
        "fixed_effects",
        "varying_intercepts",
        "varying_slopes",
        "zip_regression",
        "prior_scales",
    }
