"""Record parsing and imputation, checked against line-by-line revalidation."""

import io
import re

import numpy as np
import pandas as pd
import pytest

from mrpkit.errors import InputError
from mrpkit.ingest.config import SchemaConfig
from mrpkit.ingest.records import impute_missing, parse_records


def make_csv(rows, header="record_id,sex,race,age,zip,result,result_date"):
    return io.StringIO(header + "\n" + "\n".join(rows) + "\n")


def test_well_formed_file_identity():
    source = make_csv(
        [
            "r1,female,White,34,48104,0,2021-11-02",
            "r2,male,Black,61,48105,1,2021-11-03",
            "r3,female,Other,8,48104,0,2021-11-09",
        ]
    )
    result = parse_records(source)
    assert len(result.records) == 3
    assert result.rejects.empty
    assert result.records["result"].tolist() == [0, 1, 0]
    assert result.records["zip"].tolist() == ["48104", "48105", "48104"]


def test_invalid_zip_rejected_with_reason():
    source = make_csv(
        [
            "r1,female,White,34,482A1,0,2021-11-02",
            "r2,male,Black,61,48105,1,2021-11-03",
        ]
    )
    result = parse_records(source)
    assert len(result.records) == 1
    assert result.rejects.iloc[0]["reason"] == "invalid zip"
    assert result.rejects.iloc[0]["line"] == 2


def test_missing_demographics_pass_through():
    source = make_csv(["r1,,,,48104,1,2021-11-02"])
    result = parse_records(source)
    assert len(result.records) == 1
    row = result.records.iloc[0]
    assert pd.isna(row["sex"]) and pd.isna(row["race"]) and pd.isna(row["age"])


def test_missing_date_rejected():
    source = make_csv(
        [
            "r1,female,White,30,48104,1,",
            "r2,female,White,30,48104,1,2021-11-02",
            "r3,female,White,30,48104,0,2021-11-02",
        ]
    )
    result = parse_records(source)
    assert result.rejects.iloc[0]["reason"] == "missing date"
    assert len(result.records) == 2


def test_study_window_enforced():
    cfg = SchemaConfig.from_dict({"study_window": {"start": "2021-01-01", "end": "2021-12-31"}})
    source = make_csv(
        [
            "r1,female,White,30,48104,1,2020-12-31",
            "r2,female,White,30,48104,1,2021-06-01",
            "r3,female,White,30,48104,1,2021-07-01",
            "r4,female,White,30,48104,1,2021-08-01",
            "r5,female,White,30,48104,1,2022-01-01",
        ]
    )
    result = parse_records(source, cfg)
    assert len(result.records) == 3
    assert set(result.rejects["reason"]) == {"date outside study window"}


def test_unmappable_required_column_fatal():
    cfg = SchemaConfig.from_dict({"columns": {"zip": "zip_code"}})
    source = make_csv(["r1,female,White,30,48104,1,2021-11-02"])
    with pytest.raises(InputError, match="zip_code"):
        parse_records(source, cfg)


def test_majority_rejected_fatal():
    rows = ["r%d,female,White,30,BAD,1,2021-11-02" % i for i in range(8)]
    rows += ["r9,female,White,30,48104,1,2021-11-02"]
    with pytest.raises(InputError, match=">50%"):
        parse_records(make_csv(rows))


def independent_line_validator(text, cfg):
    """Brute-force row-by-row revalidation used as the counting oracle."""
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    col = {name: header.index(cfg.column(name)) for name in
           ("sex", "race", "age", "zip", "result", "result_date")}
    accepted = rejected = 0
    for line in lines[1:]:
        fields = line.split(",")
        ok = True
        if not re.fullmatch(r"[0-9]{5}", fields[col["zip"]].strip()):
            ok = False
        elif fields[col["result"]].strip().lower() not in cfg.result_map:
            ok = False
        else:
            raw_date = fields[col["result_date"]].strip()
            try:
                from datetime import datetime

                datetime.strptime(raw_date, cfg.date_format)
            except ValueError:
                ok = False
            if ok:
                for field, mapping in (("sex", cfg.sex_map), ("race", cfg.race_map)):
                    value = fields[col[field]].strip().lower()
                    if value and value not in mapping:
                        ok = False
                age_raw = fields[col["age"]].strip()
                if age_raw and (not age_raw.isdigit()):
                    ok = False
        accepted += int(ok)
        rejected += int(not ok)
    return accepted, rejected


def test_thousand_row_fixture_matches_line_oracle():
    rng = np.random.default_rng(2021)
    rows = []
    for i in range(1000):
        bad = rng.random() < 0.02
        zipc = "48104" if not bad or rng.random() < 0.5 else "4810X"
        result = "1" if rng.random() < 0.1 else "0"
        if bad and zipc == "48104":
            result = "maybe"
        rows.append(f"r{i},female,White,{int(rng.integers(0, 90))},{zipc},{result},2021-11-02")
    text = "record_id,sex,race,age,zip,result,result_date\n" + "\n".join(rows) + "\n"
    cfg = SchemaConfig()
    parsed = parse_records(io.StringIO(text), cfg)
    accepted, rejected = independent_line_validator(text, cfg)
    assert len(parsed.records) == accepted
    assert len(parsed.rejects) == rejected
    assert len(parsed.records) + len(parsed.rejects) == 1000


# ---------------------------------------------------------------------------
# imputation


def records_with_missing(n_missing, seed=0):
    rng = np.random.default_rng(seed)
    races = ["White"] * 6 + ["Black"] * 3 + ["Other"] * 1
    frame = pd.DataFrame(
        {
            "record_id": [f"r{i}" for i in range(10 + n_missing)],
            "sex": ["female"] * (10 + n_missing),
            "race": races + [None] * n_missing,
            "age": [30] * (10 + n_missing),
            "zip": ["48104"] * (10 + n_missing),
            "result": [0] * (10 + n_missing),
            "result_date": [pd.Timestamp("2021-11-01").date()] * (10 + n_missing),
        }
    )
    frame["age"] = frame["age"].astype(float)
    return frame


def test_no_missing_is_identity():
    frame = records_with_missing(0)
    out, counts = impute_missing(frame, seed=1)
    pd.testing.assert_frame_equal(
        out.astype({"age": float}), frame.astype({"age": float}), check_dtype=False
    )
    assert counts == {"sex": 0, "race": 0, "age": 0}


def test_imputed_proportions_follow_observed():
    frame = records_with_missing(1000)
    out, counts = impute_missing(frame, seed=7)
    assert counts["race"] == 1000
    imputed = out["race"].iloc[10:]
    props = imputed.value_counts(normalize=True)
    assert props["White"] == pytest.approx(0.6, abs=0.03)
    assert props["Black"] == pytest.approx(0.3, abs=0.03)
    assert props["Other"] == pytest.approx(0.1, abs=0.03)


def test_imputation_deterministic():
    frame = records_with_missing(50)
    a, _ = impute_missing(frame, seed=3)
    b, _ = impute_missing(frame, seed=3)
    pd.testing.assert_frame_equal(a, b)
    c, _ = impute_missing(frame, seed=4)
    assert not a["race"].equals(c["race"])


def test_marginal_convergence_large_n():
    """Imputed frequencies converge to the observed marginals (n = 1e5)."""
    frame = records_with_missing(100_000)
    out, _ = impute_missing(frame, seed=11)
    props = out["race"].iloc[10:].value_counts(normalize=True)
    for level, expected in (("White", 0.6), ("Black", 0.3), ("Other", 0.1)):
        assert props[level] == pytest.approx(expected, abs=0.01)


def test_fully_missing_column_fatal():
    frame = records_with_missing(2)
    frame["race"] = None
    with pytest.raises(InputError, match="no observed values"):
        impute_missing(frame, seed=0)
