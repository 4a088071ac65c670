import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lcmatch import Study, load_csv, validate, write_csv
from lcmatch.errors import MissingColumn, NonBinaryTreatment, NonFiniteValue
from lcmatch.study import require_valid


def write(tmp_path, text, name="cohort.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_file(tmp_path):
    path = write(tmp_path, "t,age\n1,40\n0,43\n0,50\n")
    s = load_csv(path, "t", covariate_cols=["age"])
    assert (s.n, s.n_covariates) == (3, 1)
    assert s.n_treated == 1 and s.n_controls == 2
    assert s.covariate_kinds == ("continuous",)


def test_treatment_value_two_rejected(tmp_path):
    path = write(tmp_path, "t,age\n1,40\n2,43\n0,50\n")
    with pytest.raises(NonBinaryTreatment, match="row 1"):
        load_csv(path, "t", covariate_cols=["age"])


def test_missing_column(tmp_path):
    path = write(tmp_path, "t,age\n1,40\n0,43\n")
    with pytest.raises(MissingColumn, match="weight"):
        load_csv(path, "t", covariate_cols=["weight"])


@pytest.mark.parametrize("cell", ["", "nan", "inf", "abc"])
def test_non_finite_covariate(tmp_path, cell):
    path = write(tmp_path, f"t,age\n1,40\n0,{cell}\n")
    with pytest.raises(NonFiniteValue, match="age.*row 1"):
        load_csv(path, "t", covariate_cols=["age"])


def test_kind_detection_and_override(tmp_path):
    path = write(tmp_path, "t,y,male,age\n1,1,1,40\n0,0,0,43\n0,1,1,50\n")
    s = load_csv(path, "t", "y", ["male", "age"])
    assert s.covariate_kinds == ("dichotomous", "continuous")
    s = load_csv(path, "t", "y", ["male", "age"], kinds={"male": "continuous"})
    assert s.covariate_kinds == ("continuous", "continuous")
    np.testing.assert_array_equal(s.outcome, [1, 0, 1])


def test_rhc_shaped_counts(tmp_path):
    rng = np.random.default_rng(3)
    z = np.r_[np.ones(2184), np.zeros(3551)].astype(int)
    df = pd.DataFrame({"swang1": z, "age": rng.normal(60, 15, z.size)})
    path = tmp_path / "rhc.csv"
    df.to_csv(path, index=False)
    s = load_csv(path, "swang1", covariate_cols=["age"])
    assert (s.n_treated, s.n_controls) == (2184, 3551)


def test_validate_reports_every_problem():
    x = np.array([[1.0, 2.0], [np.nan, 0.5]])
    s = Study(x, [1, 1], covariate_kinds=("continuous", "dichotomous"))
    problems = validate(s)
    assert any("no controls" in p for p in problems)
    assert any("non-finite" in p and "row 1" in p for p in problems)
    assert any("dichotomous" in p for p in problems)


def test_validate_ok():
    assert validate(Study([[0.0], [1.0]], [1, 0])) == []
    with pytest.raises(Exception):
        require_valid(Study([[0.0], [1.0]], [1, 1]))


def test_study_is_immutable():
    s = Study([[0.0], [1.0]], [1, 0])
    with pytest.raises(ValueError):
        s.covariates[0, 0] = 5.0
    assert s.subject(1).index == 1


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(x=arrays(float, (6, 3), elements=finite), bits=arrays(bool, (6, 2)),
       z=st.lists(st.integers(0, 1), min_size=6, max_size=6).filter(lambda v: 0 < sum(v) < 6))
def test_csv_round_trip(tmp_path_factory, x, bits, z):
    x = np.column_stack([x, bits.astype(float)])
    y = (np.arange(6) % 2).astype(float)
    s = Study(x, z, y, ("a", "b", "c", "d", "e"), treatment_name="t", outcome_name="y")
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    write_csv(s, path)
    back = load_csv(path, "t", "y", list(s.covariate_names))
    assert back == s
    assert back.n_treated + back.n_controls == back.n
