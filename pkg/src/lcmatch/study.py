"""Cohort data model and CSV ingestion."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .errors import InvalidStudy, MissingColumn, NonBinaryTreatment, NonFiniteValue

CONTINUOUS = "continuous"
DICHOTOMOUS = "dichotomous"
KINDS = (CONTINUOUS, DICHOTOMOUS)


class SubjectView(NamedTuple):
    index: int
    row: np.ndarray


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def detect_kind(values) -> str:
    """Return ``"dichotomous"`` if every value is 0 or 1, else ``"continuous"``."""
    v = np.asarray(values, dtype=float)
    if v.size and np.all((v == 0) | (v == 1)):
        return DICHOTOMOUS
    return CONTINUOUS


@dataclass(frozen=True)
class Study:
    """Covariates, treatment indicator and optional binary outcome for n subjects.

    Arrays are copied and made read-only on construction. ``covariate_kinds``
    defaults to auto-detection per column. Construction does not validate;
    use :func:`validate` or :func:`require_valid`.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray | None = None
    covariate_names: tuple = ()
    covariate_kinds: tuple = ()
    treatment_name: str = "treatment"
    outcome_name: str | None = None

    def __post_init__(self):
        x = np.array(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "covariates", _frozen(x))
        object.__setattr__(self, "treatment", _frozen(np.ravel(self.treatment)))
        if self.outcome is not None:
            object.__setattr__(self, "outcome", _frozen(np.ravel(self.outcome)))
            if self.outcome_name is None:
                object.__setattr__(self, "outcome_name", "outcome")
        p = x.shape[1]
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(p))
        kinds = tuple(self.covariate_kinds) or tuple(detect_kind(x[:, j]) for j in range(p))
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "covariate_kinds", kinds)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def treated_index(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 1)

    @property
    def control_index(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 0)

    @property
    def n_treated(self) -> int:
        return int(np.sum(self.treatment == 1))

    @property
    def n_controls(self) -> int:
        return int(np.sum(self.treatment == 0))

    def subject(self, i: int) -> SubjectView:
        return SubjectView(int(i), self.covariates[i])

    def with_outcome(self, outcome, name="outcome") -> "Study":
        return Study(self.covariates, self.treatment, outcome, self.covariate_names,
                     self.covariate_kinds, self.treatment_name, name)

    def __eq__(self, other):
        if not isinstance(other, Study):
            return NotImplemented
        same_outcome = (self.outcome is None and other.outcome is None) or (
            self.outcome is not None and other.outcome is not None
            and np.array_equal(self.outcome, other.outcome))
        return (np.array_equal(self.covariates, other.covariates)
                and np.array_equal(self.treatment, other.treatment)
                and same_outcome
                and self.covariate_names == other.covariate_names
                and self.covariate_kinds == other.covariate_kinds)

    __hash__ = None


def validate(study: Study) -> list[str]:
    """Return every invariant violation of ``study``; an empty list means valid."""
    problems = []
    x, z = study.covariates, study.treatment
    n = x.shape[0]
    if n < 2:
        problems.append(f"need at least 2 subjects, got {n}")
    if x.shape[1] < 1:
        problems.append("need at least 1 covariate")
    if z.shape[0] != n:
        problems.append(f"treatment has length {z.shape[0]}, expected {n}")
    else:
        bad = np.flatnonzero(~((z == 0) | (z == 1)))
        if bad.size:
            problems.append(f"treatment not binary at rows {bad[:10].tolist()}")
        if not np.any(z == 1):
            problems.append("no treated subjects")
        if not np.any(z == 0):
            problems.append("no controls")
    if study.outcome is not None:
        y = study.outcome
        if y.shape[0] != n:
            problems.append(f"outcome has length {y.shape[0]}, expected {n}")
        else:
            bad = np.flatnonzero(~((y == 0) | (y == 1)))
            if bad.size:
                problems.append(f"outcome not binary at rows {bad[:10].tolist()}")
    if len(study.covariate_names) != x.shape[1]:
        problems.append("covariate_names length does not match covariates")
    if len(study.covariate_kinds) != x.shape[1]:
        problems.append("covariate_kinds length does not match covariates")
    for r, c in zip(*np.nonzero(~np.isfinite(x))):
        problems.append(f"non-finite value in covariate {study.covariate_names[c]!r} at row {r}")
    for j, kind in enumerate(study.covariate_kinds):
        if kind not in KINDS:
            problems.append(f"unknown kind {kind!r} for covariate {study.covariate_names[j]!r}")
        elif kind == DICHOTOMOUS:
            col = x[:, j]
            if np.any(np.isfinite(col) & ~((col == 0) | (col == 1))):
                problems.append(f"dichotomous covariate {study.covariate_names[j]!r} has values outside {{0,1}}")
    return problems


def require_valid(study: Study) -> Study:
    problems = validate(study)
    if problems:
        raise InvalidStudy(problems)
    return study


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def _binary_column(df, col, exc):
    raw = df[col]
    vals = pd.to_numeric(raw, errors="coerce")
    bad = np.flatnonzero(~vals.isin([0, 1]).to_numpy())
    if bad.size:
        r = int(bad[0])
        raise exc(f"column {col!r} must contain only 0/1; row {r} has {raw.iloc[r]!r}")
    return vals.to_numpy(dtype=float)


def load_csv(path: str | os.PathLike, treatment_col: str, outcome_col: str | None = None,
             covariate_cols: Sequence[str] | None = None,
             kinds: dict[str, str] | None = None) -> Study:
    """Read a cohort from a headered CSV file.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV with a header row.
    treatment_col, outcome_col : str
        Columns holding literal 0/1 values.
    covariate_cols : sequence of str, optional
        Covariates to load. Defaults to every remaining column.
    kinds : dict, optional
        Per-column ``"continuous"``/``"dichotomous"`` overrides of the
        auto-detected kinds.

    Raises
    ------
    MissingColumn, NonBinaryTreatment, NonFiniteValue
    """
    df = pd.read_csv(path, encoding="utf-8", dtype=str, keep_default_na=False)
    if covariate_cols is None:
        covariate_cols = [c for c in df.columns if c not in (treatment_col, outcome_col)]
    covariate_cols = list(covariate_cols)
    wanted = [treatment_col] + ([outcome_col] if outcome_col else []) + covariate_cols
    for col in wanted:
        if col not in df.columns:
            raise MissingColumn(f"column {col!r} not found in {os.fspath(path)}")
    z = _binary_column(df, treatment_col, NonBinaryTreatment)
    y = _binary_column(df, outcome_col, NonBinaryTreatment) if outcome_col else None

    x = np.empty((len(df), len(covariate_cols)))
    for j, col in enumerate(covariate_cols):
        vals = np.array([_parse_float(v) for v in df[col]], dtype=float)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            r = int(bad[0])
            raise NonFiniteValue(f"column {col!r} row {r}: {df[col].iloc[r]!r} is not a finite number")
        x[:, j] = vals

    kinds = dict(kinds or {})
    unknown = set(kinds) - set(covariate_cols)
    if unknown:
        raise MissingColumn(f"kind override for unknown columns {sorted(unknown)}")
    kind_list = tuple(kinds.get(c, detect_kind(x[:, j])) for j, c in enumerate(covariate_cols))
    study = Study(x, z, y, tuple(covariate_cols), kind_list, treatment_col, outcome_col)
    return require_valid(study)


def write_csv(study: Study, path: str | os.PathLike) -> None:
    """Write ``study`` so that :func:`load_csv` reproduces it exactly."""
    cols = {study.treatment_name: study.treatment.astype(int)}
    if study.outcome is not None:
        cols[study.outcome_name] = study.outcome.astype(int)
    for j, name in enumerate(study.covariate_names):
        col = study.covariates[:, j]
        cols[name] = (col.astype(int) if study.covariate_kinds[j] == DICHOTOMOUS
                     else [repr(float(v)) for v in col])
    pd.DataFrame(cols).to_csv(path, index=False, lineterminator="\n")
