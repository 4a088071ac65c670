"""Covariate-balance diagnostics: standardized differences and Love-plot data."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from .errors import Degenerate
from .matching import MatchResult
from .study import DICHOTOMOUS, Study


def _wmean_var(x, w):
    """Frequency-weighted mean and variance (divisor sum(w) - 1)."""
    sw = w.sum()
    m = float(np.sum(w * x) / sw)
    if sw <= 1:
        return m, math.nan
    return m, float(np.sum(w * (x - m) ** 2) / (sw - 1))


def standardized_difference_continuous(treated_values, control_values, treated_weights=None,
                                       control_weights=None) -> float:
    """Mean difference over the root mean of the two group variances.

    Weights, when given, are frequency weights; unweighted groups use the
    usual n-1 sample variance.

    Raises
    ------
    Degenerate
        If both group variances are zero (or undefined).
    """
    xt = np.asarray(treated_values, dtype=float)
    xc = np.asarray(control_values, dtype=float)
    if xt.size == 0 or xc.size == 0:
        raise ValueError("both groups must be nonempty")
    wt = np.ones(xt.size) if treated_weights is None else np.asarray(treated_weights, dtype=float)
    wc = np.ones(xc.size) if control_weights is None else np.asarray(control_weights, dtype=float)
    mt, vt = _wmean_var(xt, wt)
    mc, vc = _wmean_var(xc, wc)
    if math.isnan(vt) or math.isnan(vc):
        raise Degenerate("each group needs at least two (weighted) subjects")
    denom = math.sqrt((vt + vc) / 2)
    if denom == 0:
        if mt == mc:
            raise Degenerate("both groups are constant")
        raise Degenerate("both groups are constant with different values")
    return (mt - mc) / denom


def standardized_difference_binary(p_treated: float, p_control: float) -> float:
    """Standardized difference of two proportions.

    Raises
    ------
    Degenerate
        If both proportions are 0 or 1.
    """
    pt, pc = float(p_treated), float(p_control)
    if not (0 <= pt <= 1 and 0 <= pc <= 1):
        raise ValueError("proportions must lie in [0, 1]")
    denom = math.sqrt((pt * (1 - pt) + pc * (1 - pc)) / 2)
    if denom == 0:
        raise Degenerate(f"proportions {pt} and {pc} leave a zero denominator")
    return (pt - pc) / denom


class BalanceRecord(NamedTuple):
    name: str
    kind: str
    d_unmatched: float
    d_matched: float
    degenerate_unmatched: bool = False
    degenerate_matched: bool = False


@dataclass(frozen=True)
class BalanceReport:
    records: tuple
    threshold: float
    method: str = "match"

    @property
    def n_over_unmatched(self) -> int:
        return sum(abs(r.d_unmatched) > self.threshold for r in self.records
                   if not r.degenerate_unmatched)

    @property
    def n_over_matched(self) -> int:
        return sum(abs(r.d_matched) > self.threshold for r in self.records
                   if not r.degenerate_matched)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=BalanceRecord._fields)


def _column_d(x, kind, wt, wc):
    if kind == DICHOTOMOUS:
        return standardized_difference_binary(np.sum(wt * x[0]) / wt.sum(),
                                              np.sum(wc * x[1]) / wc.sum())
    return standardized_difference_continuous(x[0], x[1], wt, wc)


def _group_d(study: Study, weights):
    t = weights[0] > 0
    c = weights[1] > 0
    out = []
    for j, kind in enumerate(study.covariate_kinds):
        col = study.covariates[:, j]
        try:
            out.append((_column_d((col[t], col[c]), kind, weights[0][t], weights[1][c]), False))
        except Degenerate:
            out.append((math.nan, True))
    return out


def balance_report(study: Study, match: MatchResult | None = None,
                   threshold: float = 0.1) -> BalanceReport:
    """Standardized difference of every covariate before and after matching.

    Matched differences weight each subject by
    :meth:`MatchResult.subject_weights`, so a match that keeps everyone
    with uniform weights reproduces the unmatched values exactly.
    Covariates whose difference has a zero denominator are reported as
    NaN and flagged degenerate.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    z = study.treatment
    unmatched = _group_d(study, ((z == 1).astype(float), (z == 0).astype(float)))
    if match is None:
        matched = unmatched
    else:
        w = match.subject_weights(study.n)
        matched = _group_d(study, (np.where(z == 1, w, 0.0), np.where(z == 0, w, 0.0)))
    records = tuple(
        BalanceRecord(name, kind, du, dm, fu, fm)
        for name, kind, (du, fu), (dm, fm) in zip(study.covariate_names, study.covariate_kinds,
                                                  unmatched, matched))
    return BalanceReport(records, threshold, match.method if match is not None else "unmatched")


def love_plot_frame(study: Study, matches: Sequence[MatchResult]) -> pd.DataFrame:
    """Long table of absolute standardized differences, ``unmatched`` rows first."""
    rows = []
    base = balance_report(study)
    rows += [(r.name, "unmatched", abs(r.d_unmatched)) for r in base.records]
    for m in matches:
        rep = balance_report(study, m)
        rows += [(r.name, m.method, abs(r.d_matched)) for r in rep.records]
    return pd.DataFrame(rows, columns=["covariate", "method", "abs_standardized_difference"])


_PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f")


def write_love_svg(frame: pd.DataFrame, path: str | os.PathLike, threshold: float = 0.1) -> None:
    """Dot plot of ``love_plot_frame`` output: one row per covariate, one colour per method."""
    covs = list(dict.fromkeys(frame["covariate"]))
    methods = list(dict.fromkeys(frame["method"]))
    vals = frame["abs_standardized_difference"].to_numpy(dtype=float)
    xmax = max(float(np.nanmax(vals)) if np.isfinite(vals).any() else 0.0, threshold) * 1.1
    left, top, row_h, width = 160, 30, 18, 420
    height = top + row_h * len(covs) + 30 + 16 * len(methods)

    def xpos(v):
        return left + width * v / xmax

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 20}" '
           f'height="{height}" font-family="sans-serif" font-size="11">']
    out.append(f'<line x1="{xpos(threshold):.2f}" y1="{top - 10}" x2="{xpos(threshold):.2f}" '
               f'y2="{top + row_h * len(covs)}" stroke="#999" stroke-dasharray="4,3"/>')
    for k, cov in enumerate(covs):
        y = top + row_h * k + row_h / 2
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{escape(str(cov))}</text>')
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + width}" y2="{y:.1f}" stroke="#eee"/>')
    for m_i, m in enumerate(methods):
        colour = _PALETTE[m_i % len(_PALETTE)]
        sub = frame[frame["method"] == m]
        for cov, v in zip(sub["covariate"], sub["abs_standardized_difference"]):
            if not np.isfinite(v):
                continue
            y = top + row_h * covs.index(cov) + row_h / 2
            out.append(f'<circle cx="{xpos(v):.2f}" cy="{y:.1f}" r="3.5" fill="{colour}"/>')
        ly = top + row_h * len(covs) + 24 + 16 * m_i
        out.append(f'<circle cx="{left}" cy="{ly - 4}" r="3.5" fill="{colour}"/>')
        out.append(f'<text x="{left + 8}" y="{ly}">{escape(str(m))}</text>')
    out.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out))
