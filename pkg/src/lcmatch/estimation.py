"""Treatment-effect estimation on matched samples and simulation metrics."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import norm

from .distance import fit_logistic
from .errors import AllDegenerateStrata, EmptyMatch, NoOutcome, Separation
from .matching import Cluster, MatchResult
from .study import Study


@dataclass(frozen=True)
class EffectEstimate:
    log_odds_ratio: float
    odds_ratio: float
    ci_low: float
    ci_high: float
    method: str
    n_effective: int
    standard_error: float = math.nan


def whole_sample(study: Study) -> MatchResult:
    """A single cluster holding every subject: the unmatched analysis."""
    return MatchResult((Cluster(tuple(int(i) for i in study.treated_index),
                                tuple(int(j) for j in study.control_index), 1.0),),
                       (), (), "unmatched")


def estimate_log_or(study: Study, match: MatchResult | None = None,
                    level: float = 0.95) -> EffectEstimate:
    """Log odds ratio of outcome on treatment with a Wald confidence interval.

    Fits a logistic regression of the outcome on the treatment indicator
    over the matched subjects, each weighted by
    :meth:`MatchResult.subject_weights`. ``match=None`` analyses the whole
    cohort unweighted.

    Raises
    ------
    NoOutcome, EmptyMatch, Separation
    """
    if study.outcome is None:
        raise NoOutcome("study has no outcome column")
    if match is None:
        match = whole_sample(study)
    if not match.clusters:
        raise EmptyMatch(f"{match.method}: no matched clusters")
    w = match.subject_weights(study.n)
    keep = w > 0
    z, y, w = study.treatment[keep], study.outcome[keep], w[keep]
    cells = [w[(z == a) & (y == b)].sum() for a in (1, 0) for b in (1, 0)]
    if min(cells) == 0:
        raise Separation(f"{match.method}: a treatment-by-outcome cell is empty")
    model = fit_logistic(z, y, weights=w)
    if model.separated:
        raise Separation(f"{match.method}: logistic fit diverged")
    beta = float(model.coefficients[0])
    se = float(model.standard_errors[1])
    q = norm.ppf(0.5 + level / 2)
    return EffectEstimate(beta, math.exp(beta), math.exp(beta - q * se), math.exp(beta + q * se),
                          match.method, int(keep.sum()), se)


def mantel_haenszel_or(study: Study, match: MatchResult | None = None) -> float:
    """Mantel-Haenszel common odds ratio with clusters as strata.

    Raises
    ------
    AllDegenerateStrata
        If every stratum has an empty numerator or denominator product.
    """
    if study.outcome is None:
        raise NoOutcome("study has no outcome column")
    if match is None:
        match = whole_sample(study)
    if not match.clusters:
        raise EmptyMatch(f"{match.method}: no matched clusters")
    y = study.outcome
    num = den = 0.0
    for c in match.clusters:
        yt = y[list(c.treated)]
        yc = y[list(c.controls)]
        a, b = yt.sum(), yt.size - yt.sum()
        cc, d = yc.sum(), yc.size - yc.sum()
        size = yt.size + yc.size
        num += a * d / size
        den += b * cc / size
    if num == 0 or den == 0:
        raise AllDegenerateStrata(f"{match.method}: Mantel-Haenszel ratio is 0 or undefined")
    return num / den


@dataclass(frozen=True)
class MethodMetrics:
    bias: float
    empirical_sd: float
    rmse: float
    n_reps: int
    mean: float = math.nan


def compute_metrics(estimates, tau_true: float) -> MethodMetrics:
    """Bias, empirical SD (N-1 divisor) and root-mean-square error (N divisor)."""
    est = np.asarray(estimates, dtype=float)
    n = est.size
    if n < 2:
        raise ValueError("need at least two estimates")
    mean = float(np.mean(est))
    sd = float(np.sqrt(np.sum((est - mean) ** 2) / (n - 1)))
    rmse = float(np.sqrt(np.sum((est - tau_true) ** 2) / n))
    return MethodMetrics(mean - tau_true, sd, rmse, n, mean)


def effect_table(estimates: Sequence[EffectEstimate]) -> pd.DataFrame:
    return pd.DataFrame([(e.method, e.odds_ratio, e.ci_low, e.ci_high) for e in estimates],
                        columns=["method", "OR", "ci_low", "ci_high"])


def write_effect_table(estimates: Sequence[EffectEstimate], path: str | os.PathLike) -> None:
    effect_table(estimates).to_csv(path, index=False, lineterminator="\n")
