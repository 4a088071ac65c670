import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from lcmatch import Study, compute_metrics, estimate_log_or, mantel_haenszel_or
from lcmatch.errors import AllDegenerateStrata, EmptyMatch, NoOutcome, Separation
from lcmatch.estimation import effect_table, whole_sample
from lcmatch.matching import Cluster, MatchResult

from oracles import naive_metrics


def table_study(a, b, c, d):
    z = np.r_[np.ones(a + b), np.zeros(c + d)]
    y = np.r_[np.ones(a), np.zeros(b), np.ones(c), np.zeros(d)]
    return Study(np.arange(z.size, dtype=float), z, y)


def test_two_by_two_closed_form():
    s = table_study(10, 5, 4, 8)
    est = estimate_log_or(s)
    assert est.log_odds_ratio == pytest.approx(math.log(4.0), abs=1e-10)
    assert est.odds_ratio == pytest.approx(4.0)
    se = math.sqrt(1 / 10 + 1 / 5 + 1 / 4 + 1 / 8)
    assert est.ci_low == pytest.approx(4.0 * math.exp(-1.959963984540054 * se), rel=1e-8)
    assert est.ci_low <= est.odds_ratio <= est.ci_high
    assert est.n_effective == 27
    assert mantel_haenszel_or(s) == pytest.approx(4.0, rel=1e-14)


def test_two_identical_strata_same_mh():
    s = table_study(10, 5, 4, 8)
    t = np.flatnonzero(s.treatment == 1)
    c = np.flatnonzero(s.treatment == 0)
    # stratum 2 is a copy of stratum 1 built on a doubled cohort
    z = np.r_[s.treatment, s.treatment]
    y = np.r_[s.outcome, s.outcome]
    s2 = Study(np.arange(z.size, dtype=float), z, y)
    n = s.n
    m = MatchResult((Cluster(tuple(t), tuple(c), 0.5), Cluster(tuple(t + n), tuple(c + n), 0.5)),
                    (), (), "two")
    assert mantel_haenszel_or(s2, m) == pytest.approx(4.0, rel=1e-14)


def test_null_effect_large_sample():
    rng = np.random.default_rng(8)
    z = (rng.random(20_000) < 0.3).astype(float)
    y = (rng.random(20_000) < 0.2).astype(float)
    est = estimate_log_or(Study(rng.standard_normal(z.size), z, y))
    assert abs(est.log_odds_ratio) < 3 * est.standard_error


def test_mh_agrees_with_weighted_logistic_on_homogeneous_strata():
    rng = np.random.default_rng(21)
    for _ in range(5):
        sizes = rng.integers(20, 60, 8)
        rows = []
        clusters = []
        start = 0
        for k, size in enumerate(sizes):
            nt = size // 2
            z = np.r_[np.ones(nt), np.zeros(size - nt)]
            y = (rng.random(size) < expit(-0.5 + 0.7 * z)).astype(float)
            rows.append((z, y))
            idx = np.arange(start, start + size)
            clusters.append((tuple(idx[:nt]), tuple(idx[nt:]), float(size)))
            start += size
        z = np.concatenate([r[0] for r in rows])
        y = np.concatenate([r[1] for r in rows])
        total = sum(c[2] for c in clusters)
        m = MatchResult(tuple(Cluster(t, c, w / total) for t, c, w in clusters), (), (), "strata")
        s = Study(np.zeros(z.size), z, y)
        assert mantel_haenszel_or(s, m) == pytest.approx(estimate_log_or(s, m).odds_ratio, rel=0.10)


def test_errors():
    s = table_study(3, 3, 3, 3)
    with pytest.raises(NoOutcome):
        estimate_log_or(Study(s.covariates, s.treatment))
    with pytest.raises(EmptyMatch):
        estimate_log_or(s, MatchResult((), (), (), "none"))
    with pytest.raises(Separation):
        estimate_log_or(table_study(5, 0, 3, 3))
    with pytest.raises(AllDegenerateStrata):
        mantel_haenszel_or(table_study(0, 5, 3, 3))


def test_metrics_examples():
    m = compute_metrics([0.5, 0.5], 0.5)
    assert (m.bias, m.empirical_sd, m.rmse) == (0, 0, 0)
    m = compute_metrics([0.4, 0.6], 0.5)
    assert m.bias == pytest.approx(0, abs=1e-15)
    assert m.empirical_sd == pytest.approx(math.sqrt(0.02))
    assert m.rmse == pytest.approx(0.1)


@settings(max_examples=100)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=50), st.floats(-5, 5))
def test_metrics_match_naive_and_identity(est, tau):
    m = compute_metrics(est, tau)
    bias, sd, rmse = naive_metrics(est, tau)
    assert m.bias == pytest.approx(bias, abs=1e-9)
    assert m.empirical_sd == pytest.approx(sd, abs=1e-9)
    assert m.rmse == pytest.approx(rmse, abs=1e-9)
    n = len(est)
    assert m.rmse ** 2 == pytest.approx(m.bias ** 2 + (n - 1) / n * m.empirical_sd ** 2, abs=1e-9)


def test_effect_table_layout():
    s = table_study(10, 5, 4, 8)
    df = effect_table([estimate_log_or(s)])
    assert list(df.columns) == ["method", "OR", "ci_low", "ci_high"]
    assert df["method"].tolist() == ["unmatched"]
    assert whole_sample(s).clusters[0].size == s.n
