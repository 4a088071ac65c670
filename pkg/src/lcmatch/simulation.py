"""Monte Carlo engine for comparing matching methods on simulated cohorts.

Five covariates drive both a logistic treatment model and a logistic
outcome model; the two intercepts are calibrated to hit a target treatment
prevalence and a target control-arm outcome incidence. Each replication
draws a cohort, runs every requested method and estimates the log odds
ratio; bias, empirical SD and RMSE summarize the replications.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from .distance import CaliperSpec, fit_logistic, pooled_covariance
from .errors import DegenerateDraw, LCMatchError, Separation
from .estimation import MethodMetrics, compute_metrics, estimate_log_or
from .matching import GeneticConfig, MatchResult, run_method
from .study import Study

DISTRIBUTIONS = ("indep-normal", "mv-normal", "mixed", "all-binary")
PREVALENCES = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35)
DEFAULT_BETAS = tuple(math.log(v) for v in (1.25, 1.5, 1.75, 2.0, 2.0))
N_COVARIATES = 5
MV_CORRELATION = 0.25

# "unmatched" = crude whole-cohort odds ratio; "adjusted" = whole-cohort
# outcome regression on treatment and all covariates.
REFERENCE_METHODS = ("unmatched", "adjusted")
SIM_METHODS = REFERENCE_METHODS + ("nnwr", "nnwor", "opt", "full", "gm", "lc")


@dataclass(frozen=True)
class Scenario:
    covariate_dist: str = "indep-normal"
    prevalence: float = 0.25
    n: int = 5000
    tau: float = 0.5
    baseline_incidence: float = 0.10
    betas: tuple = DEFAULT_BETAS

    def __post_init__(self):
        if self.covariate_dist not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.covariate_dist!r}; "
                             f"expected one of {DISTRIBUTIONS}")
        if not 0 < self.prevalence < 1:
            raise ValueError("prevalence must lie in (0, 1)")
        if not 0 < self.baseline_incidence < 1:
            raise ValueError("baseline_incidence must lie in (0, 1)")
        if self.n < 100:
            raise ValueError("n must be at least 100")
        if len(self.betas) != N_COVARIATES:
            raise ValueError(f"need {N_COVARIATES} betas")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))


def scenario_grid(**kwargs) -> list[Scenario]:
    """The 4 distributions x 6 prevalences factorial design."""
    return [Scenario(d, p, **kwargs) for d in DISTRIBUTIONS for p in PREVALENCES]


def generate_covariates(dist: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an n x 5 covariate matrix from one of :data:`DISTRIBUTIONS`."""
    if dist == "indep-normal":
        return rng.standard_normal((n, N_COVARIATES))
    if dist == "mv-normal":
        corr = np.full((N_COVARIATES, N_COVARIATES), MV_CORRELATION)
        np.fill_diagonal(corr, 1.0)
        return rng.standard_normal((n, N_COVARIATES)) @ np.linalg.cholesky(corr).T
    if dist == "mixed":
        x = np.empty((n, N_COVARIATES))
        x[:, :2] = rng.random((n, 2)) < 0.5
        x[:, 2:] = rng.standard_normal((n, 3))
        return x
    if dist == "all-binary":
        return (rng.random((n, N_COVARIATES)) < 0.5).astype(float)
    raise ValueError(f"unknown distribution {dist!r}")


def _bisect_intercept(linear, target, lo=-20.0, hi=20.0, iters=100):
    # mean(expit(b + linear)) is increasing in b
    for _ in range(iters):
        mid = (lo + hi) / 2
        if np.mean(expit(mid + linear)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return (lo + hi) / 2


def calibrate_treatment_intercept(scenario: Scenario, rng: np.random.Generator,
                                  calibration_n: int = 1_000_000) -> float:
    """Intercept making the mean treatment probability equal the target prevalence."""
    x = generate_covariates(scenario.covariate_dist, calibration_n, rng)
    return _bisect_intercept(x @ np.asarray(scenario.betas), scenario.prevalence)


def calibrate_outcome_intercept(scenario: Scenario, rng: np.random.Generator,
                                calibration_n: int = 1_000_000) -> float:
    """Intercept making the outcome incidence equal the baseline with nobody treated."""
    x = generate_covariates(scenario.covariate_dist, calibration_n, rng)
    return _bisect_intercept(x @ np.asarray(scenario.betas), scenario.baseline_incidence)


def simulate_dataset(scenario: Scenario, intercepts, rng: np.random.Generator,
                     max_redraws: int = 100) -> tuple[Study, int]:
    """Draw one cohort; returns ``(study, redraws)``.

    Cohorts without both treated and control subjects are redrawn from the
    same (advancing) stream; ``redraws`` counts them.
    """
    b0t, b0o = intercepts
    beta = np.asarray(scenario.betas)
    for redraws in range(max_redraws + 1):
        x = generate_covariates(scenario.covariate_dist, scenario.n, rng)
        lin = x @ beta
        z = (rng.random(scenario.n) < expit(b0t + lin)).astype(float)
        y = (rng.random(scenario.n) < expit(b0o + scenario.tau * z + lin)).astype(float)
        if 0 < z.sum() < scenario.n:
            names = tuple(f"x{j + 1}" for j in range(N_COVARIATES))
            kinds = tuple("dichotomous" if (scenario.covariate_dist == "all-binary"
                                            or (scenario.covariate_dist == "mixed" and j < 2))
                          else "continuous" for j in range(N_COVARIATES))
            return Study(x, z, y, names, kinds, "z", "y"), redraws
    raise DegenerateDraw(f"no cohort with both arms after {max_redraws} redraws")


def adjusted_log_or(study: Study) -> float:
    """Treatment coefficient of the outcome regressed on treatment and covariates."""
    model = fit_logistic(np.column_stack([study.treatment, study.covariates]), study.outcome)
    if model.separated:
        raise Separation("adjusted outcome model diverged")
    return float(model.coefficients[0])


@dataclass(frozen=True)
class MethodOptions:
    """Tunables passed to the matchers inside the simulation."""

    lc_sd_fraction: float = 0.4
    lc_binary_width: float = 0.5
    full_ratio: int = 3
    full_multiplier: float = 0.2
    genetic: GeneticConfig = GeneticConfig()
    ridge: float = 1e-8


@dataclass(frozen=True)
class RepRecord:
    rep: int
    method: str
    estimate: float
    retained: float
    treated_fraction: float
    error: str | None = None


def run_replication(scenario: Scenario, intercepts, methods: Sequence[str], seed: int, rep: int,
                    options: MethodOptions = MethodOptions()) -> list[RepRecord]:
    """One cohort, every method. Failures become records with ``error`` set."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, rep)))
    study, _ = simulate_dataset(scenario, intercepts, rng)
    ctx = None
    out = []
    for method in methods:
        try:
            if method == "unmatched":
                est, retained = estimate_log_or(study).log_odds_ratio, 1.0
            elif method == "adjusted":
                est, retained = adjusted_log_or(study), 1.0
            else:
                if ctx is None and method != "lc":
                    ctx = pooled_covariance(study, options.ridge)
                gen = replace(options.genetic, seed=options.genetic.seed + rep)
                match = run_method(
                    method, study, ctx=ctx,
                    calipers=CaliperSpec.default_for_study(study, options.lc_sd_fraction,
                                                           options.lc_binary_width),
                    genetic=gen, max_ratio=options.full_ratio,
                    multiplier=options.full_multiplier)
                est = estimate_log_or(study, match).log_odds_ratio
                retained = match.n_matched / study.n
            out.append(RepRecord(rep, method, est, retained, study.n_treated / study.n))
        except (LCMatchError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(RepRecord(rep, method, math.nan, math.nan, study.n_treated / study.n,
                                 type(exc).__name__))
    return out


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    metrics: dict
    n_reps: int
    seed: int
    treatment_intercept: float
    outcome_intercept: float
    failures: dict = field(default_factory=dict)
    records: tuple = field(default=(), repr=False)

    def estimates(self, method: str) -> np.ndarray:
        return np.array([r.estimate for r in self.records if r.method == method and r.error is None])

    def retained(self, method: str) -> np.ndarray:
        return np.array([r.retained for r in self.records if r.method == method and r.error is None])

    def rows(self) -> list[tuple]:
        s = self.scenario
        rows = []
        for method, m in self.metrics.items():
            rows.append((s.covariate_dist, s.prevalence, method,
                         m.bias if m else math.nan, m.empirical_sd if m else math.nan,
                         m.rmse if m else math.nan, self.n_reps, self.failures.get(method, 0)))
        return rows


RESULT_COLUMNS = ["dist", "prevalence", "method", "bias", "sd", "rmse", "n_reps", "failures"]


def results_frame(results: Sequence[ScenarioResult]) -> pd.DataFrame:
    return pd.DataFrame([row for r in results for row in r.rows()], columns=RESULT_COLUMNS)


def write_results(results: Sequence[ScenarioResult], path: str | os.PathLike) -> None:
    results_frame(results).to_csv(path, index=False, lineterminator="\n")


def calibrate(scenario: Scenario, seed: int, calibration_n: int = 1_000_000) -> tuple[float, float]:
    """Both intercepts, each from its own stream derived from ``seed``."""
    rt = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, 0)))
    ro = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, 1)))
    return (calibrate_treatment_intercept(scenario, rt, calibration_n),
            calibrate_outcome_intercept(scenario, ro, calibration_n))


def run_scenario(scenario: Scenario, methods: Sequence[str], n_reps: int, seed: int,
                 parallelism: int = 1, options: MethodOptions = MethodOptions(),
                 calibration_n: int = 1_000_000) -> ScenarioResult:
    """Calibrate once, then run ``n_reps`` replications of every method.

    Replication ``r`` draws from a stream keyed by ``(seed, r)``, so the
    result does not depend on ``parallelism``. Failed replications are
    excluded from the metrics and counted in ``failures``.
    """
    methods = list(methods)
    if not methods:
        raise ValueError("no methods requested")
    unknown = set(methods) - set(SIM_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    if n_reps < 2:
        raise ValueError("n_reps must be at least 2")
    intercepts = calibrate(scenario, seed, calibration_n)

    def one(rep):
        return run_replication(scenario, intercepts, methods, seed, rep, options)

    if parallelism > 1:
        with ThreadPoolExecutor(parallelism) as ex:
            per_rep = list(ex.map(one, range(n_reps)))
    else:
        per_rep = [one(r) for r in range(n_reps)]
    records = tuple(sorted((rec for recs in per_rep for rec in recs),
                           key=lambda r: (r.rep, methods.index(r.method))))

    metrics, failures = {}, {}
    for method in methods:
        ok = [r.estimate for r in records if r.method == method and r.error is None]
        failures[method] = sum(1 for r in records if r.method == method and r.error is not None)
        metrics[method] = compute_metrics(ok, scenario.tau) if len(ok) >= 2 else None
    return ScenarioResult(scenario, metrics, n_reps, seed, intercepts[0], intercepts[1],
                          failures, records)
