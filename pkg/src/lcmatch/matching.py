"""Six treated/control matching algorithms.

Every matcher returns a :class:`MatchResult`: clusters of subject indices
with normalized analysis weights, plus the treated and control subjects
left out of the matched sample. Ties are always broken toward the lowest
subject index.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats

from .assignment import solve_assignment
from .components import connected_components
from .distance import (CaliperSpec, MahalanobisContext, caliper_dissimilarity_matrix,
                       euclidean_matrix, logit_sd_width, pooled_covariance, propensity_logit, propensity_model)
from .errors import InfeasibleAssignment
from .study import Study

METHODS = ("nnwr", "nnwor", "opt", "full", "gm", "lc")
ONE_TO_ONE = ("nnwr", "nnwor", "opt", "gm")


class Cluster(NamedTuple):
    treated: tuple
    controls: tuple
    weight: float

    @property
    def size(self) -> int:
        return len(self.treated) + len(self.controls)


@dataclass(frozen=True)
class MatchResult:
    clusters: tuple
    discarded_treated: tuple
    discarded_controls: tuple
    method: str
    total_distance: float = math.nan
    info: dict = field(default_factory=dict, compare=False)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.clusters])

    def matched_treated(self) -> np.ndarray:
        return np.unique(np.array([i for c in self.clusters for i in c.treated], dtype=int))

    def matched_controls(self) -> np.ndarray:
        return np.unique(np.array([j for c in self.clusters for j in c.controls], dtype=int))

    @property
    def n_matched(self) -> int:
        """Distinct subjects in the matched sample."""
        return self.matched_treated().size + self.matched_controls().size

    def subject_weights(self, n: int) -> np.ndarray:
        """Per-subject analysis weights, as frequency weights.

        Within a cluster, the cluster weight is split evenly among its
        treated members and, separately, among its control members. The
        accumulated weights of each role are then rescaled to sum to the
        number of distinct matched subjects of that role, so a single
        cluster holding everybody gives every subject weight 1.
        """
        wt = np.zeros(n)
        wc = np.zeros(n)
        for c in self.clusters:
            for i in c.treated:
                wt[i] += c.weight / len(c.treated)
            for j in c.controls:
                wc[j] += c.weight / len(c.controls)
        for w in (wt, wc):
            s = w.sum()
            if s > 0:
                w *= np.count_nonzero(w) / s
        return wt + wc

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, c in enumerate(self.clusters):
            rows += [(k, i, "treated", c.weight) for i in c.treated]
            rows += [(k, j, "control", c.weight) for j in c.controls]
        rows += [(-1, i, "treated", 0.0) for i in self.discarded_treated]
        rows += [(-1, j, "control", 0.0) for j in self.discarded_controls]
        return pd.DataFrame(rows, columns=["cluster_id", "subject_index", "role", "weight"])

    def to_csv(self, path: str | os.PathLike) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def from_frame(cls, df: pd.DataFrame, method: str = "match") -> "MatchResult":
        missing = {"cluster_id", "subject_index", "role", "weight"} - set(df.columns)
        if missing:
            raise ValueError(f"match file lacks columns {sorted(missing)}")
        bad_roles = set(df["role"]) - {"treated", "control"}
        if bad_roles:
            raise ValueError(f"unknown roles {sorted(bad_roles)}")
        clusters = []
        kept = df[df["cluster_id"] >= 0]
        for _, g in kept.groupby("cluster_id", sort=True):
            weights = g["weight"].unique()
            if weights.size != 1:
                raise ValueError("rows of one cluster disagree on its weight")
            clusters.append(Cluster(
                tuple(int(i) for i in g.loc[g["role"] == "treated", "subject_index"]),
                tuple(int(j) for j in g.loc[g["role"] == "control", "subject_index"]),
                float(weights[0])))
        drop = df[df["cluster_id"] < 0]
        return cls(tuple(clusters),
                   tuple(int(i) for i in drop.loc[drop["role"] == "treated", "subject_index"]),
                   tuple(int(j) for j in drop.loc[drop["role"] == "control", "subject_index"]),
                   method)

    @classmethod
    def from_csv(cls, path: str | os.PathLike, method: str | None = None) -> "MatchResult":
        df = pd.read_csv(path)
        return cls.from_frame(df, method or os.path.splitext(os.path.basename(path))[0])


def _normalized(sizes) -> list[float]:
    total = math.fsum(sizes)
    return [s / total for s in sizes]


def _result_from_pairs(study: Study, pairs, method, dist=None, info=None) -> MatchResult:
    """Equal-weight 1:1 clusters from (treated subject, control subject) pairs."""
    pairs = list(pairs)
    weights = _normalized([2.0] * len(pairs)) if pairs else []
    clusters = tuple(Cluster((int(t),), (int(c),), w) for (t, c), w in zip(pairs, weights))
    used_t = {t for t, _ in pairs}
    used_c = {c for _, c in pairs}
    total = math.fsum(dist) if dist is not None else math.nan
    return MatchResult(
        clusters,
        tuple(int(i) for i in study.treated_index if i not in used_t),
        tuple(int(j) for j in study.control_index if j not in used_c),
        method, total, info or {})


def _distance(study: Study, ctx: MahalanobisContext | None, weights=None) -> np.ndarray:
    if ctx is None:
        ctx = pooled_covariance(study)
    x = study.covariates
    return ctx.pairwise(x[study.treated_index], x[study.control_index], weights)


def _treated_order(study: Study, order: str) -> np.ndarray:
    t = study.n_treated
    if order == "index":
        return np.arange(t)
    if order == "propensity":
        logits = propensity_logit(propensity_model(study), study.covariates[study.treated_index])
        return np.argsort(-logits, kind="stable")
    raise ValueError(f"unknown greedy order {order!r}")


def match_nnwr(study: Study, ctx: MahalanobisContext | None = None) -> MatchResult:
    """Nearest control for every treated subject; controls may be reused."""
    d = _distance(study, ctx)
    tidx, cidx = study.treated_index, study.control_index
    best = np.argmin(d, axis=1)
    pairs = [(tidx[r], cidx[best[r]]) for r in range(tidx.size)]
    return _result_from_pairs(study, pairs, "nnwr", d[np.arange(tidx.size), best])


def _greedy_pairs(d: np.ndarray, order) -> list[tuple[int, int]]:
    d = d.copy()
    out = []
    for r in order:
        if len(out) == d.shape[1]:
            break
        c = int(np.argmin(d[r]))
        out.append((int(r), c))
        d[:, c] = np.inf
    return out


def match_nnwor(study: Study, ctx: MahalanobisContext | None = None,
                order: str = "index") -> MatchResult:
    """Greedy 1:1 matching without replacement.

    Treated subjects are processed in ascending index order (or by
    descending propensity logit with ``order="propensity"``); each takes the
    nearest control not yet used. Surplus treated subjects are discarded.
    """
    d = _distance(study, ctx)
    rc = _greedy_pairs(d, _treated_order(study, order))
    tidx, cidx = study.treated_index, study.control_index
    pairs = sorted((tidx[r], cidx[c]) for r, c in rc)
    dist = [d[r, c] for r, c in sorted(rc)]
    return _result_from_pairs(study, pairs, "nnwor", dist)


def match_optimal(study: Study, ctx: MahalanobisContext | None = None) -> MatchResult:
    """1:1 matching minimizing the total Mahalanobis distance.

    Raises
    ------
    InfeasibleAssignment
        If there are fewer controls than treated subjects.
    """
    if study.n_controls < study.n_treated:
        raise InfeasibleAssignment(
            f"optimal 1:1 matching needs at least as many controls ({study.n_controls}) "
            f"as treated ({study.n_treated})")
    d = _distance(study, ctx)
    cols = solve_assignment(d)
    tidx, cidx = study.treated_index, study.control_index
    pairs = [(tidx[r], cidx[cols[r]]) for r in range(tidx.size)]
    return _result_from_pairs(study, pairs, "opt", d[np.arange(tidx.size), cols])


def match_full(study: Study, ctx: MahalanobisContext | None = None, max_ratio: int = 3,
               caliper_width: float | None = None, multiplier: float = 0.2,
               logits=None) -> MatchResult:
    """Variable-ratio (1:1 up to 1:``max_ratio``) matching under a propensity-logit caliper.

    Treated subjects, in ascending index order, take up to ``max_ratio``
    unused controls nearest in Mahalanobis distance among those whose
    propensity logit lies within ``caliper_width``. The default width is
    ``multiplier`` x SD of the fitted logits. Treated subjects with no
    admissible control are discarded. Cluster weights are proportional to
    cluster size.
    """
    if max_ratio < 1:
        raise ValueError("max_ratio must be >= 1")
    if logits is None:
        logits = propensity_logit(propensity_model(study), study.covariates)
    logits = np.asarray(logits, dtype=float)
    if caliper_width is None:
        caliper_width = logit_sd_width(logits, multiplier)
    d = _distance(study, ctx)
    tidx, cidx = study.treated_index, study.control_index
    lt, lc = logits[tidx], logits[cidx]
    free = np.ones(cidx.size, dtype=bool)

    groups, dist, dropped = [], [], []
    for r in range(tidx.size):
        ok = np.flatnonzero(free & (np.abs(lc - lt[r]) <= caliper_width))
        if ok.size == 0:
            dropped.append(int(tidx[r]))
            continue
        take = ok[np.argsort(d[r, ok], kind="stable")[:max_ratio]]
        free[take] = False
        groups.append((int(tidx[r]), tuple(int(j) for j in cidx[np.sort(take)])))
        dist.extend(d[r, take])

    weights = _normalized([1 + len(c) for _, c in groups]) if groups else []
    clusters = tuple(Cluster((t,), c, w) for (t, c), w in zip(groups, weights))
    return MatchResult(clusters, tuple(dropped), tuple(int(j) for j in cidx[free]), "full",
                       math.fsum(dist) if groups else math.nan,
                       {"caliper_width": float(caliper_width), "max_ratio": max_ratio})


# --------------------------------------------------------------------------
# Genetic matching
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneticConfig:
    population_size: int = 16
    generations: int = 10
    weight_bounds: tuple = (0.1, 10.0)
    seed: int = 0
    elite_fraction: float = 0.25
    mutation_scale: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        lo, hi = self.weight_bounds
        if not 0 < lo <= hi:
            raise ValueError("weight_bounds must be a positive interval")
        if not 0 < self.elite_fraction < 1:
            raise ValueError("elite_fraction must lie in (0, 1)")


def paired_balance_pvalues(study: Study, pairs) -> np.ndarray:
    """Paired t-test p-value per covariate over (treated, control) subject pairs.

    A covariate whose paired differences are all identical gets p = 1 when
    they are zero and p = 0 otherwise.
    """
    t = np.array([a for a, _ in pairs], dtype=int)
    c = np.array([b for _, b in pairs], dtype=int)
    x = study.covariates
    diff = x[t] - x[c]
    p = np.empty(x.shape[1])
    for k in range(x.shape[1]):
        dk = diff[:, k]
        if dk.size < 2 or np.all(dk == dk[0]):
            p[k] = 1.0 if dk.size == 0 or dk[0] == 0 else 0.0
        else:
            p[k] = stats.ttest_rel(x[t, k], x[c, k]).pvalue
    return p


def match_genetic(study: Study, config: GeneticConfig = GeneticConfig(),
                  ctx: MahalanobisContext | None = None) -> MatchResult:
    """Greedy matching under a weighted Mahalanobis metric with evolved weights.

    Each candidate vector of per-covariate weights scales the whitened
    coordinates; the candidate is scored by running greedy 1:1 matching
    and taking the smallest paired t-test p-value across covariates
    (larger is better). The search is seeded, keeps the best candidates
    unchanged each generation, and breeds the rest by tournament
    selection, uniform crossover and log-normal mutation. The first
    candidate is always the equal-weight metric, so the result never
    balances worse than plain greedy Mahalanobis matching.
    """
    if study.n_controls < study.n_treated:
        raise InfeasibleAssignment("genetic matching needs at least as many controls as treated")
    if ctx is None:
        ctx = pooled_covariance(study)
    rng = np.random.default_rng(config.seed)
    P = study.n_covariates
    lo, hi = np.log(config.weight_bounds)
    zt = ctx.transform(study.covariates[study.treated_index])
    zc = ctx.transform(study.covariates[study.control_index])
    tidx, cidx = study.treated_index, study.control_index
    order = np.arange(tidx.size)
    cache = {}

    def evaluate(w):
        key = w.tobytes()
        if key not in cache:
            s = np.sqrt(w)
            rc = _greedy_pairs(euclidean_matrix(zt * s, zc * s), order)
            pairs = [(int(tidx[r]), int(cidx[c])) for r, c in rc]
            cache[key] = (float(np.min(paired_balance_pvalues(study, pairs))), rc)
        return cache[key][0]

    def evaluate_all(pop):
        todo = [w for w in pop if w.tobytes() not in cache]
        if config.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(config.threads) as ex:
                list(ex.map(evaluate, todo))
        for w in todo:
            evaluate(w)
        return np.array([evaluate(w) for w in pop])

    pop = [np.ones(P)] + [np.exp(rng.uniform(lo, hi, P)) for _ in range(config.population_size - 1)]
    fit = evaluate_all(pop)
    n_elite = max(1, int(round(config.elite_fraction * config.population_size)))
    history = [float(fit.max())]
    for _ in range(config.generations):
        rank = np.argsort(-fit, kind="stable")
        nxt = [pop[i] for i in rank[:n_elite]]
        while len(nxt) < config.population_size:
            a, b = (min(rng.integers(0, len(pop), 2), key=lambda i: (-fit[i], i)) for _ in range(2))
            mask = rng.random(P) < 0.5
            child = np.where(mask, pop[a], pop[b])
            child = child * np.exp(config.mutation_scale * rng.standard_normal(P))
            nxt.append(np.exp(np.clip(np.log(child), lo, hi)))
        pop = nxt
        fit = evaluate_all(pop)
        history.append(float(fit.max()))

    best = int(np.argsort(-fit, kind="stable")[0])
    w_best = pop[best]
    rc = cache[w_best.tobytes()][1]
    d = ctx.pairwise(study.covariates[tidx], study.covariates[cidx])
    pairs = sorted((tidx[r], cidx[c]) for r, c in rc)
    dist = [d[r, c] for r, c in sorted(rc)]
    return _result_from_pairs(study, pairs, "gm", dist,
                              {"weights": w_best.tolist(), "fitness": float(fit[best]),
                               "history": history})


# --------------------------------------------------------------------------
# Largest caliper matching
# --------------------------------------------------------------------------

def acceptability_graph(study: Study, calipers: CaliperSpec) -> np.ndarray:
    """Boolean (treated x control) matrix of pairs with dissimilarity <= 1."""
    x = study.covariates
    return caliper_dissimilarity_matrix(x[study.treated_index], x[study.control_index],
                                        calipers) <= 1.0


def match_largest_caliper(study: Study, calipers: CaliperSpec) -> MatchResult:
    """Cluster subjects joined by acceptable treated-control pairs.

    Two subjects share a cluster when they are connected through a chain
    of acceptable pairs. Clusters are weighted by their share of all
    clustered subjects; subjects with no acceptable partner are discarded.
    """
    if len(calipers) != study.n_covariates:
        raise ValueError(f"{len(calipers)} calipers for {study.n_covariates} covariates")
    tidx, cidx = study.treated_index, study.control_index
    nt = tidx.size
    rows, cols = np.nonzero(acceptability_graph(study, calipers))
    label = connected_components(nt + cidx.size, rows, nt + cols)

    linked = np.zeros(nt + cidx.size, dtype=bool)
    linked[rows] = True
    linked[nt + cols] = True
    members = {}
    for node in np.flatnonzero(linked):
        members.setdefault(int(label[node]), []).append(int(node))

    groups = []
    for nodes in members.values():
        t = tuple(sorted(int(tidx[k]) for k in nodes if k < nt))
        c = tuple(sorted(int(cidx[k - nt]) for k in nodes if k >= nt))
        groups.append((min(t[0], c[0]), t, c))
    groups.sort()
    weights = _normalized([len(t) + len(c) for _, t, c in groups]) if groups else []
    clusters = tuple(Cluster(t, c, w) for (_, t, c), w in zip(groups, weights))
    return MatchResult(
        clusters,
        tuple(int(tidx[k]) for k in range(nt) if not linked[k]),
        tuple(int(cidx[k]) for k in range(cidx.size) if not linked[nt + k]),
        "lc", math.nan, {"n_edges": int(rows.size)})


def run_method(method: str, study: Study, *, ctx: MahalanobisContext | None = None,
               calipers: CaliperSpec | None = None, genetic: GeneticConfig | None = None,
               max_ratio: int = 3, multiplier: float = 0.2) -> MatchResult:
    """Dispatch on a method tag from :data:`METHODS`."""
    if method in ("nnwr", "nnwor", "opt", "full", "gm") and ctx is None:
        ctx = pooled_covariance(study)
    if method == "nnwr":
        return match_nnwr(study, ctx)
    if method == "nnwor":
        return match_nnwor(study, ctx)
    if method == "opt":
        return match_optimal(study, ctx)
    if method == "full":
        return match_full(study, ctx, max_ratio=max_ratio, multiplier=multiplier)
    if method == "gm":
        return match_genetic(study, genetic or GeneticConfig(), ctx)
    if method == "lc":
        return match_largest_caliper(study, calipers or CaliperSpec.default_for_study(study))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
