"""Distance kernels and logistic-model fitting.

Mahalanobis distance over a pooled covariance, the largest-caliper
dissimilarity (maximum over covariates of the caliper-scaled absolute
difference), and an IRLS logistic regression used both for propensity
scores and for outcome analysis.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (DegenerateCaliper, DimensionMismatch, RankDeficient,
                     SingularCovariance)
from .study import Study

DEFAULT_RIDGE = 1e-8
SEPARATION_BOUND = 30.0


# --------------------------------------------------------------------------
# Calipers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CaliperSpec:
    """Per-covariate acceptable-imbalance widths.

    A width of ``inf`` removes the covariate from the dissimilarity.
    """

    widths: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        w = np.array(self.widths, dtype=float, ndmin=1)
        if w.ndim != 1:
            raise ValueError("caliper widths must be a vector")
        if np.any(np.isnan(w)) or np.any(w <= 0):
            raise ValueError(f"caliper widths must be positive, got {w.tolist()}")
        w.setflags(write=False)
        object.__setattr__(self, "widths", w)
        names = tuple(self.names)
        if names and len(names) != w.size:
            raise ValueError("caliper names and widths differ in length")
        object.__setattr__(self, "names", names)

    def __len__(self):
        return self.widths.size

    def scaled(self, factor: float) -> "CaliperSpec":
        return CaliperSpec(self.widths * factor, self.names)

    @classmethod
    def for_study(cls, study: Study, widths: dict[str, float]) -> "CaliperSpec":
        """Build widths aligned with ``study`` columns; unlisted covariates get ``inf``."""
        unknown = set(widths) - set(study.covariate_names)
        if unknown:
            raise DimensionMismatch(f"calipers name unknown covariates {sorted(unknown)}")
        w = [float(widths.get(name, math.inf)) for name in study.covariate_names]
        return cls(np.array(w), study.covariate_names)

    @classmethod
    def default_for_study(cls, study: Study, sd_fraction: float = 0.4,
                          binary_width: float = 0.5) -> "CaliperSpec":
        """``sd_fraction`` x pooled SD for continuous columns, ``binary_width`` for 0/1 ones.

        A binary width below 1 forces exact agreement on that covariate.
        """
        sd = study.covariates.std(axis=0, ddof=1)
        w = np.where(np.asarray(study.covariate_kinds) == "dichotomous", binary_width,
                     sd_fraction * sd)
        w = np.where(w > 0, w, math.inf)
        return cls(w, study.covariate_names)


def read_calipers(path: str | os.PathLike) -> dict[str, float]:
    """Parse a ``name = width`` file. ``inf`` is accepted; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{os.fspath(path)}:{lineno}: expected 'name = width'")
            key, val = (s.strip() for s in line.split("=", 1))
            width = float(val)
            if not width > 0:
                raise ValueError(f"{os.fspath(path)}:{lineno}: width must be positive")
            out[key] = width
    return out


def write_calipers(calipers: CaliperSpec, path: str | os.PathLike) -> None:
    names = calipers.names or tuple(f"x{j + 1}" for j in range(len(calipers)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, w in zip(names, calipers.widths):
            fh.write(f"{name} = {'inf' if math.isinf(w) else repr(float(w))}\n")


def caliper_dissimilarity(x, y, calipers: CaliperSpec) -> float:
    """Largest caliper-scaled absolute difference between two covariate rows.

    A pair is an acceptable match when the result is at most 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.shape != calipers.widths.shape:
        raise DimensionMismatch(
            f"rows of shape {x.shape} and {y.shape} with {len(calipers)} calipers")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y) / calipers.widths))


def caliper_dissimilarity_matrix(a, b, calipers: CaliperSpec, chunk: int = 1024) -> np.ndarray:
    """Pairwise dissimilarity between rows of ``a`` (m x P) and ``b`` (k x P)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1] or a.shape[1] != len(calipers):
        raise DimensionMismatch("covariate count differs from caliper count")
    keep = np.flatnonzero(np.isfinite(calipers.widths))
    out = np.zeros((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        block = out[start:start + chunk]
        for p in keep:
            np.maximum(block, np.abs(a[start:start + chunk, p, None] - b[None, :, p])
                       / calipers.widths[p], out=block)
    return out


# --------------------------------------------------------------------------
# Mahalanobis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MahalanobisContext:
    inverse_covariance: np.ndarray
    regularization: float = 0.0
    whitener: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        inv = np.array(self.inverse_covariance, dtype=float, ndmin=2)
        if inv.shape[0] != inv.shape[1]:
            raise DimensionMismatch("inverse covariance must be square")
        if not np.allclose(inv, inv.T, rtol=1e-10, atol=0):
            raise ValueError("inverse covariance must be symmetric")
        inv = (inv + inv.T) / 2
        try:
            w = np.linalg.cholesky(inv)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("inverse covariance is not positive definite") from exc
        inv.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "inverse_covariance", inv)
        object.__setattr__(self, "whitener", w)

    @property
    def dim(self) -> int:
        return self.inverse_covariance.shape[0]

    def transform(self, x, weights=None) -> np.ndarray:
        """Map rows so that Euclidean distance equals Mahalanobis distance.

        ``weights`` rescales each whitened coordinate (squared-distance
        weights), which gives the weighted metric used by genetic matching.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} covariates, got {x.shape[-1]}")
        z = x @ self.whitener
        if weights is not None:
            z = z * np.sqrt(np.asarray(weights, dtype=float))
        return z

    def pairwise(self, a, b, weights=None) -> np.ndarray:
        """Mahalanobis distances between every row of ``a`` and every row of ``b``."""
        za = np.atleast_2d(self.transform(a, weights))
        zb = np.atleast_2d(self.transform(b, weights))
        return euclidean_matrix(za, zb)


def euclidean_matrix(a: np.ndarray, b: np.ndarray, chunk: int = 512) -> np.ndarray:
    # Direct differences (not the |a|^2+|b|^2-2ab expansion) so ties stay exact.
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        diff = a[start:start + chunk, None, :] - b[None, :, :]
        out[start:start + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def pooled_covariance(study: Study | np.ndarray, regularization: float = DEFAULT_RIDGE) -> MahalanobisContext:
    """Covariance over all subjects (treated and control together), ridge-inverted.

    Raises
    ------
    SingularCovariance
        If the regularized covariance is not positive definite.
    """
    if regularization < 0:
        raise ValueError("regularization must be nonnegative")
    x = study.covariates if isinstance(study, Study) else np.asarray(study, dtype=float)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    cov = cov + regularization * np.eye(cov.shape[0])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(
            f"covariance is singular (regularization={regularization})") from exc
    eye = np.eye(cov.shape[0])
    linv = np.linalg.solve(chol, eye)
    inv = linv.T @ linv
    if not np.all(np.isfinite(inv)):
        raise SingularCovariance("covariance inverse is not finite")
    return MahalanobisContext((inv + inv.T) / 2, regularization)


def mahalanobis(x, y, ctx: MahalanobisContext) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.shape != (ctx.dim,):
        raise DimensionMismatch(f"rows of shape {x.shape}, {y.shape} for a {ctx.dim}-d context")
    d = x - y
    return math.sqrt(max(float(d @ ctx.inverse_covariance @ d), 0.0))


# --------------------------------------------------------------------------
# Logistic regression
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    converged: bool
    covariance_of_estimates: np.ndarray
    separated: bool = False
    n_iter: int = 0
    loglik_trace: tuple = ()
    fitted: np.ndarray | None = field(default=None, repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.coefficients])

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance_of_estimates))

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def _loglik(eta, y, w):
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def fit_logistic(design, response, max_iter: int = 50, tol: float = 1e-10,
                 weights=None) -> LogisticModel:
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    An intercept column is prepended to ``design``. Steps are halved when
    needed so the log-likelihood never decreases. When any coefficient
    leaves [-30, 30] the fit stops with ``separated=True`` and
    ``converged=False``; estimates are still returned.

    Parameters
    ----------
    design : array_like, shape (n, K)
    response : array_like of {0, 1}, shape (n,)
    weights : array_like, shape (n,), optional
        Frequency weights.

    Raises
    ------
    RankDeficient
        If the intercept-augmented design lacks full column rank.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(response, dtype=float).ravel()
    n = y.size
    if x.shape[0] != n:
        raise DimensionMismatch(f"design has {x.shape[0]} rows, response {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,) or np.any(w < 0):
        raise ValueError("weights must be a nonnegative vector matching the response")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("response must be 0/1")
    active = w > 0
    if not (np.any(y[active] == 1) and np.any(y[active] == 0)):
        raise ValueError("response needs both classes")
    X = np.column_stack([np.ones(n), x])
    k = X.shape[1]
    if np.linalg.matrix_rank(X[active]) < k:
        raise RankDeficient(f"design of {k} columns (with intercept) is rank deficient")

    beta = np.zeros(k)
    eta = X @ beta
    ll = _loglik(eta, y, w)
    trace = [ll]
    converged = separated = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        score = X.T @ (w * (y - p))
        info = (X * (w * p * (1 - p))[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            separated = True
            break
        # a vanishing score with a large Newton step means estimates are running off
        if np.max(np.abs(score)) < tol and np.max(np.abs(step)) < 1e-4:
            converged = True
            it -= 1
            break
        t = 1.0
        while True:
            cand = beta + t * step
            eta_c = X @ cand
            ll_c = _loglik(eta_c, y, w)
            if ll_c >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            t /= 2
            if t < 1e-10:
                break
        if t < 1e-10:
            # no ascent direction left at machine precision
            converged = True
            break
        beta, eta, ll = cand, eta_c, ll_c
        trace.append(ll)
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            separated = True
            break
        if np.max(np.abs(t * step)) < tol:
            converged = True
            break

    if not (converged or separated):
        separated = bool(np.max(np.abs(X.T @ (w * (y - expit(eta)))))) < tol
    p = expit(eta)
    info = (X * (w * p * (1 - p))[:, None]).T @ X
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.inf)
    return LogisticModel(float(beta[0]), beta[1:].copy(), converged and not separated, cov,
                         separated, it, tuple(trace), p)


def propensity_logit(model: LogisticModel, row):
    """Linear predictor ``intercept + coefficients . row`` (rows may be stacked)."""
    row = np.asarray(row, dtype=float)
    out = model.intercept + row @ model.coefficients
    return float(out) if np.ndim(out) == 0 else out


def propensity_model(study: Study, **kwargs) -> LogisticModel:
    """Logistic model of treatment on all covariates."""
    return fit_logistic(study.covariates, study.treatment, **kwargs)


def logit_sd_width(logits, multiplier: float = 0.2) -> float:
    """``multiplier`` times the sample SD (n-1 divisor) of ``logits``."""
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    sd = float(np.std(np.asarray(logits, dtype=float), ddof=1))
    width = multiplier * sd
    if not width > 0:
        raise DegenerateCaliper("propensity logits are constant; caliper width is 0")
    return width


def logit_caliper_width(study: Study, multiplier: float = 0.2,
                        model: LogisticModel | None = None) -> float:
    """Caliper on the propensity logit: ``multiplier`` x SD of the fitted logits."""
    if model is None:
        model = propensity_model(study)
    return logit_sd_width(propensity_logit(model, study.covariates), multiplier)
