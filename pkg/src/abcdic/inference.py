"""Rejection ABC, local-linear regression adjustment and model probabilities.

Distances are Euclidean on statistics standardized by 1.4826 * MAD (with a
sample-sd fallback, then 1.0, for degenerate columns). The tolerance is the
empirical quantile of the distances at the requested acceptance rate, ties
included. Accepted draws carry Epanechnikov weights 1 - (d/eps)^2.

When several models are compared, standardization and the tolerance come
from the pooled table; the count and weighted multinomial-logistic model
probability estimators both condition on that pooled accepted set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import ParamVector, ReferenceTable, SummaryVector

ALL = "ALL"

_MAD_TO_SD = 1.4826


class TooFewAcceptances(ValueError):
    pass


class IRLSError(RuntimeError):
    """Multinomial logistic fit failed to converge."""

    def __init__(self, message, *, coef, grad_norm, iterations):
        super().__init__(message)
        self.coef = coef
        self.grad_norm = grad_norm
        self.iterations = iterations


@dataclass(frozen=True)
class Standardization:
    """Per-statistic positive scale factors."""

    names: tuple
    scales: np.ndarray
    method: str = "mad-sd-fallback"
    source: str = "pooled"


@dataclass(frozen=True)
class PosteriorSample:
    """Accepted draws for one model (or the pooled accepted set).

    ``raw`` are the accepted parameter values, ``adjusted`` the
    regression-corrected ones (equal to ``raw`` until an adjustment is
    applied). For the pooled sample (``model == ALL``) parameters are not
    comparable across rows, so both are None and only labels, weights and
    distances are populated.
    """

    model: str
    observed: SummaryVector
    param_names: Optional[tuple]
    transforms: Optional[tuple]
    raw: Optional[np.ndarray]
    adjusted: Optional[np.ndarray]
    weights: np.ndarray
    distances: np.ndarray
    row_index: np.ndarray
    labels: Optional[np.ndarray]
    tolerance: float
    standardization: Standardization
    acceptance_rate: float
    adjust: str = "none"

    @property
    def n_accepted(self) -> int:
        return int(self.weights.shape[0])

    def param_column(self, name: str, adjusted: bool = True) -> np.ndarray:
        mat = self.adjusted if adjusted else self.raw
        if mat is None:
            raise ValueError("pooled sample has no parameter columns")
        return mat[:, self.param_names.index(name)]


@dataclass(frozen=True)
class ModelProbabilities:
    labels: tuple
    probs: np.ndarray
    method: str  # "count" | "mnlogistic"
    bayes_factors: np.ndarray  # probs[i]/probs[j]; inf where probs[j] == 0
    flags: tuple = ()

    def prob(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])

    def to_json(self) -> dict:
        bf = [[(None if math.isinf(v) else v) for v in row]
              for row in self.bayes_factors.tolist()]
        return {"labels": list(self.labels),
                "probs": self.probs.tolist(),
                "method": self.method,
                "bayesFactors": bf,
                "flags": list(self.flags)}


def scales_from_matrix(stats: np.ndarray) -> np.ndarray:
    med = np.median(stats, axis=0)
    mad = np.median(np.abs(stats - med), axis=0) * _MAD_TO_SD
    sd = np.std(stats, axis=0, ddof=1) if stats.shape[0] > 1 else np.zeros(stats.shape[1])
    scales = np.where(mad > 0, mad, np.where(sd > 0, sd, 1.0))
    return scales


def standardize(table: ReferenceTable, model: Optional[str] = None) -> Standardization:
    """MAD-based scales from the pooled table (or one model's block)."""
    if model is None or model == ALL:
        stats, source = table.stats, "pooled"
    else:
        stats, source = table.block(model).stats, "per-model"
    return Standardization(names=tuple(table.stat_names),
                           scales=scales_from_matrix(stats), source=source)


def distance(s: SummaryVector, s0: SummaryVector, std: Standardization) -> float:
    if tuple(s.names) != tuple(s0.names) or tuple(s.names) != tuple(std.names):
        raise ValueError(f"statistic names differ: {s.names} vs {s0.names} vs {std.names}")
    z = (s.values - s0.values) / std.scales
    return float(np.sqrt(np.dot(z, z)))


def _distances(stats: np.ndarray, s0: np.ndarray, scales: np.ndarray) -> np.ndarray:
    z = (stats - s0[None, :]) / scales[None, :]
    return np.sqrt(np.einsum("ij,ij->i", z, z))


def _epanechnikov(d: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        # all accepted rows sit exactly at the observation
        return np.ones_like(d)
    w = 1.0 - (d / eps) ** 2
    w[w < 0] = 0.0
    if not np.any(w > 0):
        # every accepted row is tied at the threshold; fall back to uniform
        # weights rather than returning a degenerate all-zero sample
        return np.ones_like(d)
    return w


def reject(table: ReferenceTable, s0: SummaryVector, rate: float,
           model: str = ALL, std: Optional[Standardization] = None) -> PosteriorSample:
    """Rejection step at a target acceptance rate.

    The tolerance is the ``floor(rate * N)``-th smallest distance over the
    selected rows; every row at or below it is accepted (threshold ties are
    all kept).
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    if tuple(s0.names) != tuple(table.stat_names):
        raise ValueError(f"observed names {s0.names} != table {table.stat_names}")
    if std is None:
        std = standardize(table)

    if model == ALL:
        stats = table.stats
        row_index = table.row_index
        labels = table.row_labels
    else:
        blk = table.block(model)
        stats = blk.stats
        row_index = blk.row_index
        labels = None

    n = stats.shape[0]
    if rate * n < 2:
        raise TooFewAcceptances(
            f"rate {rate} over {n} rows yields fewer than 2 acceptances")
    k = int(math.floor(rate * n + 1e-9))
    d = _distances(stats, s0.values, std.scales)
    eps = float(np.partition(d, k - 1)[k - 1])
    acc = d <= eps
    d_acc = d[acc]
    order = np.argsort(d_acc, kind="stable")
    d_acc = d_acc[order]
    idx_acc = row_index[acc][order]
    weights = _epanechnikov(d_acc, eps)

    if model == ALL:
        raw = adjusted = None
        names = transforms = None
        acc_labels = labels[acc][order]
    else:
        raw = blk.params[acc][order]
        adjusted = raw
        names, transforms = blk.param_names, blk.transforms
        acc_labels = None

    return PosteriorSample(
        model=model, observed=s0, param_names=names, transforms=transforms,
        raw=raw, adjusted=adjusted, weights=weights, distances=d_acc,
        row_index=idx_acc, labels=acc_labels, tolerance=eps,
        standardization=std, acceptance_rate=float(acc.sum()) / n)


def adjust_loclinear(sample: PosteriorSample, table: ReferenceTable,
                     s0: Optional[SummaryVector] = None) -> PosteriorSample:
    """Local-linear regression adjustment theta* = theta - b^T (s - s0).

    Each parameter is regressed, on its unconstrained transform scale, on
    the standardized statistic deviations with the sample's Epanechnikov
    weights; fitted slopes transport every accepted draw to s = s0. A tiny
    ridge term (1e-8 * trace / p) keeps singular designs solvable.
    """
    if sample.model == ALL:
        raise ValueError("adjustment needs a single-model sample")
    if s0 is None:
        s0 = sample.observed
    blk = table.block(sample.model)
    d = len(table.stat_names)
    if sample.n_accepted <= d + 1:
        raise TooFewAcceptances(
            f"{sample.n_accepted} accepted rows cannot support {d} regressors; "
            "increase the acceptance rate")

    pos = {int(r): i for i, r in enumerate(blk.row_index)}
    take = np.array([pos[int(r)] for r in sample.row_index], dtype=np.int64)
    x = (blk.stats[take] - s0.values[None, :]) / sample.standardization.scales[None, :]

    z = np.column_stack([t.forward(sample.raw[:, j])
                         for j, t in enumerate(sample.transforms)])
    a = np.column_stack([np.ones(x.shape[0]), x])
    w = sample.weights
    awa = (a * w[:, None]).T @ a
    ridge = 1e-8 * np.trace(awa) / awa.shape[0]
    awa[np.diag_indices_from(awa)] += ridge
    awz = (a * w[:, None]).T @ z
    beta = np.linalg.solve(awa, awz)  # rows: intercept then slopes
    z_adj = z - x @ beta[1:, :]
    adjusted = np.column_stack([t.inverse(z_adj[:, j])
                                for j, t in enumerate(sample.transforms)])
    return replace(sample, adjusted=adjusted, adjust="loclinear")


def _bayes_factors(probs: np.ndarray):
    k = probs.shape[0]
    bf = np.empty((k, k))
    flags = []
    for i in range(k):
        for j in range(k):
            if probs[j] == 0.0:
                bf[i, j] = np.inf if probs[i] > 0 else 1.0
                if probs[i] > 0:
                    flags.append(f"bf-infinite:{i},{j}")
            else:
                bf[i, j] = probs[i] / probs[j]
    return bf, tuple(flags)


def model_probs_count(table: ReferenceTable, s0: SummaryVector,
                      rate: float) -> ModelProbabilities:
    """Posterior model probabilities as acceptance-count fractions."""
    if len(table.labels) < 2:
        raise ValueError("need at least two models")
    pooled = reject(table, s0, rate, model=ALL)
    counts = np.array([(pooled.labels == lab).sum() for lab in table.labels],
                      dtype=float)
    total = counts.sum()
    if total == 0:
        raise TooFewAcceptances("no acceptances at this rate")
    probs = counts / total
    bf, flags = _bayes_factors(probs)
    return ModelProbabilities(tuple(table.labels), probs, "count", bf, flags)


def _softmax_rows(u: np.ndarray) -> np.ndarray:
    m = u.max(axis=1, keepdims=True)
    e = np.exp(u - m)
    return e / e.sum(axis=1, keepdims=True)


def fit_weighted_mnlogit(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                         n_classes: int, penalty: float = 1e-6,
                         max_iter: int = 100, tol: float = 1e-8):
    """Weighted multinomial logistic regression by Newton iteration.

    Baseline parameterization (last class fixed at zero); the L2 penalty on
    all coefficients guards against complete separation. Returns the
    (n_classes-1, p+1) coefficient matrix (intercept first).
    """
    n, p = x.shape
    a = np.column_stack([np.ones(n), x])
    q = p + 1
    kk = n_classes - 1
    beta = np.zeros((kk, q))
    wsum = float(w.sum())
    y_onehot = np.zeros((n, n_classes))
    y_onehot[np.arange(n), y] = 1.0

    def negloglik(b):
        u = np.column_stack([a @ b.T, np.zeros(n)])
        lse = np.log(np.exp(u - u.max(axis=1, keepdims=True)).sum(axis=1)) \
            + u.max(axis=1)
        ll = np.sum(w * (np.sum(y_onehot * u, axis=1) - lse))
        return -ll + 0.5 * penalty * np.sum(b * b)

    nll = negloglik(beta)
    for it in range(max_iter):
        u = np.column_stack([a @ beta.T, np.zeros(n)])
        pr = _softmax_rows(u)
        grad = np.empty((kk, q))
        for c in range(kk):
            grad[c] = -((w * (y_onehot[:, c] - pr[:, c])) @ a) + penalty * beta[c]
        gnorm = float(np.abs(grad).max())
        if gnorm <= tol * (1.0 + wsum):
            return beta
        # full (kk*q) x (kk*q) Hessian of the penalized negative log-likelihood
        h = np.zeros((kk * q, kk * q))
        for c in range(kk):
            for c2 in range(kk):
                wcc = w * pr[:, c] * ((1.0 if c == c2 else 0.0) - pr[:, c2])
                h[c * q:(c + 1) * q, c2 * q:(c2 + 1) * q] = (a * wcc[:, None]).T @ a
        h[np.diag_indices_from(h)] += penalty
        step = np.linalg.solve(h, grad.reshape(-1)).reshape(kk, q)
        scale = 1.0
        for _ in range(30):
            cand = beta - scale * step
            cand_nll = negloglik(cand)
            if cand_nll <= nll + 1e-12:
                beta, nll = cand, cand_nll
                break
            scale *= 0.5
        else:
            raise IRLSError("step search failed", coef=beta,
                            grad_norm=gnorm, iterations=it)
    u = np.column_stack([a @ beta.T, np.zeros(n)])
    pr = _softmax_rows(u)
    grad = np.empty((kk, q))
    for c in range(kk):
        grad[c] = -((w * (y_onehot[:, c] - pr[:, c])) @ a) + penalty * beta[c]
    raise IRLSError(f"no convergence after {max_iter} iterations",
                    coef=beta, grad_norm=float(np.abs(grad).max()),
                    iterations=max_iter)


def model_probs_mnlogistic(table: ReferenceTable, s0: SummaryVector,
                           rate: float) -> ModelProbabilities:
    """Weighted multinomial-logistic model probabilities evaluated at s0.

    The model indicator of the pooled accepted rows is regressed on the
    standardized statistic deviations; the fitted class probabilities at
    zero deviation (s = s0) are returned. Constant columns carry no local
    information and are dropped from the design.
    """
    if len(table.labels) < 2:
        raise ValueError("need at least two models")
    pooled = reject(table, s0, rate, model=ALL)
    labels = tuple(table.labels)
    present = [lab for lab in labels if (pooled.labels == lab).any()]
    if len(present) < 2:
        # one class swallowed the accepted set: degenerate but well-defined
        probs = np.array([1.0 if lab == present[0] else 0.0 for lab in labels])
        bf, flags = _bayes_factors(probs)
        return ModelProbabilities(labels, probs, "mnlogistic", bf,
                                  flags + ("single-class",))

    stats = table.stats
    pos = {int(r): i for i, r in enumerate(table.row_index)}
    take = np.array([pos[int(r)] for r in pooled.row_index], dtype=np.int64)
    x = (stats[take] - s0.values[None, :]) / pooled.standardization.scales[None, :]
    keep = np.ptp(x, axis=0) > 0
    x = x[:, keep]

    class_of = {lab: i for i, lab in enumerate(present)}
    y = np.array([class_of[lab] for lab in pooled.labels], dtype=np.int64)
    beta = fit_weighted_mnlogit(x, y, pooled.weights, len(present))

    u0 = np.append(beta[:, 0], 0.0)  # design at s0 is all-zero: intercepts only
    e = np.exp(u0 - u0.max())
    p_present = e / e.sum()
    probs = np.zeros(len(labels))
    for lab, pv in zip(present, p_present):
        probs[labels.index(lab)] = pv
    bf, flags = _bayes_factors(probs)
    return ModelProbabilities(labels, probs, "mnlogistic", bf, flags)
