"""Deviance information criteria from posterior predictive simulation.

The surrogate likelihood is a product Gaussian kernel on standardized
statistics with a shared bandwidth epsilon, kept in density form, so

    -2 log K = d * log(2 pi eps^2) + sum_k ((s_k - s0_k) / (scale_k eps))^2

is minimized (not zero) at s = s0. The bandwidth is the rejection tolerance
of the pooled analysis, shared across compared models, so the constant term
cancels in model differences.

Variant 1 averages -2 log K over fresh draws from the posterior predictive;
variant 2 runs two Monte-Carlo levels, averaging -2 log of the per-theta
kernel mean. Both penalties subtract the same quantity recomputed at a
point estimate, reusing the predictive seed stream (common random numbers)
to cut the Monte-Carlo variance of the difference; a negative penalty is
reported as-is with a warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .core import ModelSpec, ParamVector, SummaryVector
from .inference import PosteriorSample, Standardization

_LOG_2PI = math.log(2.0 * math.pi)

# purpose tags for deriving independent sub-streams from one root seed
_TAG_DRAWS = 0
_TAG_SIMS = 1


@dataclass(frozen=True)
class KernelConfig:
    """Shared Gaussian-kernel settings: bandwidth and statistic scales."""

    epsilon: float
    scales: np.ndarray
    names: tuple

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not np.all(np.asarray(self.scales) > 0):
            raise ValueError("scales must be positive")

    @property
    def dim(self) -> int:
        return len(self.names)

    @staticmethod
    def from_analysis(std: Standardization, epsilon: float) -> "KernelConfig":
        return KernelConfig(epsilon=float(epsilon), scales=std.scales,
                            names=tuple(std.names))


@dataclass(frozen=True)
class DicReport:
    variant: int
    d_bar: float
    d_hat: float
    p_d: float
    dic: float
    aggregation: str
    n: int
    m: Optional[int]
    epsilon: float
    point_estimate: ParamVector
    warnings: tuple = ()

    def to_json(self) -> dict:
        return {"variant": self.variant, "dBar": self.d_bar, "dHat": self.d_hat,
                "pD": self.p_d, "dic": self.dic, "aggregation": self.aggregation,
                "n": self.n, "m": self.m, "epsilon": self.epsilon,
                "pointEstimate": self.point_estimate.as_dict(),
                "warnings": list(self.warnings)}


@dataclass(frozen=True)
class PredictiveCheck:
    names: tuple
    observed: np.ndarray
    quantiles: np.ndarray
    tail_probs: np.ndarray
    n: int

    def rows(self):
        for i, name in enumerate(self.names):
            yield (name, float(self.observed[i]), float(self.quantiles[i]),
                   float(self.tail_probs[i]))

    def tail_prob(self, name: str) -> float:
        return float(self.tail_probs[self.names.index(name)])


def neg2_log_kernel(s: SummaryVector, s0: SummaryVector, k: KernelConfig) -> float:
    if tuple(s.names) != tuple(s0.names) or tuple(s.names) != tuple(k.names):
        raise ValueError(f"statistic names differ: {s.names} vs {s0.names} vs {k.names}")
    return float(_neg2_matrix(s.values[None, :], s0.values, k)[0])


def _neg2_matrix(stats: np.ndarray, s0: np.ndarray, k: KernelConfig) -> np.ndarray:
    z = (stats - s0[None, :]) / (k.scales[None, :] * k.epsilon)
    return k.dim * math.log(2.0 * math.pi * k.epsilon ** 2) \
        + np.einsum("ij,ij->i", z, z)


def point_estimate(sample: PosteriorSample) -> ParamVector:
    """Weighted posterior mean on each parameter's transform scale."""
    if sample.adjusted is None:
        raise ValueError("pooled sample has no parameters")
    w = sample.weights
    total = w.sum()
    if total <= 0:
        raise ValueError("all-zero weights")
    vals = []
    for j, t in enumerate(sample.transforms):
        z = t.forward(sample.adjusted[:, j])
        vals.append(float(t.inverse(np.dot(w, z) / total)))
    return ParamVector(sample.param_names, vals, sample.transforms)


def _resample_params(sample: PosteriorSample, count: int, root) -> np.ndarray:
    """Weighted resampling with replacement from the adjusted sample."""
    cumw = np.cumsum(sample.weights)
    st = rng.seed_state(rng.child_seed(rng.as_seed(root), _TAG_DRAWS))
    idx = rng.weighted_indices(st, cumw, count)
    return sample.adjusted[idx]


def _simulate_matrix(model: ModelSpec, thetas: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    if model.simulate_batch is not None:
        return np.asarray(model.simulate_batch(thetas, seeds), dtype=float)
    out = np.empty((thetas.shape[0], len(model.stat_names)))
    for i in range(thetas.shape[0]):
        sv = model.simulate(model.param_vector(thetas[i]), int(seeds[i]))
        out[i] = sv.values
    return out


def _sim_seeds(root, count: int) -> np.ndarray:
    sim_root = rng.child_seed(rng.as_seed(root), _TAG_SIMS)
    return rng.child_seeds(sim_root, 0, count)


def _aggregate(values: np.ndarray, aggregation: str) -> float:
    if aggregation == "mean":
        return float(np.mean(values))
    if aggregation == "median":
        return float(np.median(values))
    raise ValueError(f"unknown aggregation {aggregation!r}")


def predictive_deviances(sample: PosteriorSample, model: ModelSpec, n: int,
                         k: KernelConfig, root) -> np.ndarray:
    """-2 log K for n fresh posterior-predictive simulations."""
    thetas = _resample_params(sample, n, root)
    stats = _simulate_matrix(model, thetas, _sim_seeds(root, n))
    return _neg2_matrix(stats, sample.observed.values, k)


def dbar1(sample: PosteriorSample, model: ModelSpec, n: int, k: KernelConfig,
          aggregation: str = "mean", root=0) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return _aggregate(predictive_deviances(sample, model, n, k, root), aggregation)


def _fixed_theta_deviances(theta_hat: ParamVector, model: ModelSpec, n: int,
                           k: KernelConfig, s0: SummaryVector, root) -> np.ndarray:
    thetas = np.repeat(np.asarray(theta_hat.values, dtype=float)[None, :], n, axis=0)
    stats = _simulate_matrix(model, thetas, _sim_seeds(root, n))
    return _neg2_matrix(stats, s0.values, k)


def dic1(sample: PosteriorSample, model: ModelSpec, n: int, k: KernelConfig,
         aggregation: str = "mean", root=0) -> DicReport:
    """DIC from the predictive average of the low-level deviance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d_bar = _aggregate(predictive_deviances(sample, model, n, k, root), aggregation)
    theta_hat = point_estimate(sample)
    d_hat = _aggregate(
        _fixed_theta_deviances(theta_hat, model, n, k, sample.observed, root),
        aggregation)
    p_d = d_bar - d_hat
    warnings = ("crn-dhat",) + (("negative-pd",) if p_d < 0 else ())
    return DicReport(variant=1, d_bar=d_bar, d_hat=d_hat, p_d=p_d,
                     dic=d_bar + p_d, aggregation=aggregation, n=n, m=None,
                     epsilon=k.epsilon, point_estimate=theta_hat,
                     warnings=warnings)


def _neg2_log_mean_kernel(neg2: np.ndarray) -> float:
    """-2 log( mean_j exp(-q_j / 2) ), computed stably."""
    h = -0.5 * neg2
    m = h.max()
    return float(-2.0 * (m + math.log(np.mean(np.exp(h - m)))))


def group_deviances(sample: PosteriorSample, model: ModelSpec, m: int, n: int,
                    k: KernelConfig, root) -> np.ndarray:
    """Per-theta marginal deviances -2 log mean_j K for m posterior draws."""
    thetas = _resample_params(sample, m, root)
    rep = np.repeat(thetas, n, axis=0)
    stats = _simulate_matrix(model, rep, _sim_seeds(root, m * n))
    neg2 = _neg2_matrix(stats, sample.observed.values, k).reshape(m, n)
    return np.array([_neg2_log_mean_kernel(neg2[i]) for i in range(m)])


def dbar2(sample: PosteriorSample, model: ModelSpec, m: int, n: int,
          k: KernelConfig, aggregation: str = "mean", root=0) -> float:
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return _aggregate(group_deviances(sample, model, m, n, k, root), aggregation)


def dic2(sample: PosteriorSample, model: ModelSpec, m: int, n: int,
         k: KernelConfig, aggregation: str = "mean", root=0) -> DicReport:
    """DIC with the marginalized (two-level Monte Carlo) deviance."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    d_bar = _aggregate(group_deviances(sample, model, m, n, k, root), aggregation)
    theta_hat = point_estimate(sample)
    d_hat = _neg2_log_mean_kernel(
        _fixed_theta_deviances(theta_hat, model, n, k, sample.observed, root))
    p_d = d_bar - d_hat
    warnings = ("crn-dhat",) + (("negative-pd",) if p_d < 0 else ())
    return DicReport(variant=2, d_bar=d_bar, d_hat=d_hat, p_d=p_d,
                     dic=d_bar + p_d, aggregation=aggregation, n=n, m=m,
                     epsilon=k.epsilon, point_estimate=theta_hat,
                     warnings=warnings)


def predictive_check(sample: PosteriorSample, model: ModelSpec, n: int,
                     root=0) -> PredictiveCheck:
    """Two-sided predictive tail probabilities per statistic.

    The observed quantile uses mid-ranking of ties:
    q = (#below + 0.5 #equal + 0.5) / (n + 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    thetas = _resample_params(sample, n, root)
    stats = _simulate_matrix(model, thetas, _sim_seeds(root, n))
    obs = sample.observed.values
    below = (stats < obs[None, :]).sum(axis=0)
    equal = (stats == obs[None, :]).sum(axis=0)
    q = (below + 0.5 * equal + 0.5) / (n + 1.0)
    tail = 2.0 * np.minimum(q, 1.0 - q)
    return PredictiveCheck(names=tuple(sample.observed.names), observed=obs,
                           quantiles=q, tail_probs=tail, n=n)
