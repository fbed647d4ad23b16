"""Gaussian-versus-Laplace toy experiment pieces.

Both models reduce a sample of 20 i.i.d. draws to four moments
(mean, sd, skewness, excess kurtosis). The Gaussian model's parameter is
(mu, sigma2) with mu ~ N(2, 10^2) and sigma drawn as the reciprocal of a
unit exponential (sigma2 is recorded, log-transformed for adjustment). The
Laplace model has a fixed location of 3 and a unit-exponential prior on
its rate. The canned observation is s0 = (2.00, 3.11, -0.78, 0.14).

sd uses the n-1 divisor; skewness and kurtosis use n-divisor central
moments, with kurtosis reported as excess (Gaussian -> 0).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from . import rng
from .core import LOG, IDENTITY, ModelSpec, ParamDef, SummaryVector
from .distributions import PriorSpec, inverse_gamma_cdf

STAT_NAMES = ("mean", "sd", "skew", "kurt")

TOY_SAMPLE_SIZE = 20
TOY_OBSERVED = SummaryVector(STAT_NAMES, (2.00, 3.11, -0.78, 0.14))
LAPLACE_LOCATION = 3.0

# data-generating truth for replicated studies
TRUE_MU = 2.0
TRUE_SIGMA = 3.0


@njit(cache=True)
def _moments4(x):
    n = x.shape[0]
    mean = 0.0
    for i in range(n):
        mean += x[i]
    mean /= n
    m2 = 0.0
    m3 = 0.0
    m4 = 0.0
    for i in range(n):
        d = x[i] - mean
        d2 = d * d
        m2 += d2
        m3 += d2 * d
        m4 += d2 * d2
    m2 /= n
    m3 /= n
    m4 /= n
    sd = np.sqrt(m2 * n / (n - 1.0))
    skew = m3 / m2 ** 1.5
    kurt = m4 / (m2 * m2) - 3.0
    return mean, sd, skew, kurt


@njit(cache=True)
def _gaussian_stats(mu, sigma, n, seed):
    st = rng.seed_state(seed)
    x = np.empty(n)
    for i in range(n):
        x[i] = mu + sigma * rng.norm_quantile(rng.next_double(st))
    return _moments4(x)


@njit(cache=True, inline="always")
def _laplace_quantile(u, loc, lam):
    if u < 0.5:
        return loc + np.log(2.0 * u) / lam
    return loc - np.log(2.0 - 2.0 * u) / lam


@njit(cache=True)
def _laplace_stats(lam, loc, n, seed):
    st = rng.seed_state(seed)
    x = np.empty(n)
    for i in range(n):
        x[i] = _laplace_quantile(rng.next_double(st), loc, lam)
    return _moments4(x)


@njit(cache=True, parallel=True)
def _gaussian_batch(theta, seeds, n):
    out = np.empty((theta.shape[0], 4))
    for i in prange(theta.shape[0]):
        mean, sd, skew, kurt = _gaussian_stats(
            theta[i, 0], np.sqrt(theta[i, 1]), n, seeds[i])
        out[i, 0] = mean
        out[i, 1] = sd
        out[i, 2] = skew
        out[i, 3] = kurt
    return out


@njit(cache=True, parallel=True)
def _laplace_batch(theta, seeds, loc, n):
    out = np.empty((theta.shape[0], 4))
    for i in prange(theta.shape[0]):
        mean, sd, skew, kurt = _laplace_stats(theta[i, 0], loc, n, seeds[i])
        out[i, 0] = mean
        out[i, 1] = sd
        out[i, 2] = skew
        out[i, 3] = kurt
    return out


def four_moments(data) -> SummaryVector:
    """(mean, sd, skew, excess kurt) of a sample of at least 4 values."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 1 or x.shape[0] < 4:
        raise ValueError("need a 1-d sample of length >= 4")
    if np.ptp(x) == 0.0:
        raise ValueError("zero variance sample: moments undefined")
    mean, sd, skew, kurt = _moments4(x)
    return SummaryVector(STAT_NAMES, (mean, sd, skew, kurt))


def simulate_gaussian(mu: float, sigma: float, n: int, seed) -> SummaryVector:
    if sigma < 1e-12:
        raise ValueError("sigma below 1e-12: degenerate sample")
    if n < 4:
        raise ValueError("need n >= 4")
    vals = _gaussian_stats(mu, sigma, n, rng.as_seed(seed))
    return SummaryVector(STAT_NAMES, vals)


def simulate_laplace(lam: float, n: int, seed, loc: float = LAPLACE_LOCATION) -> SummaryVector:
    if lam <= 0:
        raise ValueError("rate must be positive")
    if n < 4:
        raise ValueError("need n >= 4")
    vals = _laplace_stats(lam, loc, n, rng.as_seed(seed))
    return SummaryVector(STAT_NAMES, vals)


def exact_sigma2_posterior_cdf(v0sq: float, x) -> float:
    """Closed-form posterior CDF of sigma^2 given an observed variance.

    InverseGamma(11, 1 + 9.5 * v0sq); serves as the oracle the adjusted
    ABC posterior is compared against.
    """
    if v0sq <= 0:
        raise ValueError("v0sq must be positive")
    return inverse_gamma_cdf(11.0, 1.0 + 9.5 * v0sq, x)


def _sigma2_quantile(u):
    # sigma = 1/E with E ~ Exp(1); the recorded parameter is sigma^2
    sigma = PriorSpec.inverse_exponential(1.0).quantile(u)
    return np.asarray(sigma) ** 2


def gaussian_model(n: int = TOY_SAMPLE_SIZE, *, mu_prior: PriorSpec | None = None,
                   sigma2_prior: PriorSpec | None = None) -> ModelSpec:
    """Gaussian sampling model, theta = (mu, sigma2).

    Passing an explicit ``sigma2_prior`` replaces the reciprocal-exponential
    draw of sigma with a plain inverse-CDF draw of sigma2 itself.
    """
    mu = ParamDef("mu", mu_prior or PriorSpec.gaussian(2.0, 10.0), IDENTITY)
    if sigma2_prior is None:
        sigma2 = ParamDef("sigma2", PriorSpec.inverse_exponential(1.0), LOG,
                          quantile=_sigma2_quantile)
    else:
        sigma2 = ParamDef("sigma2", sigma2_prior, LOG)

    def simulate(pv, seed):
        return simulate_gaussian(pv["mu"], np.sqrt(pv["sigma2"]), n, seed)

    def simulate_batch(theta, seeds):
        return _gaussian_batch(np.asarray(theta, dtype=float),
                               np.asarray(seeds, dtype=np.uint64), n)

    return ModelSpec(label="toy.gaussian", params=(mu, sigma2),
                     stat_names=STAT_NAMES, simulate=simulate,
                     simulate_batch=simulate_batch)


def laplace_model(n: int = TOY_SAMPLE_SIZE, *, rate_prior: PriorSpec | None = None,
                  loc: float = LAPLACE_LOCATION) -> ModelSpec:
    """Laplace sampling model with fixed location, theta = (lambda)."""
    lam = ParamDef("lambda", rate_prior or PriorSpec.exponential(1.0), LOG)

    def simulate(pv, seed):
        return simulate_laplace(pv["lambda"], n, seed, loc=loc)

    def simulate_batch(theta, seeds):
        return _laplace_batch(np.asarray(theta, dtype=float),
                              np.asarray(seeds, dtype=np.uint64), loc, n)

    return ModelSpec(label="toy.laplace", params=(lam,),
                     stat_names=STAT_NAMES, simulate=simulate,
                     simulate_batch=simulate_batch)
