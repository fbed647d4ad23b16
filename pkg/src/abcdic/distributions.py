"""Prior distributions: sampling, log-density and inverse CDFs.

Only the handful of families the experiments need. Every family exposes a
quantile function, so one uniform variate maps to one draw and streams can
be replayed deterministically. The Gaussian quantile uses the AS 241
rational approximation (max error ~1e-15); gamma-family quantiles go
through ``scipy.special.gammaincinv``.

Conventions: Gamma(shape, rate) has density ``rate^shape x^(shape-1)
e^(-rate x) / Gamma(shape)``; InverseGamma(shape, rate) is the law of
``1/X`` for ``X ~ Gamma(shape, rate)`` (so the mean is ``rate/(shape-1)``
for shape > 1); InverseExponential(rate) is InverseGamma(1, ...) with the
rate acting on the underlying exponential, i.e. the law of ``1/E`` for
``E ~ Exponential(rate)``; Log10Uniform(a, b) is ``10^U`` with
``U ~ Uniform(a, b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import rng

_LOG10 = np.log(10.0)

KINDS = ("Uniform", "Log10Uniform", "Gaussian", "Exponential",
         "InverseExponential", "Gamma", "InverseGamma")


@dataclass(frozen=True)
class PriorSpec:
    """A named prior: one of the supported families plus its parameters."""

    kind: str
    a: float = 0.0      # lower bound / mean / nan, depending on kind
    b: float = 1.0      # upper bound / sd / nan
    rate: float = 1.0
    shape: float = 1.0

    def __post_init__(self):
        k = self.kind
        if k not in KINDS:
            raise ValueError(f"unknown prior kind {k!r}")
        if k in ("Uniform", "Log10Uniform") and not self.b > self.a:
            raise ValueError(f"{k} requires b > a, got ({self.a}, {self.b})")
        if k == "Gaussian" and not self.b > 0:
            raise ValueError("Gaussian requires sd > 0")
        if k in ("Exponential", "InverseExponential", "Gamma", "InverseGamma"):
            if not self.rate > 0:
                raise ValueError(f"{k} requires rate > 0")
        if k in ("Gamma", "InverseGamma") and not self.shape > 0:
            raise ValueError(f"{k} requires shape > 0")

    # ---- construction helpers -------------------------------------------
    @staticmethod
    def uniform(a: float, b: float) -> "PriorSpec":
        return PriorSpec("Uniform", a=a, b=b)

    @staticmethod
    def log10_uniform(a: float, b: float) -> "PriorSpec":
        return PriorSpec("Log10Uniform", a=a, b=b)

    @staticmethod
    def gaussian(mean: float, sd: float) -> "PriorSpec":
        return PriorSpec("Gaussian", a=mean, b=sd)

    @staticmethod
    def exponential(rate: float) -> "PriorSpec":
        return PriorSpec("Exponential", rate=rate)

    @staticmethod
    def inverse_exponential(rate: float) -> "PriorSpec":
        return PriorSpec("InverseExponential", rate=rate)

    @staticmethod
    def gamma(shape: float, rate: float) -> "PriorSpec":
        return PriorSpec("Gamma", shape=shape, rate=rate)

    @staticmethod
    def inverse_gamma(shape: float, rate: float) -> "PriorSpec":
        return PriorSpec("InverseGamma", shape=shape, rate=rate)

    # ---- core operations -------------------------------------------------
    def quantile(self, u):
        """Inverse CDF at u (elementwise on arrays)."""
        u = np.asarray(u, dtype=float)
        k = self.kind
        if k == "Uniform":
            return self.a + (self.b - self.a) * u
        if k == "Log10Uniform":
            return 10.0 ** (self.a + (self.b - self.a) * u)
        if k == "Gaussian":
            return self.a + self.b * special.ndtri(u)
        if k == "Exponential":
            return -np.log1p(-u) / self.rate
        if k == "InverseExponential":
            # P(1/E <= x) = exp(-rate/x); inverse: rate / (-log u)
            return self.rate / (-np.log(u))
        if k == "Gamma":
            return special.gammaincinv(self.shape, u) / self.rate
        # InverseGamma: reciprocal of the gamma upper-tail quantile
        return self.rate / special.gammaincinv(self.shape, 1.0 - u)

    def sample(self, state) -> float:
        """One draw, consuming exactly one uniform from the stream."""
        return float(self.quantile(rng.next_double(state)))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "Uniform":
            return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        if k == "Log10Uniform":
            with np.errstate(divide="ignore", invalid="ignore"):
                lx = np.where(x > 0, np.log10(np.maximum(x, 1e-300)), -np.inf)
            return np.clip((lx - self.a) / (self.b - self.a), 0.0, 1.0)
        if k == "Gaussian":
            return special.ndtr((x - self.a) / self.b)
        if k == "Exponential":
            return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        if k == "InverseExponential":
            with np.errstate(divide="ignore"):
                return np.where(x > 0, np.exp(-self.rate / np.maximum(x, 1e-300)), 0.0)
        if k == "Gamma":
            return np.where(x > 0, special.gammainc(self.shape, self.rate * np.maximum(x, 0.0)), 0.0)
        return inverse_gamma_cdf(self.shape, self.rate, x)

    def log_density(self, x):
        """Log of the density at x; -inf outside the support."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        with np.errstate(divide="ignore", invalid="ignore"):
            if k == "Uniform":
                inside = (x >= self.a) & (x <= self.b)
                return np.where(inside, -np.log(self.b - self.a), -np.inf)
            if k == "Log10Uniform":
                lo, hi = 10.0 ** self.a, 10.0 ** self.b
                inside = (x >= lo) & (x <= hi)
                xs = np.where(inside, x, 1.0)
                return np.where(inside,
                                -np.log(xs) - np.log(_LOG10 * (self.b - self.a)),
                                -np.inf)
            if k == "Gaussian":
                z = (x - self.a) / self.b
                return -0.5 * z * z - np.log(self.b * np.sqrt(2.0 * np.pi))
            if k == "Exponential":
                return np.where(x >= 0, np.log(self.rate) - self.rate * x, -np.inf)
            if k == "InverseExponential":
                xs = np.where(x > 0, x, 1.0)
                return np.where(x > 0,
                                np.log(self.rate) - 2.0 * np.log(xs) - self.rate / xs,
                                -np.inf)
            if k == "Gamma":
                xs = np.where(x > 0, x, 1.0)
                val = (self.shape * np.log(self.rate) - special.gammaln(self.shape)
                       + (self.shape - 1.0) * np.log(xs) - self.rate * xs)
                return np.where(x > 0, val, -np.inf)
            # InverseGamma
            xs = np.where(x > 0, x, 1.0)
            val = (self.shape * np.log(self.rate) - special.gammaln(self.shape)
                   - (self.shape + 1.0) * np.log(xs) - self.rate / xs)
            return np.where(x > 0, val, -np.inf)

    # ---- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        k = self.kind
        if k in ("Uniform", "Log10Uniform"):
            return {"kind": k, "a": self.a, "b": self.b}
        if k == "Gaussian":
            return {"kind": k, "mean": self.a, "sd": self.b}
        if k in ("Exponential", "InverseExponential"):
            return {"kind": k, "rate": self.rate}
        return {"kind": k, "shape": self.shape, "rate": self.rate}

    @staticmethod
    def from_json(obj: dict) -> "PriorSpec":
        k = obj.get("kind")
        try:
            if k in ("Uniform", "Log10Uniform"):
                return PriorSpec(k, a=float(obj["a"]), b=float(obj["b"]))
            if k == "Gaussian":
                return PriorSpec(k, a=float(obj["mean"]), b=float(obj["sd"]))
            if k in ("Exponential", "InverseExponential"):
                return PriorSpec(k, rate=float(obj["rate"]))
            if k in ("Gamma", "InverseGamma"):
                return PriorSpec(k, shape=float(obj["shape"]), rate=float(obj["rate"]))
        except KeyError as exc:
            raise ValueError(f"prior {k}: missing field {exc}") from exc
        raise ValueError(f"unknown prior kind {k!r}")


def inverse_gamma_cdf(shape: float, rate: float, x) -> float:
    """P(X <= x) for X ~ InverseGamma(shape, rate), via Q(shape, rate/x).

    ``Q`` is the regularized upper incomplete gamma function; x <= 0 maps
    to 0.
    """
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0, special.gammaincc(shape, rate / np.maximum(x, 1e-300)), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def fit_gamma_interval(lo: float, hi: float) -> PriorSpec:
    """Gamma prior whose central .95 interval is (lo, hi).

    Solves the two quantile equations cdf(lo) = 0.025 and cdf(hi) = 0.975.
    The system separates: the quantile ratio q975/q025 is scale-free and
    strictly decreasing in the shape, so the shape is bracketed and solved
    first and the rate follows.
    """
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    target = hi / lo

    def ratio(shape):
        return (special.gammaincinv(shape, 0.975)
                / special.gammaincinv(shape, 0.025)) - target

    s_lo, s_hi = 1e-2, 1e2
    while ratio(s_hi) > 0:
        s_hi *= 4
        if s_hi > 1e9:
            raise ValueError("interval too narrow for a gamma family")
    while ratio(s_lo) < 0:
        s_lo /= 4
        if s_lo < 1e-12:
            raise ValueError("interval too wide for a gamma family")
    shape = optimize.brentq(ratio, s_lo, s_hi, xtol=1e-12, rtol=1e-14)
    rate = special.gammaincinv(shape, 0.975) / hi
    return PriorSpec.gamma(shape=shape, rate=rate)
