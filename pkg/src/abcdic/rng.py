"""Deterministic seeded random streams.

Every stochastic routine in this package draws from an explicit stream
seeded through :func:`child_seed`, so any table row, simulated dataset or
Monte-Carlo replicate is a pure function of a 64-bit root seed and an
integer index. This is what makes parallel generation reproducible: results
depend on seeds, never on scheduling.

The generator is frozen: child seeds come from the SplitMix64 finalizer
(``mix64``), streams are xoshiro256++ seeded by four successive SplitMix64
outputs, uniforms are the top 53 bits mapped to the open interval (0, 1),
normals use the AS 241 rational inverse-CDF approximation, and Poisson
draws use the multiplication method below mean 10 and Hormann's PTRS
transformed rejection above. All functions here are numba-compiled and are
the single implementation used by both scalar and batch code paths.
"""

import math

import numpy as np
from numba import float64, int64, njit, uint64

U64 = np.uint64

_SM_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX_M1 = U64(0xBF58476D1CE4E5B9)
_MIX_M2 = U64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


def as_seed(x) -> np.uint64:
    """Coerce any Python integer to a 64-bit seed (mod 2^64)."""
    return np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)


@njit(cache=True, inline="always")
def mix64(z):
    """SplitMix64 finalizer: a bijective avalanche mix on 64 bits."""
    z = (z ^ (z >> U64(30))) * _MIX_M1
    z = (z ^ (z >> U64(27))) * _MIX_M2
    return z ^ (z >> U64(31))


@njit(cache=True)
def child_seed(root, index):
    """Derive the index-th child of a root seed.

    ``mix64(root + (index + 1) * gamma)`` with an odd gamma, so for a fixed
    root the map ``index -> child`` is injective over the full 64-bit index
    range (distinct multiples of an odd constant stay distinct mod 2^64 and
    the finalizer is a bijection).
    """
    return mix64(U64(root) + _SM_GAMMA * (U64(index) + U64(1)))


@njit(cache=True)
def child_seeds(root, start, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = child_seed(root, start + i)
    return out


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << U64(k)) | (x >> U64(64 - k))


@njit(cache=True)
def seed_state(seed):
    """Expand a 64-bit seed into a xoshiro256++ state (4 x uint64)."""
    st = np.empty(4, dtype=np.uint64)
    z = U64(seed)
    for i in range(4):
        z = z + _SM_GAMMA
        st[i] = mix64(z)
    return st


@njit(cache=True, inline="always")
def next_u64(st):
    result = _rotl(st[0] + st[3], 23) + st[0]
    t = st[1] << U64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@njit(cache=True, inline="always")
def next_double(st):
    """Uniform on the open interval (0, 1): (top53bits + 0.5) * 2^-53."""
    return (float64(next_u64(st) >> U64(11)) + 0.5) * _INV_2_53


@njit(cache=True, inline="always")
def rand_below(st, n):
    """Uniform integer in [0, n). Modulo bias is < n / 2^53, negligible here."""
    return int64((next_u64(st) >> U64(11)) % U64(n))


# AS 241 (Wichura 1988) PPND16 rational approximation of the standard
# normal quantile; absolute error below 1e-15 on (0, 1).
@njit(cache=True)
def norm_quantile(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    if q < 0.0:
        return -val
    return val


@njit(cache=True, inline="always")
def std_normal(st):
    return norm_quantile(next_double(st))


@njit(cache=True, inline="always")
def exponential(st, rate):
    """Inverse-CDF exponential draw: -log(1 - u) / rate."""
    return -np.log1p(-next_double(st)) / rate


@njit(cache=True)
def _poisson_mult(st, lam):
    thresh = np.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= next_double(st)
        if p <= thresh:
            return k
        k += 1


@njit(cache=True)
def _poisson_ptrs(st, lam):
    # Hormann (1993) PTRS transformed rejection, valid for lam >= 10.
    b = 0.931 + 2.53 * np.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = np.log(lam)
    while True:
        u = next_double(st) - 0.5
        v = next_double(st)
        us = 0.5 - abs(u)
        k = int64(np.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (np.log(v * inv_alpha / (a / (us * us) + b))
                <= k * log_lam - lam - math.lgamma(k + 1.0)):
            return k


@njit(cache=True)
def poisson(st, lam):
    if lam <= 0.0:
        return int64(0)
    if lam < 10.0:
        return int64(_poisson_mult(st, lam))
    return _poisson_ptrs(st, lam)


@njit(cache=True)
def row_uniforms(root, n_rows, n_cols):
    """One (n_rows, n_cols) block of uniforms, row i from child_seed(root, i).

    Row content depends only on (root, i), so blocks can be regenerated
    row-by-row or in any partition and always agree.
    """
    out = np.empty((n_rows, n_cols))
    for i in range(n_rows):
        st = seed_state(child_seed(root, i))
        for j in range(n_cols):
            out[i, j] = next_double(st)
    return out


@njit(cache=True)
def weighted_indices(st, cumw, count):
    """Sample `count` indices with replacement, prob proportional to weights.

    `cumw` is the inclusive cumulative sum of the weights; the total must be
    positive.
    """
    total = cumw[-1]
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        u = next_double(st) * total
        out[i] = np.searchsorted(cumw, u, side="left")
    return out
