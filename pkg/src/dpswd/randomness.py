"""Stochastic primitives: sphere directions, Gaussian noise, inverse normal CDF.

All randomness flows through counter-based Philox streams keyed by
(master seed, purpose, index), so any quantity drawn for a given index is
independent of evaluation order and of how work is split across threads.
Determinism is guaranteed within this implementation, not bit-for-bit
across libraries. The generators are not cryptographically secure; the
privacy guarantees elsewhere in this package are analyzed assuming ideal
Gaussian noise.
"""

from __future__ import annotations

import math

import numpy as np

Seed = int  # 64-bit unsigned master seed; any value is valid

_MASK64 = (1 << 64) - 1

# stream purposes; keep values stable, they are part of the reproducibility
# contract of seeded runs
PURPOSE_DIRECTIONS = 1
PURPOSE_NOISE_SOURCE = 2
PURPOSE_NOISE_TARGET = 3
PURPOSE_SENSITIVITY = 4
PURPOSE_DATA = 5


def substream(seed: Seed, purpose: int, index: int = 0) -> np.random.Generator:
    """Generator for a (seed, purpose, index) substream.

    The stream depends only on the three key components, never on how many
    other streams were consumed before it. Distinct indices get disjoint
    2**64-draw blocks of one Philox counter sequence.
    """
    key = np.array([seed & _MASK64, purpose & _MASK64], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    if index:
        bitgen.advance(index * (1 << 64))
    return np.random.Generator(bitgen)


def derive_seed(seed: Seed, step: int) -> Seed:
    """Per-step master seed via a splitmix64 mix of (seed, step)."""
    z = (seed + (step + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sample_sphere(d: int, k: int, seed: Seed) -> np.ndarray:
    """Draw k independent uniform directions on the (d-1)-sphere.

    Returns a (d, k) matrix whose columns are unit vectors, obtained by
    normalizing i.i.d. standard Gaussian vectors (exact uniformity by
    rotation invariance). Column j is a prefix-stable function of
    (seed, j): enlarging k never changes earlier columns.
    """
    if d < 1 or k < 1:
        raise ValueError(f"need d >= 1 and k >= 1, got d={d}, k={k}")
    rng = substream(seed, PURPOSE_DIRECTIONS)
    g = rng.standard_normal((k, d))
    norms = np.sqrt(np.einsum("ij,ij->i", g, g))
    # a numerically zero Gaussian draw has probability ~0; resample defensively
    bad = norms < 1e-300
    if bad.any():
        g[bad] = substream(seed, PURPOSE_DIRECTIONS, index=1).standard_normal(
            (int(bad.sum()), d)
        )
        norms = np.sqrt(np.einsum("ij,ij->i", g, g))
    return (g / norms[:, None]).T


def sample_gaussian_matrix(n: int, k: int, sigma: float, seed: Seed, purpose: int = PURPOSE_NOISE_SOURCE) -> np.ndarray:
    """n-by-k matrix of i.i.d. N(0, sigma^2) entries; sigma=0 gives zeros."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n < 0 or k < 0:
        raise ValueError("matrix dimensions must be nonnegative")
    if sigma == 0.0:
        return np.zeros((n, k))
    rng = substream(seed, purpose)
    return sigma * rng.standard_normal((n, k))


# Acklam's rational approximation of the inverse standard normal CDF,
# accurate to ~1.15e-9 on (0,1), then polished with one Halley step on
# Phi(x) - p computed through erfc. The refined result is accurate to a
# few ulps, comfortably within the 1e-9 contract.
_ACKLAM_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425


def inverse_normal_cdf(p: float) -> float:
    """Quantile function of the standard normal, Phi^{-1}(p), for p in (0,1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    # Halley refinement: e = Phi(x) - p via erfc for tail accuracy
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)
