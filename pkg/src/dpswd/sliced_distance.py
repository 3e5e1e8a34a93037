"""Monte-Carlo sliced Wasserstein estimators, plain, smoothed, and private.

The estimator draws k uniform directions, projects both point clouds, and
averages exact 1-D W_q^q costs across projections. The private variant
adds i.i.d. N(0, sigma^2) noise to every projected coordinate before any
distance computation; the noised projections are the only values derived
from the private data that cross the privacy boundary (everything after
is post-processing).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .measures import EmpiricalMeasure, check_privacy_normalized
from .randomness import (
    PURPOSE_NOISE_SOURCE,
    PURPOSE_NOISE_TARGET,
    Seed,
    sample_gaussian_matrix,
    sample_sphere,
)
from .wasserstein1d import sorted_profile, wasserstein_1d_q

_CHUNK = 512  # fixed column chunk so results never depend on worker count


@dataclass(frozen=True)
class SwdConfig:
    """Estimator configuration: projection count, order, seed, noise level."""

    k: int = 100
    q: float = 2.0
    seed: Seed = 0
    sigma: float = 0.0
    noise_sides: str = "both"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.noise_sides not in ("both", "target-only"):
            raise ValueError(f"noise_sides must be 'both' or 'target-only', got {self.noise_sides!r}")


@dataclass(frozen=True)
class SwdResult:
    """Estimate (the q-th power of the distance) with per-projection terms."""

    value: float
    per_projection: np.ndarray = field(repr=False)
    config: SwdConfig

    @property
    def distance(self) -> float:
        return self.value ** (1.0 / self.config.q)


def _project(measure: EmpiricalMeasure, directions: np.ndarray) -> np.ndarray:
    return measure.points @ directions


def _noised_projections(
    measure: EmpiricalMeasure, directions: np.ndarray, sigma: float, seed: Seed, purpose: int
) -> np.ndarray:
    """Release one side of the mechanism: X @ U plus per-entry Gaussian noise.

    For the private side this is the single point where raw coordinates are
    read; only the returned array flows into distance computations.
    """
    proj = _project(measure, directions)
    if sigma > 0:
        proj = proj + sample_gaussian_matrix(measure.n, directions.shape[1], sigma, seed, purpose)
    return proj


def _per_projection_costs(
    proj_a: np.ndarray,
    weights_a: np.ndarray,
    proj_b: np.ndarray,
    weights_b: np.ndarray,
    q: float,
    threads: int = 1,
) -> np.ndarray:
    """Exact 1-D W_q^q per projection column, independent of thread count."""
    n, k = proj_a.shape
    m = proj_b.shape[0]
    uniform = (
        n == m
        and np.abs(weights_a - 1.0 / n).max() <= 1e-12
        and np.abs(weights_b - 1.0 / m).max() <= 1e-12
    )
    if uniform:
        diffs = np.abs(np.sort(proj_a, axis=0) - np.sort(proj_b, axis=0))
        if q == 2.0:
            costs = np.mean(diffs * diffs, axis=0)
        elif q == 1.0:
            costs = np.mean(diffs, axis=0)
        else:
            costs = np.mean(diffs**q, axis=0)
        return costs

    out = np.empty(k)

    def work(chunk_start: int) -> None:
        stop = min(chunk_start + _CHUNK, k)
        for j in range(chunk_start, stop):
            out[j] = wasserstein_1d_q(
                sorted_profile(proj_a[:, j], weights_a),
                sorted_profile(proj_b[:, j], weights_b),
                q,
            )

    starts = range(0, k, _CHUNK)
    if threads > 1 and k > _CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out


def smoothed_swd(
    a: EmpiricalMeasure, b: EmpiricalMeasure, cfg: SwdConfig, threads: int = 1
) -> SwdResult:
    """Sliced W_q^q between Gaussian-noised projections (no privacy preconditions).

    With sigma=0 this is the plain Monte-Carlo SWD estimator. The same seed
    always reproduces the same directions and noise; the reduction over
    projections is a fixed-order mean, so the value is independent of
    ``threads``.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    directions = sample_sphere(a.dim, cfg.k, cfg.seed)
    if cfg.noise_sides == "both":
        proj_a = _noised_projections(a, directions, cfg.sigma, cfg.seed, PURPOSE_NOISE_SOURCE)
    else:
        proj_a = _project(a, directions)
    proj_b = _noised_projections(b, directions, cfg.sigma, cfg.seed, PURPOSE_NOISE_TARGET)
    costs = _per_projection_costs(proj_a, a.weights, proj_b, b.weights, cfg.q, threads)
    return SwdResult(value=float(np.mean(costs)), per_projection=costs, config=cfg)


def swd(a: EmpiricalMeasure, b: EmpiricalMeasure, cfg: SwdConfig, threads: int = 1) -> SwdResult:
    """Plain sliced Wasserstein estimator; requires a noise-free config."""
    if cfg.sigma != 0.0:
        raise ValueError("swd expects sigma=0; use dp_swd or smoothed_swd for sigma>0")
    return smoothed_swd(a, b, cfg, threads)


def dp_swd(
    a_public: EmpiricalMeasure, b_private: EmpiricalMeasure, cfg: SwdConfig, threads: int = 1
) -> SwdResult:
    """Differentially private sliced distance on privacy-normalized inputs.

    Both sides must satisfy the unit-sensitivity precondition (all row
    norms <= 1/2, as produced by normalize_for_privacy); sigma must be
    positive. The private side is consumed into noised projections before
    any distance code runs.
    """
    if cfg.sigma <= 0:
        raise ValueError("dp_swd requires sigma > 0")
    check_privacy_normalized(a_public)
    check_privacy_normalized(b_private)
    return smoothed_swd(a_public, b_private, cfg, threads)


def swd_gradient_source(
    a: EmpiricalMeasure, b: EmpiricalMeasure, cfg: SwdConfig, threads: int = 1
) -> np.ndarray:
    """Gradient of the fixed-projection q=2 estimator w.r.t. the source points.

    For each projection the optimal coupling sorts both samples; the
    estimator is then a mean of squared differences, whose derivative in
    source point x_i is (2/(k n)) * sum_j u_j (a_ij - b_matched). Directions
    and any noise are regenerated from cfg.seed, so the gradient is exactly
    consistent with the value returned by swd / dp_swd / smoothed_swd at the
    same config. At sorting ties this is a subgradient (stable-sort pairing).
    """
    if cfg.q != 2.0:
        raise ValueError("gradient is defined for q=2 only")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    n = a.n
    if b.n != n:
        raise ValueError(f"equal sample counts required, got {n} and {b.n}")
    if not (a.is_uniform() and b.is_uniform()):
        raise ValueError("uniform weights required for the source gradient")
    directions = sample_sphere(a.dim, cfg.k, cfg.seed)
    if cfg.noise_sides == "both":
        proj_a = _noised_projections(a, directions, cfg.sigma, cfg.seed, PURPOSE_NOISE_SOURCE)
    else:
        proj_a = _project(a, directions)
    proj_b = _noised_projections(b, directions, cfg.sigma, cfg.seed, PURPOSE_NOISE_TARGET)

    order_a = np.argsort(proj_a, axis=0, kind="stable")
    order_b = np.argsort(proj_b, axis=0, kind="stable")
    diffs = np.take_along_axis(proj_a, order_a, axis=0) - np.take_along_axis(proj_b, order_b, axis=0)
    # scatter sorted differences back to source-row positions, then one matmul
    by_row = np.empty_like(diffs)
    np.put_along_axis(by_row, order_a, diffs, axis=0)
    return (2.0 / (cfg.k * n)) * by_row @ directions.T


def value_and_gradient(
    a: EmpiricalMeasure, b: EmpiricalMeasure, cfg: SwdConfig, threads: int = 1
) -> tuple[float, np.ndarray]:
    """Consistent (loss, gradient) pair at one shared noise/direction draw."""
    value = smoothed_swd(a, b, cfg, threads).value
    grad = swd_gradient_source(a, b, cfg, threads)
    return value, grad


def with_seed(cfg: SwdConfig, seed: Seed) -> SwdConfig:
    return replace(cfg, seed=seed)
