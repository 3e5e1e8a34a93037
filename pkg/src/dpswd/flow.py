"""Particle descent matching a private target under the sliced loss.

A desk-scale analog of the distribution-matching objectives: the
"generator" is the particle cloud itself, updated by gradient descent on
the (optionally noised) sliced distance against a fixed target. Fresh
directions (and fresh noise when sigma > 0) are drawn each step, and the
privacy cost of the whole schedule is accounted once up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .accountant import PrivacyBudget, account
from .measures import EmpiricalMeasure, check_privacy_normalized
from .randomness import PURPOSE_DATA, Seed, derive_seed, substream
from .sensitivity import SensitivityBound, bernstein_bound, clt_bound
from .sliced_distance import SwdConfig, swd_gradient_source, smoothed_swd

DIVERGENCE_LIMIT = 1e6


class FlowDiverged(RuntimeError):
    """Loss exceeded the divergence limit; carries the partial trace."""

    def __init__(self, message: str, trace: "FlowTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class FlowConfig:
    """Descent schedule plus the sliced-loss settings used at every step."""

    iterations: int
    learning_rate: float
    k: int = 100
    sigma: float = 0.0
    seed: Seed = 0
    log_every: int = 10
    seed_policy: str = "fresh"  # "fresh": new directions per step; "fixed": one draw
    noise_sides: str = "both"
    batch_size: int | None = None  # optional target mini-batching (gamma < 1)
    delta: float = 1e-5
    delta_split: float = 0.5
    bound_kind: str = "bernstein"
    enforce_privacy: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.seed_policy not in ("fresh", "fixed"):
            raise ValueError(f"seed_policy must be 'fresh' or 'fixed', got {self.seed_policy!r}")
        if self.bound_kind not in ("bernstein", "clt"):
            raise ValueError(f"bound_kind must be 'bernstein' or 'clt', got {self.bound_kind!r}")


@dataclass(frozen=True)
class FlowTrace:
    """Logged descent history and the final particle positions."""

    iterations: np.ndarray
    losses: np.ndarray
    grad_norms: np.ndarray
    final_points: np.ndarray = field(repr=False)
    eps: float | None = None
    delta: float | None = None
    best_order: float | None = None
    sensitivity: SensitivityBound | None = None


def _privacy_report(target: EmpiricalMeasure, cfg: FlowConfig) -> tuple:
    """(eps, delta, order, bound) for the full schedule, or Nones when sigma=0."""
    if cfg.sigma <= 0:
        return None, None, None, None
    gamma = 1.0 if cfg.batch_size is None else cfg.batch_size / target.n
    budget = PrivacyBudget(
        eps_target=1.0,  # placeholder; only the schedule fields matter here
        delta_target=cfg.delta,
        steps=cfg.iterations,
        sampling_rate=gamma,
        delta_split=cfg.delta_split,
    )
    delta_sens = budget.delta_sensitivity if cfg.delta_split > 0 else cfg.delta
    make = bernstein_bound if cfg.bound_kind == "bernstein" else clt_bound
    bound = make(cfg.k, target.dim, delta_sens)
    eps, order = account(cfg.sigma, budget, bound, amplification="subsample")
    return eps, cfg.delta, order, bound


def run_flow(
    source_init: EmpiricalMeasure, target_private: EmpiricalMeasure, cfg: FlowConfig
) -> FlowTrace:
    """Gradient descent on particle positions minimizing the sliced loss.

    Each step draws directions and noise from a per-step seed, evaluates a
    consistent (loss, gradient) pair, and moves the particles. The target
    enters every step only through its noised projections. When sigma > 0
    the target must satisfy the privacy normalization precondition (all row
    norms <= 1/2) unless enforce_privacy is disabled for exploratory runs.
    """
    if source_init.dim != target_private.dim:
        raise ValueError(f"dimension mismatch: {source_init.dim} vs {target_private.dim}")
    if source_init.n != target_private.n and cfg.batch_size is None:
        raise ValueError(
            f"equal sample counts required, got {source_init.n} and {target_private.n}"
        )
    if not (source_init.is_uniform() and target_private.is_uniform()):
        raise ValueError("uniform weights required for particle flow")
    if cfg.batch_size is not None:
        if not 1 <= cfg.batch_size <= target_private.n:
            raise ValueError(f"batch_size must lie in [1, {target_private.n}]")
        if cfg.batch_size != source_init.n:
            raise ValueError("batch_size must equal the source particle count")
    if cfg.sigma > 0 and cfg.enforce_privacy:
        check_privacy_normalized(target_private)

    eps, delta, order, bound = _privacy_report(target_private, cfg)

    points = source_init.points.copy()
    n = points.shape[0]
    iters, losses, gnorms = [], [], []

    def log(i: int, loss: float, gnorm: float) -> None:
        iters.append(i)
        losses.append(loss)
        gnorms.append(gnorm)

    for step in range(cfg.iterations):
        step_seed = cfg.seed if cfg.seed_policy == "fixed" else derive_seed(cfg.seed, step)
        step_cfg = SwdConfig(
            k=cfg.k, q=2.0, seed=step_seed, sigma=cfg.sigma, noise_sides=cfg.noise_sides
        )
        source = EmpiricalMeasure(points)
        if cfg.batch_size is None or cfg.batch_size == target_private.n:
            target = target_private
        else:
            picks = substream(cfg.seed, PURPOSE_DATA, step).choice(
                target_private.n, size=cfg.batch_size, replace=False
            )
            target = EmpiricalMeasure(target_private.points[np.sort(picks)])
        loss = smoothed_swd(source, target, step_cfg).value
        grad = swd_gradient_source(source, target, step_cfg)
        gnorm = float(np.linalg.norm(grad))
        if step % cfg.log_every == 0 or step == cfg.iterations - 1:
            log(step, loss, gnorm)
        if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            trace = FlowTrace(
                np.array(iters), np.array(losses), np.array(gnorms), points,
                eps, delta, order, bound,
            )
            raise FlowDiverged(
                f"loss {loss:.3g} exceeded {DIVERGENCE_LIMIT:.0e} at step {step}; "
                f"reduce the learning rate (lr={cfg.learning_rate})",
                trace,
            )
        points = points - cfg.learning_rate * grad

    return FlowTrace(
        np.array(iters), np.array(losses), np.array(gnorms), points,
        eps, delta, order, bound,
    )
