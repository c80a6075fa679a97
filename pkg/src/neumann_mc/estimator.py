"""Unbiased Monte Carlo estimation by randomized Neumann-series truncation.

Each outer replicate draws a truncation index ``n`` from the family's law,
averages ``N(n)`` independent path weights of length ``n`` and reports that
average.  The replicate mean is an unbiased estimate of the *scaled* solution
(``e^{-lam t} x`` for Volterra, ``(1 - lam) x`` for Fredholm,
``x / E_beta(mu)`` for Abel); multiplying by the family scale factor
recovers ``x``.

Replicates are processed in fixed blocks of ``BLOCK_SIZE``; block ``b`` draws
from the stream ``(seed, b * BLOCK_SIZE)``.  Results do not depend on how
many workers process the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .allocation import AllocationPlan, CostModel, expected_cost, truncation_law
from .problem import Family, ProblemSpec, fredholm_weights, volterra_weights
from .sampling import RngStream, TruncationLaw, polygonal_beta_array, simplex_uniform_array
from .specfun import mittag_leffler

__all__ = [
    "BLOCK_SIZE",
    "InvalidPlanError",
    "EstimatorConfig",
    "EstimateReport",
    "FieldReport",
    "scale_factor",
    "replicate_values",
    "estimate_point",
    "estimate_field",
    "realized_vs_expected_cost",
]

BLOCK_SIZE = 1024


class InvalidPlanError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    z_outer: int
    plan: AllocationPlan
    seed: int = 0
    confidence_level: float = 0.95
    workers: int = 1

    def __post_init__(self) -> None:
        if self.z_outer < 2:
            raise ValueError(f"z_outer must be >= 2 for a variance estimate: {self.z_outer}")
        if not 0 < self.confidence_level < 1:
            raise ValueError(f"confidence_level must lie in (0, 1): {self.confidence_level}")


@dataclass(frozen=True)
class EstimateReport:
    eval_point: object
    scaled_estimate: float
    unscaled_estimate: float
    scale_factor: float
    std_error: float
    ci_low: float
    ci_high: float
    realized_cost_R: int
    expected_cost_Theta: float
    z_used: int
    confidence_level: float = 0.95

    @property
    def unscaled_std_error(self) -> float:
        return self.scale_factor * self.std_error

    @property
    def unscaled_ci(self) -> tuple[float, float]:
        return self.scale_factor * self.ci_low, self.scale_factor * self.ci_high


@dataclass(frozen=True)
class FieldReport:
    grid: tuple
    reports: tuple[EstimateReport, ...]
    uniform_band_halfwidth: float
    batch_count: int


def scale_factor(spec: ProblemSpec, point) -> float:
    """Factor turning the scaled solution back into ``x(point)``."""
    if spec.family is Family.VOLTERRA:
        return math.exp(spec.lam * float(point))
    if spec.family is Family.FREDHOLM:
        return 1.0 / (1.0 - spec.lam)
    law = truncation_law(spec, point)
    return mittag_leffler(law.beta, law.mu)


def _inner_weights(spec: ProblemSpec, point, n: int, m: int, rng: RngStream) -> np.ndarray:
    if spec.family is Family.FREDHOLM:
        d = spec.domain_dim
        shape = (m, n) if d == 1 else (m, n, d)
        return fredholm_weights(spec, point, rng.random(shape))
    if spec.family is Family.VOLTERRA:
        pts = simplex_uniform_array(n, rng, m)
    else:
        pts = polygonal_beta_array(spec.alpha, n, rng, m)
    return volterra_weights(spec, float(point), pts)


def _run_block(
    spec: ProblemSpec,
    point,
    law: TruncationLaw,
    plan: AllocationPlan,
    seed: int,
    start: int,
    size: int,
) -> tuple[np.ndarray, np.ndarray]:
    rng = RngStream(seed, start)
    draws = law.inverse_cdf(rng.random(size))
    counts = plan.inner_counts(draws)
    values = np.zeros(size)
    for n in np.unique(draws):
        n = int(n)
        idx = np.nonzero((draws == n) & (counts > 0))[0]
        if idx.size == 0:
            continue
        if n == 0:
            values[idx] = float(np.asarray(spec.f(np.asarray(point, dtype=float))).reshape(-1)[0])
            continue
        reps = int(counts[idx[0]])
        w = _inner_weights(spec, point, n, idx.size * reps, rng)
        values[idx] = w.reshape(idx.size, reps).mean(axis=1)
    return values, draws * counts


def replicate_values(
    spec: ProblemSpec, point, config: EstimatorConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-replicate values and per-replicate node counts ``n_i N(n_i)``.

    The values are the bracketed inner averages whose mean is the scaled
    estimate; a replicate with ``N(n_i) = 0`` contributes 0.
    """
    plan = config.plan
    if plan.family is not spec.family:
        raise InvalidPlanError(
            f"plan built for {plan.family.value}, problem is {spec.family.value}"
        )
    law = truncation_law(spec, point)
    z = config.z_outer
    starts = list(range(0, z, BLOCK_SIZE))

    def job(start: int):
        return _run_block(spec, point, law, plan, config.seed, start, min(BLOCK_SIZE, z - start))

    if config.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    values = np.concatenate([p[0] for p in parts])
    nodes = np.concatenate([p[1] for p in parts])
    return values, nodes


def _report(
    spec: ProblemSpec,
    point,
    config: EstimatorConfig,
    values: np.ndarray,
    nodes: np.ndarray,
) -> EstimateReport:
    z = len(values)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(z))
    q = NormalDist().inv_cdf(0.5 + config.confidence_level / 2.0)
    scale = scale_factor(spec, point)
    cost = config.plan.cost or CostModel(z, 1.0, 1)
    d = cost.per_node_cost
    theta = expected_cost(config.plan, truncation_law(spec, point), cost, z_outer=z)
    return EstimateReport(
        eval_point=point,
        scaled_estimate=mean,
        unscaled_estimate=scale * mean,
        scale_factor=scale,
        std_error=se,
        ci_low=mean - q * se,
        ci_high=mean + q * se,
        realized_cost_R=int(d * np.sum(nodes)),
        expected_cost_Theta=theta,
        z_used=z,
        confidence_level=config.confidence_level,
    )


def estimate_point(spec: ProblemSpec, point, config: EstimatorConfig) -> EstimateReport:
    """Unbiased estimate of the solution at ``point`` with a normal CI.

    The standard error is the sample standard deviation of the replicate
    values over ``sqrt(Z)``; the interval and standard error refer to the
    scaled solution (see :attr:`EstimateReport.unscaled_ci`).
    """
    values, nodes = replicate_values(spec, point, config)
    return _report(spec, point, config, values, nodes)


def estimate_field(
    spec: ProblemSpec,
    grid: Sequence,
    config: EstimatorConfig,
    plans: Sequence[AllocationPlan] | None = None,
) -> FieldReport:
    """Pointwise estimates on ``grid`` plus an approximate uniform band.

    Every grid point reuses the same streams, so replicate curves are
    coupled: Fredholm points share truncation draws and nodes exactly,
    Volterra and Abel points share the truncation uniforms (inversion keeps
    the draws monotone in the point) and the stream.

    The band is an empirical surrogate for the Gaussian sup law: replicates
    are split into batches, the sup over the grid of each batch mean's
    deviation from the overall estimate is rescaled to the overall sample
    size, and the ``confidence_level`` quantile of those rescaled sups is the
    half-width.  It is stated for the unscaled solution.
    """
    grid = tuple(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if plans is not None and len(plans) != len(grid):
        raise ValueError("need one plan per grid point")
    reports = []
    curves = []
    for i, point in enumerate(grid):
        cfg = config if plans is None else EstimatorConfig(
            config.z_outer, plans[i], config.seed, config.confidence_level, config.workers
        )
        values, nodes = replicate_values(spec, point, cfg)
        reports.append(_report(spec, point, cfg, values, nodes))
        curves.append(scale_factor(spec, point) * values)
    y = np.stack(curves, axis=1)  # (Z, G)
    z = y.shape[0]
    batches = max(2, min(50, z // 2))
    xhat = y.mean(axis=0)
    sups = []
    for part in np.array_split(y, batches, axis=0):
        m = part.shape[0]
        dev = np.max(np.abs(part.mean(axis=0) - xhat))
        sups.append(dev * math.sqrt(m / (z - m)))
    half = float(np.quantile(sups, config.confidence_level))
    return FieldReport(grid, tuple(reports), half, batches)


def realized_vs_expected_cost(report: EstimateReport) -> tuple[int, float]:
    """``(R, Theta)``: realized elapsed variates and their expectation."""
    return report.realized_cost_R, report.expected_cost_Theta
