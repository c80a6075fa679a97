"""Variance-optimal allocation of inner replicates ``N(n)``.

Every family reduces to the same constrained problem: minimize
``sum A(n) / N(n)`` subject to ``sum B(n) N(n) <= M``.  The Lagrange optimum
is ``N_0(n) = M sqrt(A(n) / B(n)) / sum sqrt(A B)`` with objective
``(sum sqrt(A B))^2 / M``; the family allocators only differ in how they
build ``A``, ``B`` and ``M`` from the problem and the cost budget.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .problem import Family, NormReport, ProblemSpec
from .sampling import LawKind, TruncationLaw
from .specfun import log_w_n, mittag_leffler

__all__ = [
    "TailPolicy",
    "CostModel",
    "AllocationPlan",
    "BudgetError",
    "solve_allocation",
    "round_allocation",
    "truncation_law",
    "volterra_allocation",
    "fredholm_allocation",
    "abel_allocation",
    "build_plan",
    "expected_cost",
    "variance_bound",
    "allocation_sequences",
]

PLAN_TAIL_MASS = 1e-12


class TailPolicy(enum.Enum):
    ONE = "one"
    ZERO = "zero"


class BudgetError(ValueError):
    """The budget cannot pay for one inner replicate at every truncation level."""

    def __init__(self, message: str, minimal_theta: float) -> None:
        super().__init__(message)
        self.minimal_theta = minimal_theta


@dataclass(frozen=True)
class CostModel:
    """Outer replicate count ``z_outer``, variates per node ``per_node_cost``
    and the expected elapsed-variate budget ``theta_target``."""

    z_outer: int
    theta_target: float
    per_node_cost: int = 1

    def __post_init__(self) -> None:
        if self.z_outer < 1 or self.per_node_cost < 1 or not self.theta_target > 0:
            raise ValueError(f"cost model entries must be positive: {self}")


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    family: Family
    table: np.ndarray  # N(n), n = 0..n_max
    n0: np.ndarray  # continuous optimum; entry 0 is nan (n = 0 costs nothing)
    pmf: np.ndarray  # truncation probabilities on 0..n_max
    budget_M: float
    predicted_D: float
    zero_threshold: int = 0
    tail_policy: TailPolicy = TailPolicy.ONE
    cost: CostModel | None = None
    eval_point: object = None

    @property
    def n_max(self) -> int:
        return len(self.table) - 1

    def inner_counts(self, n: np.ndarray) -> np.ndarray:
        """``N(n)`` for an array of truncation draws, tail included."""
        n = np.asarray(n)
        tail = 1 if self.tail_policy is TailPolicy.ONE else 0
        out = np.full(n.shape, tail, dtype=np.int64)
        inside = n <= self.n_max
        out[inside] = self.table[n[inside]]
        return out

    def __getitem__(self, n: int) -> int:
        return int(self.inner_counts(np.array([n]))[0])


def solve_allocation(A, B, M: float) -> tuple[np.ndarray, float]:
    """Continuous minimizer of ``sum A/N`` under ``sum B N <= M``.

    Returns ``(N_0, D)`` with ``N_0 = M sqrt(A/B) / sum sqrt(A B)`` and
    ``D = (sum sqrt(A B))^2 / M``.  The constraint is tight at the optimum.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 1:
        raise ValueError("A and B must be 1-d sequences of equal length")
    if np.any(~(A > 0)) or np.any(~(B > 0)) or not M > 0:
        raise ValueError("A, B and M must be strictly positive")
    root = np.sqrt(A * B)
    s = float(np.sum(root))
    n0 = M * np.sqrt(A / B) / s
    return n0, s * s / M


def round_allocation(n0, zero_threshold: int = 0) -> np.ndarray:
    """``floor(N_0) + 1``, with entries ``N_0 <= zero_threshold`` set to 0.

    ``zero_threshold = 0`` disables zeroing.
    """
    n0 = np.asarray(n0, dtype=float)
    if np.any(n0 < 0):
        raise ValueError("N_0 must be nonnegative")
    out = np.floor(n0).astype(np.int64) + 1
    if zero_threshold > 0:
        out[n0 <= zero_threshold] = 0
    return out


def truncation_law(spec: ProblemSpec, point=None) -> TruncationLaw:
    """The law of the truncation index for ``spec`` evaluated at ``point``.

    Volterra: Poisson(lam t).  Fredholm: Geometric(lam).  Abel: discrete
    Mittag-Leffler with ``mu = lam Gamma(beta) t^beta``.
    """
    if spec.family is Family.VOLTERRA:
        return TruncationLaw.poisson(spec.lam * float(point))
    if spec.family is Family.FREDHOLM:
        return TruncationLaw.geometric(spec.lam)
    beta = spec.beta
    return TruncationLaw.mittag_leffler(
        beta, spec.lam * math.gamma(beta) * float(point) ** beta
    )


def _cutoff(law: TruncationLaw) -> int:
    cdf = law.cdf
    hit = np.nonzero(1.0 - cdf < PLAN_TAIL_MASS)[0]
    return int(hit[0]) if hit.size else law.support_max


def allocation_sequences(
    spec: ProblemSpec, norms: NormReport, point, n: np.ndarray, cost: CostModel
) -> tuple[np.ndarray, np.ndarray, float]:
    """``(log A(n), log B(n), M)`` for the family of ``spec`` at ``point``.

    Volterra: ``A = Q^n / n!^2`` with ``Q = Lambda ||K||^2``, ``B = n Lambda^n / n!``,
    ``M = e^Lambda Theta / (Z d)``.  Fredholm: ``A = (lam |||K^[2]|||)^n``,
    ``B = n lam^n``, ``M = Theta / ((1 - lam) Z d)``.  Abel:
    ``A = W_n^2 ||K||^(2n) Lambda_b^n``, ``B = n mu^n / Gamma(1 + beta n)``,
    ``M = E_beta(mu) Theta / (Z d)``.
    """
    n = np.asarray(n, dtype=float)
    per_replicate = cost.theta_target / (cost.z_outer * cost.per_node_cost)
    with np.errstate(divide="ignore"):
        if spec.family is Family.VOLTERRA:
            lam_t = spec.lam * float(point)
            log_lam = math.log(lam_t)
            log_q = log_lam + 2.0 * np.log(norms.sup_norm_K)
            log_a = n * log_q - 2.0 * gammaln(n + 1.0)
            log_b = np.log(n) + n * log_lam - gammaln(n + 1.0)
            big_m = math.exp(lam_t) * per_replicate
        elif spec.family is Family.FREDHOLM:
            log_a = n * (math.log(spec.lam) + np.log(norms.op_norm_K2))
            log_b = np.log(n) + n * math.log(spec.lam)
            big_m = per_replicate / (1.0 - spec.lam)
        else:
            beta = spec.beta
            lam_b = spec.lam * float(point) ** beta
            mu = lam_b * math.gamma(beta)
            log_a = (
                2.0 * log_w_n(beta, n)
                + 2.0 * n * np.log(norms.sup_norm_K)
                + n * math.log(lam_b)
            )
            log_b = np.log(n) + n * math.log(mu) - gammaln(1.0 + beta * n)
            big_m = mittag_leffler(beta, mu) * per_replicate
    return log_a, log_b, big_m


def _allocate(
    spec: ProblemSpec,
    norms: NormReport,
    point,
    cost: CostModel,
    zero_threshold: int,
    tail_policy: TailPolicy,
) -> AllocationPlan:
    law = truncation_law(spec, point)
    n_max = _cutoff(law)
    pmf = np.asarray(law.table[: n_max + 1], dtype=float)
    table = np.ones(n_max + 1, dtype=np.int64)
    n0 = np.full(n_max + 1, np.nan)
    if n_max == 0:
        return AllocationPlan(
            spec.family, table, n0, pmf, 0.0, 0.0, zero_threshold, tail_policy, cost, point
        )
    n = np.arange(1, n_max + 1)
    log_a, log_b, big_m = allocation_sequences(spec, norms, point, n, cost)
    a, b = np.exp(log_a), np.exp(log_b)
    need = float(np.sum(b))
    if big_m < need:
        raise BudgetError(
            f"budget M = {big_m:.6g} cannot afford N(n) = 1 on 1..{n_max} "
            f"(needs {need:.6g})",
            minimal_theta=cost.theta_target * need / big_m,
        )
    # n whose A vanishes (K == 0) carry no variance; keep a single replicate
    live = a > 0
    n0[0] = np.nan
    d = 0.0
    if np.any(live):
        sub, d = solve_allocation(a[live], b[live], big_m)
        part = np.zeros(n_max)
        part[live] = sub
        n0[1:] = part
    else:
        n0[1:] = 0.0
    table[1:] = round_allocation(n0[1:], zero_threshold)
    return AllocationPlan(
        spec.family, table, n0, pmf, big_m, d, zero_threshold, tail_policy, cost, point
    )


def _check_family(spec: ProblemSpec, family: Family) -> None:
    if spec.family is not family:
        raise ValueError(f"expected a {family.value} problem, got {spec.family.value}")


def volterra_allocation(
    spec: ProblemSpec,
    norms: NormReport,
    t: float,
    cost: CostModel,
    zero_threshold: int = 0,
    tail_policy: TailPolicy = TailPolicy.ONE,
) -> AllocationPlan:
    _check_family(spec, Family.VOLTERRA)
    return _allocate(spec, norms, t, cost, zero_threshold, tail_policy)


def fredholm_allocation(
    spec: ProblemSpec,
    norms: NormReport,
    cost: CostModel,
    zero_threshold: int = 0,
    tail_policy: TailPolicy = TailPolicy.ONE,
) -> AllocationPlan:
    _check_family(spec, Family.FREDHOLM)
    return _allocate(spec, norms, None, cost, zero_threshold, tail_policy)


def abel_allocation(
    spec: ProblemSpec,
    norms: NormReport,
    t: float,
    cost: CostModel,
    zero_threshold: int = 0,
    tail_policy: TailPolicy = TailPolicy.ONE,
) -> AllocationPlan:
    _check_family(spec, Family.ABEL)
    return _allocate(spec, norms, t, cost, zero_threshold, tail_policy)


def build_plan(
    spec: ProblemSpec,
    norms: NormReport,
    point,
    cost: CostModel,
    zero_threshold: int = 0,
    tail_policy: TailPolicy = TailPolicy.ONE,
) -> AllocationPlan:
    """Dispatch to the family allocator."""
    if spec.family is Family.FREDHOLM:
        plan = fredholm_allocation(spec, norms, cost, zero_threshold, tail_policy)
        return replace(plan, eval_point=point)
    return _allocate(spec, norms, point, cost, zero_threshold, tail_policy)


def expected_cost(
    plan: AllocationPlan,
    law: TruncationLaw,
    cost: CostModel,
    z_outer: int | None = None,
) -> float:
    """``Z d sum_n P(n) n N(n)``, tail beyond the plan included."""
    z = cost.z_outer if z_outer is None else z_outer
    p = np.asarray(law.table, dtype=float)
    n = np.arange(len(p))
    counts = plan.inner_counts(n)
    return float(z * cost.per_node_cost * np.sum(p * n * counts))


def variance_bound(plan: AllocationPlan, spec: ProblemSpec, norms: NormReport) -> float:
    """Upper bound on the per-replicate variance stated for the plan's family.

    Volterra: ``||f||^2 e^-Lambda sum Q^n / (N(n) n!^2)``.
    Fredholm: ``(1 - lam) ||f||^2 sum (lam |||K^[2]|||)^n / N(n)``.
    Abel: ``||f||^2 sum W_n^2 Lambda_b^n ||K||^(2n) / N(n)``.
    Levels with ``N(n) = 0`` are skipped.
    """
    n = np.arange(plan.n_max + 1, dtype=float)
    counts = plan.table.astype(float)
    keep = counts > 0
    f2 = norms.sup_norm_f**2
    with np.errstate(divide="ignore"):
        if spec.family is Family.VOLTERRA:
            lam_t = spec.lam * float(plan.eval_point)
            log_q = math.log(lam_t) + 2.0 * np.log(norms.sup_norm_K)
            log_a = n * log_q - 2.0 * gammaln(n + 1.0)
            pref = f2 * math.exp(-lam_t)
        elif spec.family is Family.FREDHOLM:
            log_a = n * (math.log(spec.lam) + np.log(norms.op_norm_K2))
            pref = (1.0 - spec.lam) * f2
        else:
            beta = spec.beta
            lam_b = spec.lam * float(plan.eval_point) ** beta
            log_a = (
                2.0 * log_w_n(beta, n)
                + 2.0 * n * np.log(norms.sup_norm_K)
                + n * math.log(lam_b)
            )
            pref = f2
    log_a = np.where(n == 0, 0.0, log_a)
    return float(pref * np.sum(np.exp(log_a[keep]) / counts[keep]))


def law_kind(family: Family) -> LawKind:
    return {
        Family.VOLTERRA: LawKind.POISSON,
        Family.FREDHOLM: LawKind.GEOMETRIC,
        Family.ABEL: LawKind.MITTAG_LEFFLER,
    }[family]
