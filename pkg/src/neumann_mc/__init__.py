"""Unbiased Monte Carlo solutions of second-kind linear integral equations.

Volterra, Fredholm and weakly singular (Abel) equations are solved by
sampling a randomly truncated Neumann series, with inner replicate counts
chosen to minimize variance under a cost budget.
"""

from .allocation import (
    AllocationPlan,
    BudgetError,
    CostModel,
    TailPolicy,
    abel_allocation,
    build_plan,
    expected_cost,
    fredholm_allocation,
    round_allocation,
    solve_allocation,
    variance_bound,
    volterra_allocation,
)
from .estimator import (
    EstimateReport,
    EstimatorConfig,
    FieldReport,
    estimate_field,
    estimate_point,
    realized_vs_expected_cost,
)
from .expr import parse_expression
from .oracle import abel_reference, nystrom_fredholm, picard_volterra
from .problem import Family, NormReport, ProblemSpec, compute_norms, validate_problem
from .sampling import RngStream, TruncationLaw

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "BudgetError",
    "CostModel",
    "EstimateReport",
    "EstimatorConfig",
    "Family",
    "FieldReport",
    "NormReport",
    "ProblemSpec",
    "RngStream",
    "TailPolicy",
    "TruncationLaw",
    "abel_allocation",
    "abel_reference",
    "build_plan",
    "compute_norms",
    "estimate_field",
    "estimate_point",
    "expected_cost",
    "fredholm_allocation",
    "nystrom_fredholm",
    "parse_expression",
    "picard_volterra",
    "realized_vs_expected_cost",
    "round_allocation",
    "solve_allocation",
    "validate_problem",
    "variance_bound",
    "volterra_allocation",
]
