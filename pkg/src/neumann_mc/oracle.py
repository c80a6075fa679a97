"""Deterministic reference solutions.

These solvers evaluate the kernel on grids directly and never go through the
estimator's path-weight code, so agreement between the two is evidence
rather than tautology.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .expr import evaluate, variables
from .problem import Family, ProblemSpec
from .specfun import mittag_leffler

__all__ = [
    "OracleMethod",
    "OracleSolution",
    "OracleError",
    "picard_volterra",
    "nystrom_fredholm",
    "abel_reference",
    "abel_product_picard",
    "reference_solution",
]


class OracleError(RuntimeError):
    pass


class OracleMethod(enum.Enum):
    CLOSED_FORM = "closed_form"
    PICARD_QUADRATURE = "picard_quadrature"
    NYSTROM = "nystrom"
    ABEL_PRODUCT_QUADRATURE = "abel_product_quadrature"


@dataclass(frozen=True)
class OracleSolution:
    eval: Callable[[float], float]
    method: OracleMethod
    est_accuracy: float
    iterations: int = 0

    def __call__(self, point) -> float:
        return self.eval(point)


def _kernel_matrix(spec: ProblemSpec, nodes: np.ndarray) -> np.ndarray:
    g = len(nodes)
    out = np.empty((g, g))
    rows = max(1, 4_000_000 // g)
    for i0 in range(0, g, rows):
        a = nodes[i0 : i0 + rows, None]
        out[i0 : i0 + rows] = np.broadcast_to(
            evaluate(spec.kernel, a, nodes[None, :]), (len(a), g)
        )
    return out


def _rhs(spec: ProblemSpec, nodes: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(evaluate(spec.rhs, nodes), dtype=float), nodes.shape).copy()


def _picard(op: np.ndarray, f: np.ndarray, lam: float, iterations: int, tol: float):
    x = f.copy()  # x_1 = f
    for k in range(2, iterations + 1):
        nxt = f + lam * (op @ x)
        diff = float(np.max(np.abs(nxt - x)))
        x = nxt
        if not np.all(np.isfinite(x)):
            raise OracleError("Picard iteration diverged")
        if diff < tol * max(1.0, float(np.max(np.abs(x)))):
            return x, k
    raise OracleError(f"Picard iteration did not converge in {iterations} iterations")


def _volterra_grid(spec: ProblemSpec, steps: int, iterations: int):
    T = spec.horizon
    nodes = np.linspace(0.0, T, steps + 1)
    h = T / steps
    w = np.tril(np.full((steps + 1, steps + 1), h))
    w[:, 0] *= 0.5
    w[np.arange(steps + 1), np.arange(steps + 1)] *= 0.5
    w[0, 0] = 0.0
    op = _kernel_matrix(spec, nodes)
    op *= w
    x, k = _picard(op, _rhs(spec, nodes), spec.lam, iterations, 1e-13)
    return nodes, x, k


def _interp(nodes: np.ndarray, values: np.ndarray) -> Callable[[float], float]:
    def ev(point) -> float:
        p = float(point)
        if not nodes[0] - 1e-12 <= p <= nodes[-1] + 1e-12:
            raise ValueError(f"point {p} outside [{nodes[0]}, {nodes[-1]}]")
        return float(np.interp(p, nodes, values))

    return ev


def _halving_accuracy(fine: np.ndarray, coarse: np.ndarray) -> float:
    # second-order: error(fine) ~ |fine - coarse| / 3
    return max(float(np.max(np.abs(fine[::2] - coarse))) / 3.0, 1e-15)


def picard_volterra(spec: ProblemSpec, grid_steps: int = 1024, iterations: int = 500) -> OracleSolution:
    """Picard recursion ``x_n = f + lam K[x_{n-1}]`` on a trapezoid grid over ``[0, T]``.

    ``est_accuracy`` is the Richardson estimate from a run on half the steps.
    """
    if spec.family is not Family.VOLTERRA:
        raise ValueError("picard_volterra needs a Volterra problem")
    if grid_steps < 16:
        raise ValueError(f"grid_steps must be >= 16: {grid_steps}")
    grid_steps += grid_steps % 2
    nodes, x, k = _volterra_grid(spec, grid_steps, iterations)
    _, xc, _ = _volterra_grid(spec, grid_steps // 2, iterations)
    return OracleSolution(
        _interp(nodes, x), OracleMethod.PICARD_QUADRATURE, _halving_accuracy(x, xc), k
    )


def _nystrom_grid(spec: ProblemSpec, steps: int) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(0.0, 1.0, steps + 1)
    w = np.full(steps + 1, 1.0 / steps)
    w[0] *= 0.5
    w[-1] *= 0.5
    system = np.eye(steps + 1) - spec.lam * _kernel_matrix(spec, nodes) * w[None, :]
    with warnings.catch_warnings():
        # LAPACK's reciprocal condition estimate flags near-singular systems
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            x = scipy.linalg.solve(system, _rhs(spec, nodes))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise OracleError("discretized Fredholm operator is singular") from exc
    return nodes, x


def nystrom_fredholm(spec: ProblemSpec, grid_steps: int = 1024) -> OracleSolution:
    """Solve ``(I - lam K W) x = f`` with trapezoid weights on ``[0, 1]``.

    Values between nodes are linearly interpolated.
    """
    if spec.family is not Family.FREDHOLM:
        raise ValueError("nystrom_fredholm needs a Fredholm problem")
    if spec.domain_dim != 1:
        raise ValueError("the Nystrom oracle covers one-dimensional domains only")
    grid_steps += grid_steps % 2
    nodes, x = _nystrom_grid(spec, grid_steps)
    _, xc = _nystrom_grid(spec, grid_steps // 2)
    return OracleSolution(_interp(nodes, x), OracleMethod.NYSTROM, _halving_accuracy(x, xc))


def _constant_value(node) -> float | None:
    if variables(node):
        return None
    return float(evaluate(node))


def _abel_weights(steps: int, h: float, alpha: float) -> np.ndarray:
    """Product-trapezoid weights for ``int_0^{t_i} (t_i - s)^-alpha g(s) ds``.

    ``g`` is interpolated linearly between nodes and integrated exactly
    against the singular factor.
    """
    beta = 1.0 - alpha
    g = steps + 1
    # moments over [t_j, t_{j+1}] with a = t_i - t_j, b = a - h
    k = np.arange(1, g)  # k = i - j >= 1
    a = k * h
    b = (k - 1) * h
    m0 = (a**beta - b**beta) / beta
    m1 = (a ** (1 + beta) - b ** (1 + beta)) / (1 + beta)  # int r^{1-alpha} dr
    # g(s) = g_j (t_{j+1} - s)/h + g_{j+1} (s - t_j)/h, s - t_j = a - r
    left = m0 - (a * m0 - m1) / h  # coefficient of g_j
    right = (a * m0 - m1) / h  # coefficient of g_{j+1}
    w = np.zeros((g, g))
    i, j = np.tril_indices(g, -1)
    kk = i - j  # subinterval [t_j, t_{j+1}] for j < i
    w[i, j] += left[kk - 1]
    w[i, j + 1] += right[kk - 1]
    return w


def _abel_grid(spec: ProblemSpec, steps: int, iterations: int):
    T = spec.horizon
    nodes = np.linspace(0.0, T, steps + 1)
    op = _kernel_matrix(spec, nodes) * _abel_weights(steps, T / steps, spec.alpha)
    x, k = _picard(op, _rhs(spec, nodes), spec.lam, iterations, 1e-13)
    return nodes, x, k


def abel_product_picard(
    spec: ProblemSpec, grid_steps: int = 1024, iterations: int = 1000
) -> OracleSolution:
    """Picard iteration with singularity-exact product-trapezoid weights."""
    if spec.family is not Family.ABEL:
        raise ValueError("abel_product_picard needs an Abel problem")
    grid_steps += grid_steps % 2
    nodes, x, k = _abel_grid(spec, grid_steps, iterations)
    _, xc, _ = _abel_grid(spec, grid_steps // 2, iterations)
    # singular kernels converge below second order; report the raw difference
    acc = max(float(np.max(np.abs(x[::2] - xc))), 1e-15)
    return OracleSolution(_interp(nodes, x), OracleMethod.ABEL_PRODUCT_QUADRATURE, acc, k)


def abel_reference(spec: ProblemSpec, t: float, grid_steps: int = 1024) -> float:
    """Reference value of an Abel problem at ``t``.

    Constant kernel ``c`` and right-hand side ``a`` have the closed form
    ``a E_beta(lam c Gamma(beta) t^beta)``; everything else goes through
    :func:`abel_product_picard`.
    """
    if spec.family is not Family.ABEL:
        raise ValueError("abel_reference needs an Abel problem")
    if t == 0:
        return float(evaluate(spec.rhs, 0.0))
    c = _constant_value(spec.kernel)
    a = _constant_value(spec.rhs)
    if c is not None and a is not None and c >= 0:
        beta = spec.beta
        return a * mittag_leffler(beta, spec.lam * c * math.gamma(beta) * t**beta)
    return abel_product_picard(spec, grid_steps)(t)


def reference_solution(spec: ProblemSpec, grid_steps: int = 1024) -> OracleSolution:
    """The default oracle for ``spec``'s family as a callable solution."""
    if spec.family is Family.VOLTERRA:
        return picard_volterra(spec, grid_steps)
    if spec.family is Family.FREDHOLM:
        return nystrom_fredholm(spec, grid_steps)
    c = _constant_value(spec.kernel)
    a = _constant_value(spec.rhs)
    if c is not None and a is not None and c >= 0:
        return OracleSolution(
            lambda t: abel_reference(spec, float(t)), OracleMethod.CLOSED_FORM, 1e-13
        )
    return abel_product_picard(spec, grid_steps)
