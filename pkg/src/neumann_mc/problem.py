"""Integral-equation instances, path weights and operator norms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, evaluate, parse_expression, variables
from .sampling import SimplexPoint

__all__ = [
    "Family",
    "ProblemSpec",
    "NormReport",
    "Verdict",
    "path_weight_volterra",
    "path_weight_fredholm",
    "volterra_weights",
    "fredholm_weights",
    "compute_norms",
    "validate_problem",
]


class Family(enum.Enum):
    VOLTERRA = "volterra"
    FREDHOLM = "fredholm"
    ABEL = "abel"

    @classmethod
    def parse(cls, text: str) -> Family:
        aliases = {"abelvolterra": "abel", "abel_volterra": "abel"}
        key = text.strip().lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class ProblemSpec:
    """One second-kind equation ``x = f + lam * K[x]``.

    Volterra and Abel problems live on ``[0, horizon]``; the Abel kernel is
    ``K(t, s) / (t - s)^alpha``.  Fredholm problems live on the unit cube
    ``[0, 1]^domain_dim`` with the uniform probability measure.

    ``kernel`` and ``rhs`` accept either source text or parsed expressions.
    """

    family: Family
    kernel: Expr
    rhs: Expr
    lam: float
    horizon: float = 1.0
    domain_dim: int = 1
    alpha: float | None = None
    kernel_text: str = field(default="", compare=False)
    rhs_text: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if isinstance(self.family, str):
            object.__setattr__(self, "family", Family.parse(self.family))
        for name in ("kernel", "rhs"):
            value = getattr(self, name)
            if isinstance(value, str):
                object.__setattr__(self, f"{name}_text", value)
                object.__setattr__(self, name, parse_expression(value))
        if any(role == "second" for role, _ in variables(self.rhs)):
            raise ValueError("the right-hand side may only use the first variable (t or u)")
        dim = self.domain_dim if self.family is Family.FREDHOLM else 1
        if self.family is not Family.FREDHOLM and self.domain_dim != 1:
            raise ValueError("Volterra and Abel problems are one-dimensional")
        if self.domain_dim < 1:
            raise ValueError(f"domain_dim must be >= 1: {self.domain_dim}")
        for _, index in variables(self.kernel) | variables(self.rhs):
            if index > dim:
                raise ValueError(f"coordinate {index} exceeds domain dimension {dim}")
        if self.family is Family.ABEL and self.alpha is None:
            raise ValueError("Abel problems need alpha")
        if self.family is not Family.FREDHOLM and not self.horizon > 0:
            raise ValueError(f"horizon must be positive: {self.horizon}")

    @property
    def beta(self) -> float:
        return 1.0 - (self.alpha or 0.0)

    @property
    def dim(self) -> int:
        return self.domain_dim

    def k(self, a, b):
        """Vectorized kernel ``K(a, b)`` (without the Abel singular factor)."""
        return evaluate(self.kernel, a, b, self.domain_dim)

    def f(self, a):
        return evaluate(self.rhs, a, None, self.domain_dim)


# Path weights --------------------------------------------------------------


def volterra_weights(spec: ProblemSpec, t: float, pts: np.ndarray) -> np.ndarray:
    """Row-wise ``K(t, t s_1) K(t s_1, t s_2) ... f(t s_n)`` for ``pts`` of shape ``(m, n)``."""
    m, n = pts.shape
    if n == 0:
        return np.broadcast_to(np.asarray(spec.f(t), dtype=float), (m,)).copy()
    nodes = t * pts
    out = np.ones(m)
    prev = np.full(m, float(t))
    for j in range(n):
        out = out * spec.k(prev, nodes[:, j])
        prev = nodes[:, j]
    return out * spec.f(prev)


def fredholm_weights(spec: ProblemSpec, u, nodes: np.ndarray) -> np.ndarray:
    """Row-wise ``K(u, s_1) K(s_1, s_2) ... K(s_{n-1}, s_n) f(s_n)``.

    ``nodes`` has shape ``(m, n)`` for one-dimensional domains and
    ``(m, n, d)`` otherwise.
    """
    d = spec.domain_dim
    if d == 1 and nodes.ndim == 3:
        nodes = nodes[..., 0]
    m, n = nodes.shape[:2]
    u = np.asarray(u, dtype=float)
    if n == 0:
        return np.broadcast_to(np.asarray(spec.f(u), dtype=float), (m,)).copy()
    prev = np.broadcast_to(u, (m,) if d == 1 else (m, d))
    out = np.ones(m)
    for j in range(n):
        cur = nodes[:, j]
        out = out * spec.k(prev, cur)
        prev = cur
    return out * spec.f(prev)


def path_weight_volterra(spec: ProblemSpec, t: float, point: SimplexPoint) -> float:
    """Path weight ``L_n(t, s)`` for Volterra and Abel problems; ``f(t)`` when ``n = 0``."""
    if spec.family is Family.FREDHOLM:
        raise ValueError("path_weight_volterra needs a Volterra or Abel problem")
    pts = point.as_array().reshape(1, point.dim)
    return float(volterra_weights(spec, t, pts)[0])


def path_weight_fredholm(spec: ProblemSpec, u, nodes) -> float:
    """Path weight ``K(u, s_1) ... K(s_{n-1}, s_n) f(s_n)``; ``f(u)`` for no nodes."""
    if spec.family is not Family.FREDHOLM:
        raise ValueError("path_weight_fredholm needs a Fredholm problem")
    d = spec.domain_dim
    arr = np.asarray(nodes, dtype=float)
    arr = arr.reshape(1, -1) if d == 1 else arr.reshape(1, -1, d)
    return float(fredholm_weights(spec, u, arr)[0])


# Norms ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormReport:
    sup_norm_K: float
    op_norm_K: float
    op_norm_K2: float
    sup_norm_f: float
    grid_points: int


def _trapezoid_weights(g: int, length: float = 1.0) -> np.ndarray:
    w = np.full(g, length / (g - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def compute_norms(spec: ProblemSpec, grid_per_axis: int = 101) -> NormReport:
    """Grid estimates of ``||K||``, ``|||K|||``, ``|||K^[2]|||`` and ``||f||``.

    Sup norms are maxima over a tensor grid.  For Fredholm problems the
    operator norms are ``max_u int |K(u, v)| dv`` (and the same for ``K^2``)
    by composite trapezoid on ``[0, 1]^d``; for Volterra and Abel problems
    they are the Volterra-operator analogues ``max_t int_0^t |K(t, s)| ds``.
    """
    if grid_per_axis < 2:
        raise ValueError(f"grid_per_axis must be >= 2: {grid_per_axis}")
    g = grid_per_axis
    if spec.family is Family.FREDHOLM:
        d = spec.domain_dim
        axis = np.linspace(0.0, 1.0, g)
        w1 = _trapezoid_weights(g)
        if d == 1:
            pts = axis
            w = w1
        else:
            mesh = np.meshgrid(*([axis] * d), indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            wm = np.meshgrid(*([w1] * d), indexing="ij")
            w = np.prod(np.stack([m.ravel() for m in wm]), axis=0)
        sup_k = op1 = op2 = 0.0
        rows = max(1, 2_000_000 // len(w))
        for i0 in range(0, len(w), rows):
            a = pts[i0 : i0 + rows]
            if d == 1:
                kk = np.broadcast_to(spec.k(a[:, None], pts[None, :]), (len(a), len(w)))
            else:
                kk = np.broadcast_to(
                    spec.k(a[:, None, :], pts[None, :, :]), (len(a), len(w))
                )
            ak = np.abs(kk)
            sup_k = max(sup_k, float(ak.max()))
            op1 = max(op1, float((ak @ w).max()))
            op2 = max(op2, float(((kk * kk) @ w).max()))
        sup_f = float(np.max(np.abs(np.broadcast_to(spec.f(pts), (len(w),)))))
        return NormReport(sup_k, op1, op2, sup_f, len(w))

    T = spec.horizon
    axis = np.linspace(0.0, T, g)
    kk = np.broadcast_to(spec.k(axis[:, None], axis[None, :]), (g, g))
    ak = np.abs(kk)
    sup_k = float(ak.max())
    h = T / (g - 1)
    # trapezoid over [0, t_i] using the lower triangle
    tri = np.tril(np.ones((g, g)))
    tw = tri * h
    tw[:, 0] *= 0.5
    tw[np.arange(g), np.arange(g)] *= 0.5
    tw[0, 0] = 0.0
    op1 = float(np.max(np.sum(ak * tw, axis=1)))
    op2 = float(np.max(np.sum(kk * kk * tw, axis=1)))
    sup_f = float(np.max(np.abs(np.broadcast_to(spec.f(axis), (g,)))))
    return NormReport(sup_k, op1, op2, sup_f, g * g)


# grid quadrature of a constant kernel is off by a few ulps
_QUAD_SLACK = 1e-12


@dataclass(frozen=True)
class Verdict:
    failures: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.valid


def validate_problem(spec: ProblemSpec, norms: NormReport) -> Verdict:
    """Check the conditions under which the randomized Neumann series applies.

    Fredholm problems need ``0 < lam < 1``, ``|||K||| <= 1`` and
    ``lam * |||K^[2]||| < 1``; Volterra and Abel problems need ``lam > 0`` and,
    for Abel, ``0 < alpha < 1``.
    """
    failures = []
    lam = spec.lam
    if spec.family is Family.FREDHOLM:
        if not 0 < lam < 1:
            failures.append("lambda not in (0,1)")
        if norms.op_norm_K > 1 + _QUAD_SLACK:
            failures.append(f"|||K||| = {norms.op_norm_K:.6g} > 1")
        if lam * norms.op_norm_K2 >= 1 - _QUAD_SLACK:
            failures.append(f"lambda*|||K^[2]||| = {lam * norms.op_norm_K2:.6g} >= 1")
    else:
        if not lam > 0:
            failures.append("lambda not positive")
        if spec.family is Family.ABEL:
            if spec.alpha is None or not 0 < spec.alpha < 1:
                failures.append("alpha not in (0,1)")
    if not all(math.isfinite(x) for x in (norms.sup_norm_K, norms.sup_norm_f)):
        failures.append("kernel or right-hand side not finite on the grid")
    return Verdict(tuple(failures))
