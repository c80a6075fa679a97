"""Scalar special functions used by the samplers and allocators.

All Gamma-ratio quantities are evaluated in log space; in linear space the
weights ``W_n`` and the truncation probabilities underflow long before the
series themselves are negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SeriesTolerance",
    "SeriesConvergenceError",
    "log_gamma",
    "mittag_leffler",
    "gen_mittag_leffler",
    "g_alpha",
    "w_n",
    "log_w_n",
]


class SeriesConvergenceError(ArithmeticError):
    """Raised when a series did not meet its stopping rule within budget."""


@dataclass(frozen=True)
class SeriesTolerance:
    """Truncation control for the power series in this module."""

    abs_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive: {self.abs_tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1: {self.max_terms}")


DEFAULT_TOL = SeriesTolerance()


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma is defined here only for x > 0, got {x}")
    return math.lgamma(x)


def _sum_log_terms(log_term, start: int, tol: SeriesTolerance, what: str) -> float:
    # Terms are positive and eventually decreasing for nonnegative arguments.
    # Stop once a term is negligible relative to the running sum *and* the
    # sequence has started to decrease, so a tiny leading term cannot end
    # the summation before a hump.
    total = 0.0
    prev = math.inf
    for n in range(start, start + tol.max_terms):
        lt = log_term(n)
        term = math.exp(lt) if lt > -745.0 else 0.0
        total += term
        if term <= tol.abs_tol * (1.0 + total) and term <= prev:
            return total
        prev = term
    raise SeriesConvergenceError(
        f"{what}: no convergence within {tol.max_terms} terms (partial sum {total:.6g})"
    )


def mittag_leffler(beta: float, z: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    r"""One-parameter Mittag-Leffler function :math:`E_\beta(z) = \sum z^n / \Gamma(1 + n\beta)`."""
    if not beta > 0:
        raise ValueError(f"beta must be positive: {beta}")
    if z < 0:
        raise ValueError(f"only z >= 0 is supported: {z}")
    if z == 0:
        return 1.0
    lz = math.log(z)
    return _sum_log_terms(
        lambda n: n * lz - math.lgamma(1.0 + n * beta), 0, tol, "mittag_leffler"
    )


def gen_mittag_leffler(
    beta: float,
    alpha_exp: float,
    delta: float,
    z: float,
    tol: SeriesTolerance = DEFAULT_TOL,
) -> float:
    r"""Generalized series :math:`\sum_{n \ge 1} z^n / (n^\delta \Gamma^{a}(1 + n\beta))`.

    With ``alpha_exp = 1`` and ``delta = 0`` this is ``mittag_leffler(beta, z) - 1``.
    """
    if not beta > 0 or not alpha_exp > 0:
        raise ValueError(f"beta and alpha_exp must be positive: {beta}, {alpha_exp}")
    if z < 0:
        raise ValueError(f"only z >= 0 is supported: {z}")
    if z == 0:
        return 0.0
    lz = math.log(z)
    return _sum_log_terms(
        lambda n: n * lz - delta * math.log(n) - alpha_exp * math.lgamma(1.0 + n * beta),
        1,
        tol,
        "gen_mittag_leffler",
    )


def g_alpha(alpha_exp: float, z: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    r"""Power series :math:`G_a(z) = \sum_{n \ge 0} n^a z^n` on ``0 <= z < 1``.

    The ``n = 0`` term is 1 when ``alpha_exp == 0`` and 0 otherwise.
    Terms are summed in vectorized chunks since ``z`` close to 1 needs
    tens of thousands of them.
    """
    if alpha_exp < 0:
        raise ValueError(f"alpha_exp must be >= 0: {alpha_exp}")
    if not 0 <= z < 1:
        raise ValueError(f"g_alpha requires 0 <= z < 1, got {z}")
    total = 1.0 if alpha_exp == 0 else 0.0
    if z == 0:
        return total
    lz = math.log(z)
    chunk = 4096
    n0 = 1
    while n0 <= tol.max_terms:
        n = np.arange(n0, min(n0 + chunk, tol.max_terms + 1), dtype=float)
        terms = np.exp(alpha_exp * np.log(n) + n * lz)
        csum = total + np.cumsum(terms)
        # terms are decreasing once n > alpha / |ln z|
        peak = alpha_exp / -lz
        done = np.nonzero((terms <= tol.abs_tol * (1.0 + csum)) & (n > peak))[0]
        if done.size:
            return float(csum[done[0]])
        total = float(csum[-1])
        n0 += chunk
    raise SeriesConvergenceError(
        f"g_alpha: no convergence within {tol.max_terms} terms at z={z}"
    )


def log_w_n(beta: float, n: int | np.ndarray) -> float | np.ndarray:
    """``log W_n(beta) = n log Gamma(beta) - log Gamma(1 + n beta)``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive: {beta}")
    from scipy.special import gammaln

    n = np.asarray(n, dtype=float)
    out = n * math.lgamma(beta) - gammaln(1.0 + n * beta)
    return float(out) if out.ndim == 0 else out


def w_n(beta: float, n: int) -> float:
    r"""Simplex weight :math:`W_n(\beta) = \Gamma^n(\beta) / \Gamma(1 + n\beta)`."""
    if n < 0:
        raise ValueError(f"n must be nonnegative: {n}")
    return math.exp(log_w_n(beta, n))
