"""Reproducible random streams and the samplers the estimators draw from.

Streams are counter-based (Philox) and keyed by ``(seed, stream_id)``, so a
stream can be rebuilt anywhere from two integers and different ``stream_id``
values never overlap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .specfun import SeriesTolerance, mittag_leffler

__all__ = [
    "RngStream",
    "LawKind",
    "TruncationLaw",
    "SimplexPoint",
    "TableOverflowError",
    "pmf",
    "sample_truncation",
    "sample_simplex_uniform",
    "sample_polygonal_beta",
    "simplex_uniform_array",
    "polygonal_beta_array",
]

_MASK64 = (1 << 64) - 1


class RngStream:
    """A Philox stream identified by ``(seed, stream_id)``.

    Two streams built from the same pair emit identical sequences.  The object
    is mutable (it advances as it is consumed) and must be owned by one worker
    at a time.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def random(self, size=None):
        """Uniforms on the open interval (0, 1)."""
        u = self.generator.random(size)
        # Generator.random is on [0, 1); map exact zeros away
        if np.ndim(u) == 0:
            return u if u > 0 else 2.0**-60
        u[u == 0.0] = 2.0**-60
        return u

    def gamma(self, shape: float, size=None):
        return self.generator.gamma(shape, 1.0, size)

    def exponential(self, size=None):
        return self.generator.standard_exponential(size)


class LawKind(enum.Enum):
    POISSON = "poisson"
    GEOMETRIC = "geometric"
    MITTAG_LEFFLER = "mittag_leffler"


class TableOverflowError(RuntimeError):
    """The cumulative table did not reach its tail cutoff within budget."""


@dataclass(frozen=True)
class TruncationLaw:
    """Integer law choosing which Neumann term a replicate samples.

    * ``POISSON``: ``P(n) = exp(-lam) lam^n / n!`` with ``lam = lambda * t``.
    * ``GEOMETRIC``: ``P(n) = (1 - ratio) ratio^n``.
    * ``MITTAG_LEFFLER``: ``P(n) = mu^n / Gamma(1 + beta n) / E_beta(mu)``.
    """

    kind: LawKind
    lambda_cap: float = 0.0
    ratio: float = 0.0
    beta: float = 1.0
    mu: float = 0.0
    tail_mass: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self) -> None:
        if self.kind is LawKind.POISSON and not self.lambda_cap >= 0:
            raise ValueError(f"Poisson parameter must be >= 0: {self.lambda_cap}")
        if self.kind is LawKind.GEOMETRIC and not 0 <= self.ratio < 1:
            raise ValueError(f"geometric ratio must lie in [0, 1): {self.ratio}")
        if self.kind is LawKind.MITTAG_LEFFLER:
            if not 0 < self.beta <= 1:
                raise ValueError(f"beta must lie in (0, 1]: {self.beta}")
            if not self.mu >= 0:
                raise ValueError(f"mu must be >= 0: {self.mu}")

    @classmethod
    def poisson(cls, lambda_cap: float) -> TruncationLaw:
        return cls(LawKind.POISSON, lambda_cap=lambda_cap)

    @classmethod
    def geometric(cls, ratio: float) -> TruncationLaw:
        return cls(LawKind.GEOMETRIC, ratio=ratio)

    @classmethod
    def mittag_leffler(cls, beta: float, mu: float) -> TruncationLaw:
        return cls(LawKind.MITTAG_LEFFLER, beta=beta, mu=mu)

    @cached_property
    def log_normalizer(self) -> float:
        if self.kind is LawKind.POISSON:
            return self.lambda_cap
        if self.kind is LawKind.GEOMETRIC:
            return -math.log1p(-self.ratio)
        return math.log(mittag_leffler(self.beta, self.mu))

    def log_pmf(self, n: np.ndarray | int) -> np.ndarray | float:
        from scipy.special import gammaln, xlogy

        n = np.asarray(n, dtype=float)
        if self.kind is LawKind.POISSON:
            out = xlogy(n, self.lambda_cap) - gammaln(n + 1.0) - self.lambda_cap
        elif self.kind is LawKind.GEOMETRIC:
            out = xlogy(n, self.ratio) + math.log1p(-self.ratio)
        else:
            out = xlogy(n, self.mu) - gammaln(1.0 + self.beta * n) - self.log_normalizer
        return float(out) if out.ndim == 0 else out

    @cached_property
    def table(self) -> np.ndarray:
        """pmf values ``P(0), ..., P(n_max)`` with tail mass below ``tail_mass``."""
        chunks = []
        total = 0.0
        n0 = 0
        step = 64
        while n0 < self.max_terms:
            p = np.exp(self.log_pmf(np.arange(n0, n0 + step)))
            csum = total + np.cumsum(p)
            hit = np.nonzero(1.0 - csum < self.tail_mass)[0]
            if hit.size:
                chunks.append(p[: hit[0] + 1])
                break
            chunks.append(p)
            total = float(csum[-1])
            n0 += step
        else:
            raise TableOverflowError(
                f"{self.kind.value} law: tail mass not below {self.tail_mass} "
                f"within {self.max_terms} terms"
            )
        out = np.concatenate(chunks)
        out.setflags(write=False)
        return out

    @cached_property
    def cdf(self) -> np.ndarray:
        out = np.cumsum(self.table)
        out.setflags(write=False)
        return out

    @property
    def support_max(self) -> int:
        return len(self.table) - 1

    def mean(self) -> float:
        if self.kind is LawKind.POISSON:
            return self.lambda_cap
        if self.kind is LawKind.GEOMETRIC:
            return self.ratio / (1.0 - self.ratio)
        n = np.arange(len(self.table))
        return float(np.sum(n * self.table))

    def inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms to draws; inversion keeps draws monotone in ``u``."""
        u = np.asarray(u, dtype=float)
        if self.kind is LawKind.GEOMETRIC:
            if self.ratio == 0.0:
                return np.zeros(u.shape, dtype=np.int64)
            # P(n >= k) = ratio^k, so n = floor(log(1 - u) / log(ratio))
            return np.floor(np.log1p(-u) / math.log(self.ratio)).astype(np.int64)
        # draws beyond the table carry < tail_mass probability; clip to the table
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, self.support_max).astype(np.int64)


def pmf(law: TruncationLaw, n: int) -> float:
    """Probability that ``law`` draws ``n``."""
    if n < 0:
        return 0.0
    return math.exp(law.log_pmf(n))


def sample_truncation(law: TruncationLaw, rng: RngStream, size=None):
    """Draw truncation indices from ``law`` (one uniform per draw)."""
    u = rng.random(size)
    out = law.inverse_cdf(u)
    return int(out) if size is None else out


@dataclass(frozen=True)
class SimplexPoint:
    """An ordered point ``1 > s_1 > s_2 > ... > s_n > 0``."""

    coords: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        c = self.coords
        if c and not (c[0] < 1.0 and c[-1] > 0.0 and all(a > b for a, b in zip(c, c[1:]))):
            raise ValueError(f"not a strictly ordered simplex point: {c}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def _bad_rows(pts: np.ndarray) -> np.ndarray:
    bad = (pts[:, 0] >= 1.0) | (pts[:, -1] <= 0.0)
    if pts.shape[1] > 1:
        bad |= np.any(np.diff(pts, axis=1) >= 0.0, axis=1)
    return bad


def simplex_uniform_array(n: int, rng: RngStream, size: int) -> np.ndarray:
    """``size`` uniform points of ``S(n)`` as rows of a ``(size, n)`` array."""
    if n < 1:
        raise ValueError(f"simplex dimension must be >= 1: {n}")
    pts = -np.sort(-rng.random((size, n)), axis=1)
    bad = _bad_rows(pts)
    while np.any(bad):
        k = int(bad.sum())
        pts[bad] = -np.sort(-rng.random((k, n)), axis=1)
        bad = _bad_rows(pts)
    return pts


def polygonal_beta_array(alpha: float, n: int, rng: RngStream, size: int) -> np.ndarray:
    """``size`` polygonal-Beta points of ``S(n)``.

    Gaps ``(1 - s_1, s_1 - s_2, ..., s_{n-1} - s_n, s_n)`` are drawn from
    Dirichlet(beta, ..., beta, 1) with ``beta = 1 - alpha``; the Dirichlet
    normalizer of that gap law is exactly ``W_n(beta)``.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1): {alpha}")
    if n < 1:
        raise ValueError(f"simplex dimension must be >= 1: {n}")
    beta = 1.0 - alpha

    def draw(k: int) -> np.ndarray:
        g = np.empty((k, n + 1))
        g[:, :n] = rng.gamma(beta, (k, n))
        g[:, n] = rng.exponential(k)
        g /= g.sum(axis=1, keepdims=True)
        # s_k is the sum of the gaps below it; accumulating from the bottom
        # keeps small coordinates accurate
        return np.cumsum(g[:, :0:-1], axis=1)[:, ::-1]

    pts = draw(size)
    bad = _bad_rows(pts)
    while np.any(bad):
        pts[bad] = draw(int(bad.sum()))
        bad = _bad_rows(pts)
    return pts


def sample_simplex_uniform(n: int, rng: RngStream) -> SimplexPoint:
    """One uniform point of ``S(n)``: ``n`` uniforms sorted decreasingly."""
    return SimplexPoint(tuple(simplex_uniform_array(n, rng, 1)[0].tolist()))


def sample_polygonal_beta(alpha: float, n: int, rng: RngStream) -> SimplexPoint:
    """One point with density proportional to the product of gaps to ``-alpha``."""
    return SimplexPoint(tuple(polygonal_beta_array(alpha, n, rng, 1)[0].tolist()))
