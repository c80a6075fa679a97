"""Flat ``key = value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .allocation import CostModel, TailPolicy
from .problem import Family, ProblemSpec

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "KEYS"]

KEYS = (
    "family",
    "kernel",
    "rhs",
    "lambda",
    "alpha",
    "horizon",
    "domain_dim",
    "z_outer",
    "theta_target",
    "per_node_cost",
    "seed",
    "zero_threshold",
    "tail_policy",
    "confidence_level",
    "eval_points",
    "grid_per_axis",
    "output_path",
)
REQUIRED = ("family", "kernel", "rhs", "lambda", "eval_points")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    spec: ProblemSpec
    eval_points: tuple
    z_outer: int = 10_000
    theta_target: float | None = None
    per_node_cost: int = 1
    seed: int = 0
    zero_threshold: int = 0
    tail_policy: TailPolicy = TailPolicy.ONE
    confidence_level: float = 0.95
    grid_per_axis: int = 101
    output_path: str | None = None

    @property
    def cost(self) -> CostModel:
        # default budget: 100 node evaluations per outer replicate
        theta = self.theta_target
        if theta is None:
            theta = 100.0 * self.z_outer * self.per_node_cost
        return CostModel(self.z_outer, theta, self.per_node_cost)


def _points(text: str, dim: int) -> tuple:
    text = text.strip()
    if not text:
        raise ValueError("eval_points is empty")
    if dim == 1:
        return tuple(float(p) for p in text.split(","))
    pts = []
    for chunk in text.split(";"):
        coords = tuple(float(c) for c in chunk.split(","))
        if len(coords) != dim:
            raise ValueError(f"point {chunk.strip()!r} does not have {dim} coordinates")
        pts.append(coords)
    return tuple(pts)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse the flat configuration format.

    One ``key = value`` pair per line; ``#`` starts a comment; unknown or
    repeated keys are errors.  ``eval_points`` is comma separated on
    one-dimensional domains and ``;``-separated points of comma-separated
    coordinates otherwise.
    """
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first on line {raw[key][1]})")
        raw[key] = (value, lineno)
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")

    def get(key, conv, default=None):
        if key not in raw:
            return default
        value, lineno = raw[key]
        try:
            return conv(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc

    family = get("family", Family.parse)
    if family is Family.ABEL and "alpha" not in raw:
        raise ConfigError(f"{source}: abel problems need 'alpha'")
    dim = get("domain_dim", int, 1)
    try:
        spec = ProblemSpec(
            family=family,
            kernel=raw["kernel"][0],
            rhs=raw["rhs"][0],
            lam=get("lambda", float),
            horizon=get("horizon", float, 1.0),
            domain_dim=dim,
            alpha=get("alpha", float),
        )
    except ValueError as exc:
        lineno = raw["kernel"][1]
        raise ConfigError(f"{source}: invalid problem (kernel on line {lineno}): {exc}") from exc
    cfg = RunConfig(
        spec=spec,
        eval_points=get("eval_points", lambda v: _points(v, dim)),
        z_outer=get("z_outer", int, 10_000),
        theta_target=get("theta_target", float),
        per_node_cost=get("per_node_cost", int, 1),
        seed=get("seed", int, 0),
        zero_threshold=get("zero_threshold", int, 0),
        tail_policy=get("tail_policy", lambda v: TailPolicy(v.strip().lower()), TailPolicy.ONE),
        confidence_level=get("confidence_level", float, 0.95),
        grid_per_axis=get("grid_per_axis", int, 101),
        output_path=get("output_path", str),
    )
    if cfg.z_outer < 2:
        raise ConfigError(f"{source}: z_outer must be >= 2")
    if not 0 < cfg.confidence_level < 1:
        raise ConfigError(f"{source}: confidence_level must lie in (0, 1)")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))
