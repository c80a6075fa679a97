"""Command-line front end.

Subcommands ``validate``, ``allocate``, ``solve``, ``compare`` and ``bench``
all read a flat ``key = value`` config and write CSV.  Exit status is 0 on
success, 1 for an invalid problem or a failed computation, 2 for usage and
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import numbers
import sys
import time
from contextlib import contextmanager

from .allocation import BudgetError, build_plan, expected_cost, truncation_law
from .config import ConfigError, RunConfig, load_config
from .estimator import EstimatorConfig, estimate_point
from .expr import EvaluationError
from .oracle import OracleError, reference_solution
from .problem import compute_norms, validate_problem

SOLVE_HEADER = ["point", "scaled", "unscaled", "stderr", "ci_lo", "ci_hi", "R", "theta"]
COMPARE_HEADER = SOLVE_HEADER + ["oracle", "abs_diff", "diff_over_stderr"]
ALLOCATE_HEADER = ["n", "n0", "n_rounded", "pmf"]
BENCH_HEADER = ["Z", "stderr", "R", "wall_time"]


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, tuple):
        return " ".join(_fmt(c) for c in x)
    if isinstance(x, numbers.Integral) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


@contextmanager
def _sink(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write(cfg: RunConfig, header: list[str], rows: list[list], trailer: list[str] = ()) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    for line in trailer:
        buf.write(f"# {line}\n")
    with _sink(cfg.output_path) as fh:
        fh.write(buf.getvalue())


def _prepare(cfg: RunConfig):
    norms = compute_norms(cfg.spec, cfg.grid_per_axis)
    verdict = validate_problem(cfg.spec, norms)
    return norms, verdict


def _require_valid(cfg: RunConfig):
    norms, verdict = _prepare(cfg)
    if not verdict.valid:
        raise RuntimeError("invalid problem: " + "; ".join(verdict.failures))
    return norms


def cmd_validate(cfg: RunConfig) -> int:
    norms, verdict = _prepare(cfg)
    out = sys.stdout
    out.write(f"family: {cfg.spec.family.value}\n")
    for field in dataclasses.fields(norms):
        out.write(f"{field.name}: {getattr(norms, field.name)!r}\n")
    if verdict.valid:
        out.write("valid\n")
        return 0
    for failure in verdict.failures:
        out.write(f"FAIL: {failure}\n")
    out.write("invalid\n")
    return 1


def _plan(cfg: RunConfig, norms, point, cost=None):
    return build_plan(
        cfg.spec, norms, point, cost or cfg.cost, cfg.zero_threshold, cfg.tail_policy
    )


def cmd_allocate(cfg: RunConfig) -> int:
    """Allocation table for the first evaluation point."""
    norms = _require_valid(cfg)
    point = cfg.eval_points[0]
    try:
        plan = _plan(cfg, norms, point)
    except BudgetError as exc:
        sys.stderr.write(f"error: {exc}\nminimal feasible theta_target: {exc.minimal_theta!r}\n")
        return 1
    law = truncation_law(cfg.spec, point)
    rows = [
        [n, plan.n0[n], int(plan.table[n]), plan.pmf[n]] for n in range(plan.n_max + 1)
    ]
    theta = expected_cost(plan, law, cfg.cost)
    _write(
        cfg,
        ALLOCATE_HEADER,
        rows,
        [f"predicted_D={plan.predicted_D!r}", f"theta={theta!r}", f"budget_M={plan.budget_M!r}"],
    )
    return 0


def _solve_rows(cfg: RunConfig, norms):
    reports = []
    for point in cfg.eval_points:
        plan = _plan(cfg, norms, point)
        econf = EstimatorConfig(cfg.z_outer, plan, cfg.seed, cfg.confidence_level)
        reports.append(estimate_point(cfg.spec, point, econf))
    return reports


def _row(r) -> list:
    return [
        r.eval_point,
        r.scaled_estimate,
        r.unscaled_estimate,
        r.std_error,
        r.ci_low,
        r.ci_high,
        r.realized_cost_R,
        r.expected_cost_Theta,
    ]


def cmd_solve(cfg: RunConfig) -> int:
    norms = _require_valid(cfg)
    _write(cfg, SOLVE_HEADER, [_row(r) for r in _solve_rows(cfg, norms)])
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    """Estimates next to the deterministic oracle; ``diff_over_stderr`` uses
    the standard error of the unscaled estimate."""
    norms = _require_valid(cfg)
    oracle = reference_solution(cfg.spec, 2048)
    rows = []
    for r in _solve_rows(cfg, norms):
        ref = oracle(r.eval_point)
        diff = abs(r.unscaled_estimate - ref)
        se = r.unscaled_std_error
        ratio = diff / se if se > 0 else (0.0 if diff == 0 else float("inf"))
        rows.append(_row(r) + [ref, diff, ratio])
    _write(cfg, COMPARE_HEADER, rows)
    return 0


def cmd_bench(cfg: RunConfig, z_list: list[int]) -> int:
    """Standard error, realized cost and wall time at several ``Z``.

    The per-replicate budget ``theta_target / z_outer`` is held fixed.
    """
    if not z_list:
        raise UsageError("bench needs a nonempty --z-list")
    norms = _require_valid(cfg)
    point = cfg.eval_points[0]
    per_rep = cfg.cost.theta_target / cfg.z_outer
    rows = []
    for z in z_list:
        cost = dataclasses.replace(cfg.cost, z_outer=z, theta_target=per_rep * z)
        plan = _plan(cfg, norms, point, cost)
        start = time.perf_counter()
        r = estimate_point(cfg.spec, point, EstimatorConfig(z, plan, cfg.seed, cfg.confidence_level))
        rows.append([z, r.std_error, r.realized_cost_R, time.perf_counter() - start])
    _write(cfg, BENCH_HEADER, rows)
    return 0


def _z_list(text: str) -> list[int]:
    try:
        return [int(z) for z in text.split(",") if z.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --z-list: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neumann-mc",
        description="Unbiased Monte Carlo solver for second-kind linear integral equations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("validate", "check the convergence conditions and print the norms"),
        ("allocate", "inner replicate table n, N0(n), N(n), pmf(n)"),
        ("solve", "estimate the solution at eval_points"),
        ("compare", "estimate and compare with the deterministic oracle"),
        ("bench", "standard error and cost against the number of outer replicates"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output CSV path ('-' for stdout)")
        if name == "bench":
            p.add_argument("--z-list", type=_z_list, default=[], help="comma-separated Z values")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_path=args.out)
    try:
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "allocate":
            return cmd_allocate(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_bench(cfg, args.z_list)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except (RuntimeError, BudgetError, EvaluationError, OracleError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
