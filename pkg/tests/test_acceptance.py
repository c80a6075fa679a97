"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Every test records a single pass/fail line, and the lines are repeated in
the terminal summary.  Wall-clock limits are part of each criterion.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from neumann_mc.allocation import (
    CostModel,
    abel_allocation,
    build_plan,
    fredholm_allocation,
    round_allocation,
    solve_allocation,
    variance_bound,
    volterra_allocation,
)
from neumann_mc.estimator import EstimatorConfig, estimate_point, replicate_values
from neumann_mc.oracle import picard_volterra
from neumann_mc.problem import NormReport, ProblemSpec, compute_norms, validate_problem
from neumann_mc.sampling import (
    RngStream,
    TruncationLaw,
    pmf,
    polygonal_beta_array,
    simplex_uniform_array,
)
from neumann_mc.specfun import (
    SeriesTolerance,
    g_alpha,
    gen_mittag_leffler,
    log_w_n,
    mittag_leffler,
)

pytestmark = pytest.mark.slow


def plan_config(spec, point, z, seed=0, per_rep=100.0):
    norms = compute_norms(spec)
    plan = build_plan(spec, norms, point, CostModel(z, per_rep * z))
    return EstimatorConfig(z, plan, seed)


# 1 ---------------------------------------------------------------------------


def test_criterion_1_zero_variance(report):
    start = time.perf_counter()
    vol = ProblemSpec("volterra", "1", "1", 1.0)
    rv = estimate_point(vol, 1.0, plan_config(vol, 1.0, 1000))
    fred = ProblemSpec("fredholm", "1", "1", 0.5)
    rf = estimate_point(fred, 0.5, plan_config(fred, 0.5, 1000))
    elapsed = time.perf_counter() - start
    ok = (
        rv.scaled_estimate == 1.0
        and rv.std_error == 0.0
        and abs(rv.unscaled_estimate - math.e) <= 1e-12
        and rf.unscaled_estimate == 2.0
        and elapsed < 1.0
    )
    report(
        "1",
        ok,
        f"volterra scaled={rv.scaled_estimate!r} se={rv.std_error!r} "
        f"unscaled-e={rv.unscaled_estimate - math.e:.1e}; fredholm unscaled={rf.unscaled_estimate!r}; "
        f"{elapsed:.2f}s",
    )
    assert ok


# 2 ---------------------------------------------------------------------------

SEEDS = 10_000
Z_SMALL = 100


def _grand_mean(spec, point):
    cfg = plan_config(spec, point, Z_SMALL)
    means = np.empty(SEEDS)
    for seed in range(SEEDS):
        r = estimate_point(spec, point, EstimatorConfig(Z_SMALL, cfg.plan, seed))
        means[seed] = r.unscaled_estimate
    return means.mean(), means.std(ddof=1) / math.sqrt(SEEDS)


def test_criterion_2_unbiasedness(report):
    start = time.perf_counter()
    rows = []

    vol = ProblemSpec("volterra", "t*s", "1", 0.5)
    oracle = picard_volterra(vol, 4096)
    rows.append(("volterra", vol, 1.0, oracle(1.0), oracle.est_accuracy))

    fred = ProblemSpec("fredholm", "u*v", "u", 0.5)
    rows.append(("fredholm", fred, 1.0, 1.2, 0.0))

    abel = ProblemSpec("abel", "1", "1", 0.5, alpha=0.5)
    exact = mittag_leffler(0.5, 0.5 * math.sqrt(math.pi))
    # the series oracle is accurate to its stopping tolerance
    rows.append(("abel", abel, 1.0, exact, 1e-13 * exact))

    ok = oracle.est_accuracy < 1e-7
    parts = []
    for name, spec, point, ref, ref_acc in rows:
        mean, se = _grand_mean(spec, point)
        combined = math.sqrt(se * se + ref_acc * ref_acc)
        z = abs(mean - ref) / combined
        ok &= z <= 4.0
        parts.append(f"{name} |mean-oracle|/se={z:.2f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120.0
    report("2", ok, "; ".join(parts) + f"; oracle acc={oracle.est_accuracy:.1e}; {elapsed:.1f}s")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_criterion_3_lagrange_allocation(report):
    start = time.perf_counter()
    values = (0.2, 1.0, 5.0)
    worst_d = 0.0
    worst_ratio = 0.0
    instances = skipped = 0
    grids = {
        k: np.array(list(itertools.product(range(1, 7), repeat=k)), dtype=float)
        for k in range(1, 5)
    }
    for k in range(1, 5):
        cand = grids[k]
        for a in itertools.product(values, repeat=k):
            a = np.array(a)
            for b in itertools.product(values, repeat=k):
                b = np.array(b)
                for m in (8.0, 32.0):
                    instances += 1
                    n0, d = solve_allocation(a, b, m)
                    ref = np.sum(np.sqrt(a * b)) ** 2 / m
                    worst_d = max(worst_d, abs(d - ref) / ref, abs(np.sum(a / n0) - ref) / ref)
                    feasible = cand @ b <= m
                    if not feasible.any():
                        skipped += 1
                        continue
                    best = np.min((a / cand[feasible]).sum(axis=1))
                    rounded = round_allocation(n0)
                    worst_ratio = max(worst_ratio, float(np.sum(a / rounded)) / best)
    elapsed = time.perf_counter() - start
    ok = worst_d <= 1e-12 and worst_ratio <= 1.25 and elapsed < 10.0
    report(
        "3",
        ok,
        f"{instances} instances ({skipped} without a feasible N<=6); max D rel err={worst_d:.1e}; "
        f"max rounded/best={worst_ratio:.3f}; {elapsed:.2f}s",
    )
    assert ok


# 4 ---------------------------------------------------------------------------
# Reference closed forms for N_0(n), taken literally, with the plan's own budget M
# as the prefactor.


def _norms(k):
    return NormReport(k, k, k * k, 1.0, 0)


def _rel(a, b):
    return float(np.max(np.abs(a / b - 1.0)))


def _closed_form_volterra(m, lam_t, k, n):
    s = gen_mittag_leffler(1.0, 1.5, -0.5, lam_t * k)
    fact = np.array([math.factorial(int(j)) for j in n], dtype=float)
    return m / s * k**n * np.sqrt(n) / fact


def _closed_form_fredholm(m, lam, k2, n):
    return m / g_alpha(0.5, lam * math.sqrt(k2)) * k2 ** (n / 2) / np.sqrt(n)


def _closed_form_abel(m, lam_b, k, beta, n):
    denom = gen_mittag_leffler(beta, 1.5, 0.5, lam_b * k * math.gamma(beta) ** 1.5)
    lg = np.array([math.lgamma(1 + beta * j) for j in n])
    shape = np.exp(log_w_n(beta, n) + n * math.log(k) + 0.5 * lg - 0.5 * np.log(n) - 0.5 * n * math.lgamma(beta))
    return m / denom * shape


def test_criterion_4_volterra_closed_form(report):
    start = time.perf_counter()
    worst = 0.0
    for lam_t, k in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (1.5, 1.2), (0.3, 3.0)]:
        spec = ProblemSpec("volterra", "1", "1", lam_t)
        plan = volterra_allocation(spec, _norms(k), 1.0, CostModel(100, 1e6))
        n = np.arange(1, plan.n_max + 1)
        worst = max(worst, _rel(plan.n0[1:], _closed_form_volterra(plan.budget_M, lam_t, k, n)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    report("4 (volterra)", ok, f"max rel deviation from closed-form N_0={worst:.3e}; {elapsed:.2f}s")
    assert ok


def test_criterion_4_fredholm_closed_form(report):
    start = time.perf_counter()
    worst = 0.0
    for lam, k2 in [(0.5, 1.0), (0.3, 0.5), (0.8, 0.9), (0.1, 0.2), (0.6, 1.0)]:
        spec = ProblemSpec("fredholm", "1", "1", lam)
        plan = fredholm_allocation(spec, NormReport(1.0, 1.0, k2, 1.0, 0), CostModel(100, 1e6))
        n = np.arange(1, plan.n_max + 1)
        worst = max(worst, _rel(plan.n0[1:], _closed_form_fredholm(plan.budget_M, lam, k2, n)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    report("4 (fredholm)", ok, f"max rel deviation from closed-form N_0={worst:.3e}; {elapsed:.2f}s")
    assert ok


def test_criterion_4_abel_closed_form(report):
    start = time.perf_counter()
    worst = 0.0
    for alpha, lam, t, k in [
        (0.5, 0.5, 1.0, 1.0),
        (0.3, 1.0, 0.7, 0.9),
        (0.6, 0.5, 1.5, 0.9),
        (0.2, 0.4, 2.0, 1.1),
        (0.4, 0.8, 1.0, 0.6),
    ]:
        beta = 1 - alpha
        spec = ProblemSpec("abel", "1", "1", lam, alpha=alpha, horizon=2.0)
        plan = abel_allocation(spec, _norms(k), t, CostModel(100, 1e6))
        n = np.arange(1, plan.n_max + 1)
        lam_b = lam * t**beta
        worst = max(worst, _rel(plan.n0[1:], _closed_form_abel(plan.budget_M, lam_b, k, beta, n)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    report("4 (abel)", ok, f"max rel deviation from closed-form N_0={worst:.3e}; {elapsed:.2f}s")
    assert ok


# 5 ---------------------------------------------------------------------------


def _random_problems(family, count, rng):
    out = []
    while len(out) < count:
        c0, c1, c2, a0, a1 = (float(x) for x in rng.uniform(-1, 1, 5))
        u, v = ("u", "v") if family == "fredholm" else ("t", "s")
        kernel = f"({c0!r}) + ({c1!r})*{u} + ({c2!r})*{v}"
        rhs = f"({a0!r}) + ({a1!r})*{u}"
        alpha = 0.5 if family == "abel" else None
        spec = ProblemSpec(family, kernel, rhs, 0.5, alpha=alpha)
        norms = compute_norms(spec)
        if validate_problem(spec, norms).valid:
            out.append((spec, norms))
    return out


def test_criterion_5_variance_bounds(report):
    start = time.perf_counter()
    rng = np.random.default_rng(20240501)
    z = 10_000
    worst = {}
    ok = True
    for family in ("volterra", "fredholm", "abel"):
        worst[family] = 0.0
        for i, (spec, norms) in enumerate(_random_problems(family, 10, rng)):
            plan = build_plan(spec, norms, 1.0, CostModel(z, 100.0 * z))
            values, _ = replicate_values(spec, 1.0, EstimatorConfig(z, plan, seed=i))
            ratio = float(np.var(values, ddof=1)) / variance_bound(plan, spec, norms)
            worst[family] = max(worst[family], ratio)
            ok &= ratio <= 1.5
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120.0
    detail = "; ".join(f"{k} max Z*Var/bound={v:.3f}" for k, v in worst.items())
    report("5", ok, f"{detail}; {elapsed:.1f}s")
    assert ok


# 6 ---------------------------------------------------------------------------

FRED_TEST = ProblemSpec("fredholm", "u*v", "u", 0.5)


def test_criterion_6_rate(report):
    start = time.perf_counter()
    zs = [100, 1000, 10_000, 100_000]
    ses = [estimate_point(FRED_TEST, 1.0, plan_config(FRED_TEST, 1.0, z, seed=11)).std_error for z in zs]
    slope = float(np.polyfit(np.log(zs), np.log(ses), 1)[0])
    elapsed = time.perf_counter() - start
    ok = abs(slope + 0.5) <= 0.1 and elapsed < 60.0
    report("6", ok, f"log-log slope={slope:.4f}; {elapsed:.2f}s")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_criterion_7_coverage(report):
    start = time.perf_counter()
    plan = plan_config(FRED_TEST, 1.0, 400).plan
    truth = 1.2 * (1 - FRED_TEST.lam)  # scaled solution at u = 1
    runs = 2000
    hits = 0
    for seed in range(runs):
        r = estimate_point(FRED_TEST, 1.0, EstimatorConfig(400, plan, 100_000 + seed))
        hits += r.ci_low <= truth <= r.ci_high
    coverage = hits / runs
    elapsed = time.perf_counter() - start
    ok = 0.93 <= coverage <= 0.97 and elapsed < 120.0
    report("7", ok, f"coverage={coverage:.4f} over {runs} runs; {elapsed:.1f}s")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_criterion_8_cost(report):
    start = time.perf_counter()
    cases = [
        ("volterra", ProblemSpec("volterra", "t*s", "1", 0.5)),
        ("fredholm", FRED_TEST),
        ("abel", ProblemSpec("abel", "t*s", "1", 0.5, alpha=0.5)),
    ]
    ok = True
    parts = []
    for name, spec in cases:
        plan = plan_config(spec, 1.0, 100).plan
        rs = np.empty(1000)
        theta = None
        for seed in range(1000):
            r = estimate_point(spec, 1.0, EstimatorConfig(100, plan, seed))
            rs[seed] = r.realized_cost_R
            theta = r.expected_cost_Theta
        se = rs.std(ddof=1) / math.sqrt(len(rs))
        dev = abs(rs.mean() - theta) / se
        ok &= dev <= 4.0
        parts.append(f"{name} mean R={rs.mean():.1f} theta={theta:.1f} dev/se={dev:.2f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30.0
    report("8", ok, "; ".join(parts) + f"; {elapsed:.1f}s")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_criterion_9_distributions(report):
    start = time.perf_counter()
    worst_pmf = 0.0
    for mu in (0.4, 1.3, 4.0):
        law = TruncationLaw.mittag_leffler(1.0, mu)
        for n in range(0, 31):
            ref = stats.poisson.pmf(n, mu)
            worst_pmf = max(worst_pmf, abs(pmf(law, n) - ref) / ref)

    n = 3
    pts = polygonal_beta_array(0.0, n, RngStream(2024, 0), 10**6)
    ks = stats.kstest(pts[:, 0], lambda x: np.clip(x, 0.0, 1.0) ** n)

    mean_err = 0.0
    for i, n in enumerate((2, 4, 8)):
        for draw in (polygonal_beta_array(0.0, n, RngStream(2024, 1 + i), 10**6),
                     simplex_uniform_array(n, RngStream(2024, 10 + i), 10**6)):
            mean_err = max(mean_err, abs(draw[:, 0].mean() - n / (n + 1)))
    elapsed = time.perf_counter() - start
    ok = worst_pmf <= 1e-12 and ks.pvalue > 1e-3 and mean_err <= 0.002 and elapsed < 60.0
    report(
        "9",
        ok,
        f"max rel pmf diff={worst_pmf:.1e}; KS p={ks.pvalue:.3f}; max |E s1 - n/(n+1)|={mean_err:.1e}; "
        f"{elapsed:.1f}s",
    )
    assert ok


# 10 --------------------------------------------------------------------------


def test_criterion_10_special_functions(report):
    start = time.perf_counter()
    e_err = max(abs(mittag_leffler(1.0, z) / math.exp(z) - 1) for z in (0.1, 0.5, 1.0, 2.0, 5.0))
    asym = 0.5 * math.sqrt(math.pi) * abs(math.log(0.999)) ** -1.5
    g = g_alpha(0.5, 0.999, SeriesTolerance(max_terms=200_000))
    g_err = abs(g / asym - 1)
    w_err = max(abs(log_w_n(1.0, n) + math.lgamma(n + 1)) for n in range(0, 21))
    elapsed = time.perf_counter() - start
    ok = e_err <= 1e-12 and g_err <= 0.15 and w_err <= 1e-12 and elapsed < 1.0
    report(
        "10",
        ok,
        f"E_1 rel err={e_err:.1e}; G_1/2(0.999)/asymptote-1={g_err:.4f}; log W_n(1) err={w_err:.1e}; "
        f"{elapsed:.2f}s",
    )
    assert ok
