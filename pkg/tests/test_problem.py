import numpy as np
import pytest

from neumann_mc.problem import (
    Family,
    ProblemSpec,
    compute_norms,
    fredholm_weights,
    path_weight_fredholm,
    path_weight_volterra,
    validate_problem,
    volterra_weights,
)
from neumann_mc.sampling import RngStream, SimplexPoint, simplex_uniform_array


def volterra(kernel, rhs="1", lam=1.0, **kw):
    return ProblemSpec("volterra", kernel, rhs, lam, **kw)


def fredholm(kernel, rhs="1", lam=0.5, **kw):
    return ProblemSpec("fredholm", kernel, rhs, lam, **kw)


def test_family_parse():
    assert Family.parse("Fredholm") is Family.FREDHOLM
    assert Family.parse("abel") is Family.ABEL
    with pytest.raises(ValueError):
        Family.parse("hammerstein")


def test_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec("abel", "1", "1", 0.5)  # alpha missing
    with pytest.raises(ValueError):
        volterra("1", rhs="s")  # rhs uses the second variable
    with pytest.raises(ValueError):
        volterra("1", domain_dim=2)
    with pytest.raises(ValueError):
        fredholm("u3", domain_dim=2)
    with pytest.raises(ValueError):
        volterra("1", horizon=0.0)


def test_volterra_path_weights():
    assert path_weight_volterra(volterra("1"), 0.7, SimplexPoint()) == 1.0
    assert path_weight_volterra(volterra("t*s"), 1.0, SimplexPoint((0.5,))) == 0.5
    assert path_weight_volterra(volterra("1"), 0.9, SimplexPoint((0.8, 0.3, 0.1))) == 1.0
    # n = 0 returns f(t)
    assert path_weight_volterra(volterra("1", rhs="t^2"), 3.0, SimplexPoint()) == 9.0


def test_volterra_weights_scale_by_t():
    spec = volterra("t - s", rhs="1 + t")
    t = 2.0
    pts = np.array([[0.9, 0.4]])
    expected = (t - t * 0.9) * (t * 0.9 - t * 0.4) * (1 + t * 0.4)
    assert volterra_weights(spec, t, pts)[0] == pytest.approx(expected)


def test_fredholm_path_weights():
    assert path_weight_fredholm(fredholm("1"), 0.3, []) == 1.0
    assert path_weight_fredholm(fredholm("1"), 0.3, [0.1, 0.9]) == 1.0
    spec = fredholm("u*v", rhs="u")
    assert path_weight_fredholm(spec, 1.0, [0.5, 0.2]) == pytest.approx(0.01, rel=1e-15)
    assert path_weight_fredholm(spec, 0.4, []) == 0.4


def test_fredholm_weights_multidimensional():
    spec = fredholm("u1*v1 + u2*v2", rhs="u1", domain_dim=2)
    u = np.array([1.0, 0.5])
    nodes = np.array([[[0.2, 0.4], [0.6, 0.8]]])
    k1 = 1.0 * 0.2 + 0.5 * 0.4
    k2 = 0.2 * 0.6 + 0.4 * 0.8
    assert fredholm_weights(spec, u, nodes)[0] == pytest.approx(k1 * k2 * 0.6)


def test_path_weight_family_checks():
    with pytest.raises(ValueError):
        path_weight_volterra(fredholm("1"), 0.5, SimplexPoint())
    with pytest.raises(ValueError):
        path_weight_fredholm(volterra("1"), 0.5, [])


def test_path_weight_magnitude_bound():
    spec = volterra("cos(3*t*s) - 0.5*s", rhs="sin(5*t)")
    norms = compute_norms(spec, 201)
    rng = RngStream(1)
    for n in range(1, 7):
        w = volterra_weights(spec, 1.0, simplex_uniform_array(n, rng, 2000))
        assert np.all(np.abs(w) <= norms.sup_norm_K**n * norms.sup_norm_f * (1 + 1e-9))


def test_norms_constant_kernel():
    n = compute_norms(fredholm("1"))
    assert n.op_norm_K == pytest.approx(1.0, rel=1e-14)
    assert n.op_norm_K2 == pytest.approx(1.0, rel=1e-14)
    assert n.sup_norm_K == 1.0


def test_norms_product_kernel():
    n = compute_norms(fredholm("u*v", rhs="u"), 401)
    assert n.sup_norm_K == 1.0
    assert n.op_norm_K == pytest.approx(0.5, rel=1e-12)
    assert n.op_norm_K2 == pytest.approx(1 / 3, rel=1e-5)
    assert n.sup_norm_f == 1.0
    assert n.op_norm_K <= n.sup_norm_K


def test_norms_two_dimensional():
    n = compute_norms(fredholm("u1*v1*u2*v2", domain_dim=2), 51)
    assert n.op_norm_K == pytest.approx(0.25, rel=1e-12)
    assert n.grid_points == 51 * 51


def test_volterra_norms():
    n = compute_norms(volterra("t*s", horizon=2.0), 201)
    # max_t int_0^t t s ds = T^3 / 2
    assert n.op_norm_K == pytest.approx(4.0, rel=1e-4)
    assert n.sup_norm_K == pytest.approx(4.0)


@pytest.mark.parametrize("kernel", ["exp(-(u-v)^2)", "0.5*cos(u+v)", "u*v + 0.2"])
def test_norm_grid_convergence(kernel):
    a = compute_norms(fredholm(kernel), 51)
    b = compute_norms(fredholm(kernel), 101)
    for x, y in [(a.sup_norm_K, b.sup_norm_K), (a.op_norm_K, b.op_norm_K), (a.op_norm_K2, b.op_norm_K2)]:
        assert abs(x - y) < 0.01 * y


def test_validate_examples():
    ok = fredholm("1", lam=0.5)
    assert validate_problem(ok, compute_norms(ok)).valid

    big_lam = fredholm("1", lam=1.2)
    v = validate_problem(big_lam, compute_norms(big_lam))
    assert not v.valid and "lambda not in (0,1)" in v.failures

    big_k = fredholm("2", lam=0.5)
    v = validate_problem(big_k, compute_norms(big_k))
    assert any("|||K||| = 2 > 1" in f for f in v.failures)
    assert any("lambda*|||K^[2]|||" in f and ">= 1" in f for f in v.failures)


def test_validate_volterra_and_abel():
    neg = volterra("1", lam=-1.0)
    assert not validate_problem(neg, compute_norms(neg)).valid
    bad_alpha = ProblemSpec("abel", "1", "1", 0.5, alpha=1.2)
    v = validate_problem(bad_alpha, compute_norms(bad_alpha))
    assert "alpha not in (0,1)" in v.failures
    good = ProblemSpec("abel", "1", "1", 0.5, alpha=0.5)
    assert validate_problem(good, compute_norms(good))
