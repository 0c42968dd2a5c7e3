import numpy as np
import pytest

from dyadic_bloom import (DyadicGrid, GridFunction, GridOperator, cascade_weight, operator_norm,
                          random_cancellative_shift, random_function, ShiftComplexity)
from dyadic_bloom.linops import (NormEstimate, add, compose, identity_operator,
                                 multiplication_operator, scale, zero_operator)


def weighted_exact(m, mu, lam, p):
    # ||M_m : L^p(mu) -> L^p(lam)|| = max |m| (lam / mu)^{1/p}
    return float(np.max(np.abs(m) * (lam.values / mu.values) ** (1 / p)))


def test_dense_and_lanczos_agree():
    grid = DyadicGrid((4, 4))
    op = random_cancellative_shift(grid, ShiftComplexity((1, 0), (0, 1)), 2).operator()
    mu, lam = cascade_weight(grid, 0.5, 1), cascade_weight(grid, 0.5, 2)
    d = operator_norm(op, mu, lam, method="dense-svd")
    l = operator_norm(op, mu, lam, method="lanczos")
    assert d.value == pytest.approx(l.value, rel=1e-9)
    assert l.converged and d.direction == "exact"


def test_auto_method_switch():
    small, large = DyadicGrid((3, 3)), DyadicGrid((5, 5))
    assert operator_norm(identity_operator(small)).method == "dense-svd"
    est = operator_norm(identity_operator(large))
    assert est.method == "lanczos" and est.value == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_ascent_on_multiplication_operator(p, rng):
    grid = DyadicGrid((3, 3))
    m = GridFunction(grid, rng.uniform(-2, 2, grid.shape))
    mu, lam = cascade_weight(grid, 0.5, 1), cascade_weight(grid, 0.5, 2)
    est = operator_norm(multiplication_operator(m), mu, lam, p)
    exact = weighted_exact(m.values, mu, lam, p)
    assert est.direction == "lower" and est.value <= exact * (1 + 1e-9)
    assert est.value == pytest.approx(exact, rel=1e-3)
    assert est.restart_values == sorted(est.restart_values)


def test_ascent_matches_svd_at_p_two():
    grid = DyadicGrid((3, 3))
    op = random_cancellative_shift(grid, ShiftComplexity((0, 1), (1, 0)), 6).operator()
    exact = operator_norm(op).value
    est = operator_norm(op, p=2.0, method="projected-ascent")
    assert est.value <= exact * (1 + 1e-9) and est.value == pytest.approx(exact, rel=1e-4)


def test_operator_algebra(rng):
    grid = DyadicGrid((2, 3))
    A = random_cancellative_shift(grid, ShiftComplexity(), 1).operator()
    B = multiplication_operator(random_function(grid, rng))
    DA, DB = A.dense(), B.dense()
    assert np.allclose(add(A, B).dense(), DA + DB)
    assert np.allclose(scale(A, 2.5).dense(), 2.5 * DA)
    assert np.allclose(compose(A, B).dense(), DA @ DB)
    assert np.allclose((A - B).dense(), DA - DB)
    assert np.allclose(A.T.dense(), DA.T)
    assert np.allclose(zero_operator(grid).dense(), 0)
    assert np.allclose(identity_operator(grid).dense(), np.eye(grid.size))


def test_errors():
    grid = DyadicGrid((2, 2))
    no_adj = GridOperator(grid, lambda F: 2 * F)
    with pytest.raises(ValueError):
        operator_norm(no_adj, p=3.0)
    with pytest.raises(ValueError):
        operator_norm(identity_operator(grid), p=3.0, method="dense-svd")
    with pytest.raises(ValueError):
        operator_norm(identity_operator(grid), method="magic")
    # an operator without an adjoint still gets an exact p = 2 norm densely
    assert operator_norm(no_adj).value == pytest.approx(2.0)


def test_estimate_serializes():
    d = NormEstimate(1.0, "dense-svd").to_dict()
    assert d["value"] == 1.0 and d["direction"] == "exact"
