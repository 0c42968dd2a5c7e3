import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from dyadic_bloom import (CubeId, DyadicGrid, GridFunction, HaarSpectrum, MartingaleMask,
                          Rectangle, haar_forward, haar_inverse, haar_tensor, indicator,
                          is_fully_cancellative, local_mean_oscillation_expansion,
                          martingale_transform, project_fully_cancellative, random_function,
                          random_series, rectangle_average, rectangle_average_series,
                          square_function)
from dyadic_bloom.core import average_difference_series, signature_sum, signatures, slice_average
from dyadic_bloom.experiments import haar_algebra_residuals

grids = st.sampled_from([((3, 3), (1, 1)), ((2, 3), (2, 1)), ((2, 2), (2, 2)), ((4, 1), (1, 2))])


def make(g):
    return DyadicGrid(*g)


@given(grids, st.integers(0, 2 ** 31))
def test_reconstruction_and_parseval(g, seed):
    grid = make(g)
    f = random_function(grid, np.random.default_rng(seed))
    s = haar_forward(f)
    assert np.allclose(haar_inverse(s).values, f.values, atol=1e-12)
    assert f.norm() ** 2 == pytest.approx(float(np.sum(s.coeffs ** 2)), rel=1e-12)


def test_haar_system_is_orthonormal(grid):
    a1, a2 = grid.axes
    for ax in (a1, a2):
        G = ax.synthesis @ ax.synthesis.T / ax.N
        assert np.allclose(G, np.eye(ax.N), atol=1e-12)


def test_coefficients_match_lattice_oracle(grid, rng):
    f = random_function(grid, rng)
    C = haar_forward(f).coeffs
    oc = O.haar_coefficients(f)
    # every oracle coefficient appears among the library coefficients, with multiplicity
    lib = np.sort(np.abs(C[1:, 1:]).ravel())
    ref = np.sort(np.abs(np.array(list(oc.values()))))
    assert np.allclose(lib, ref, atol=1e-12)


def test_haar_tensor_matches_oracle(grid, rng):
    L1, L2 = O.axes_of(grid)
    for _ in range(5):
        k1, k2 = int(rng.integers(grid.depths[0])), int(rng.integers(grid.depths[1]))
        q1 = tuple(int(x) for x in rng.integers(2 ** k1, size=L1.n))
        q2 = tuple(int(x) for x in rng.integers(2 ** k2, size=L2.n))
        e1, e2 = L1.signatures()[-1], L2.signatures()[0]
        lib = haar_tensor(grid, CubeId(1, k1, q1), _sig(e1), CubeId(2, k2, q2), _sig(e2))
        ref = np.outer(L1.haar(k1, q1, e1), L2.haar(k2, q2, e2))
        assert np.allclose(O.to_lattice(lib), ref, atol=1e-12)


def _sig(bits):
    e = 0
    for b in bits:
        e = 2 * e + b
    return e


def test_rectangle_averages(grid, rng):
    f = random_function(grid, rng)
    s = haar_forward(f)
    L1, L2 = O.axes_of(grid)
    F = O.to_lattice(f)
    for k1, q1 in L1.all_cubes()[::3]:
        for k2, q2 in L2.all_cubes()[::5]:
            R = Rectangle(CubeId(1, k1, q1), CubeId(2, k2, q2))
            ref = O.rectangle_mean(F, L1, L2, ((k1, q1), (k2, q2)))
            assert rectangle_average(f, R) == pytest.approx(ref, abs=1e-12)
            assert rectangle_average_series(s, R) == pytest.approx(ref, abs=1e-12)


def test_average_difference_requires_nesting(grid33):
    ax = grid33.axes[0]
    with pytest.raises(ValueError):
        average_difference_series(ax, np.zeros(ax.N), (1, 0), (1, 0))
    with pytest.raises(ValueError):
        average_difference_series(ax, np.zeros(ax.N), (2, 3), (1, 0))


@given(grids, st.integers(0, 2 ** 31))
def test_exact_algebra_residuals(g, seed):
    res = haar_algebra_residuals(make(g), np.random.default_rng(seed))
    assert max(res.values()) <= 1e-12


def test_three_term_split_pieces(grid33, rng):
    f = random_function(grid33, rng)
    R = Rectangle(CubeId(1, 1, (1,)), CubeId(2, 2, (2,)))
    split = local_mean_oscillation_expansion(f, R)
    # slice terms are mean zero on R and the cancellative term is fully cancellative
    assert abs(split.slice1.values.sum()) < 1e-12
    assert is_fully_cancellative(split.cancellative, 1e-12)
    direct = indicator(grid33, R).values * (f.values - rectangle_average(f, R))
    assert np.allclose(split.total().values, direct, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_signature_sum_rule(n):
    for e in signatures(n):
        for d in signatures(n):
            if e != d:
                s = signature_sum(e, d, n)
                assert s != 2 ** n - 1 and 0 <= s < 2 ** n - 1
    assert signature_sum(0, 0, n) == 2 ** n - 1


@given(grids, st.integers(0, 2 ** 31))
def test_projection_is_fully_cancellative(g, seed):
    grid = make(g)
    f = random_function(grid, np.random.default_rng(seed))
    p = project_fully_cancellative(f)
    assert is_fully_cancellative(p, 1e-12)
    # slice averages vanish in each variable
    Q1 = CubeId(1, 0, (0,) * grid.axis_dims[0])
    assert np.abs(slice_average(p, Q1)).max() < 1e-12
    # projecting twice changes nothing
    assert np.allclose(project_fully_cancellative(p).values, p.values, atol=1e-13)


def test_random_function_cancellative_flag(grid, rng):
    assert is_fully_cancellative(random_function(grid, rng, cancellative=True), 1e-12)
    assert not is_fully_cancellative(random_function(grid, rng), 1e-12)


@given(st.integers(0, 2 ** 31))
def test_martingale_transform_preserves_square_function(seed):
    grid = DyadicGrid((3, 3), (1, 1))
    rng = np.random.default_rng(seed)
    f = random_function(grid, rng, cancellative=True)
    g = martingale_transform(f, MartingaleMask.random(grid, rng))
    assert np.allclose(square_function(g).values, square_function(f).values, atol=1e-12)
    assert g.norm() == pytest.approx(f.norm(), rel=1e-12)


def test_martingale_masks_validate(grid33):
    with pytest.raises(ValueError):
        MartingaleMask(grid33, np.zeros(grid33.shape))
    tau = -np.ones(grid33.shape[0] - 1)
    m = MartingaleMask.parameter(grid33, 1, tau)
    f = random_function(grid33, np.random.default_rng(0), cancellative=True)
    assert np.allclose(martingale_transform(f, m).values, -f.values, atol=1e-12)


def test_random_series_is_resolution_consistent():
    coarse = DyadicGrid((3, 3))
    fine = DyadicGrid((4, 4))
    a = haar_forward(random_series(coarse, 7)).coeffs
    b = haar_forward(random_series(fine, 7)).coeffs
    # coarse levels carry the same coefficients on both grids
    assert np.allclose(a, b[:8, :8], atol=1e-12)


def test_grid_function_serialization(grid, rng):
    f = random_function(grid, rng)
    g = GridFunction.from_json(f.to_json())
    assert g.grid == f.grid and np.array_equal(g.values, f.values)
    assert np.allclose(GridFunction.from_csv(grid, f.to_csv()).values, f.values)
    s = haar_forward(f)
    assert np.array_equal(HaarSpectrum.from_json(s.to_json()).coeffs, s.coeffs)
    json.loads(s.to_json())


def test_spatial_round_trip(grid, rng):
    f = random_function(grid, rng)
    assert np.array_equal(GridFunction.from_spatial(grid, f.spatial()).values, f.values)


def test_grid_and_cube_errors():
    with pytest.raises(ValueError):
        DyadicGrid((3,), (1,))
    with pytest.raises(ValueError):
        CubeId(3, 0, (0,))
    with pytest.raises(ValueError):
        CubeId(1, 1, (2,))
    with pytest.raises(ValueError):
        Rectangle(CubeId(2, 0, (0,)), CubeId(2, 0, (0,)))
    grid = DyadicGrid((2, 2))
    with pytest.raises(ValueError):
        grid.check_cube(CubeId(1, 3, (0,)))


def test_grid_function_is_immutable(grid33):
    f = GridFunction.zeros(grid33)
    with pytest.raises((AttributeError, ValueError)):
        f.values[0, 0] = 1.0


def test_cube_children_and_ancestors():
    Q = CubeId(1, 1, (1, 0))
    kids = Q.children()
    assert len(kids) == 4
    assert all(Q.contains(k) and k.ancestor(1) == Q for k in kids)
    assert len(Q.descendants(2)) == 16
