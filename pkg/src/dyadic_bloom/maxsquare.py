"""Dyadic maximal functions and (shifted, mixed) square functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridFunction, block_means, spread


@dataclass(frozen=True)
class ShiftComplexity:
    """Complexity (i, j) of a biparameter shift: P in (R)_i, Q in (R)_j."""

    i: tuple = (0, 0)
    j: tuple = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "i", tuple(int(v) for v in self.i))
        object.__setattr__(self, "j", tuple(int(v) for v in self.j))
        if min(self.i + self.j) < 0:
            raise ValueError("complexities are non-negative")

    def parameter(self, t):
        return self.i[t - 1], self.j[t - 1]

    def admissible(self, grid):
        """Some R of each parameter has P and Q with Haar functions on the grid."""
        return all(max(self.parameter(t)) <= grid.depths[t - 1] - 1 for t in (1, 2))

    def check(self, grid):
        if not self.admissible(grid):
            raise ValueError(f"complexity {self} is not admissible on depths {grid.depths}")

    @property
    def total(self):
        return sum(self.i) + sum(self.j)

    def to_dict(self):
        return {"i1": self.i[0], "i2": self.i[1], "j1": self.j[0], "j2": self.j[1]}


def _vals(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


# ---------------------------------------------------------------------------
# maximal functions

def maximal_dyadic(f, scope="strong"):
    """M_{D_t} (scope 1 or 2) or the strong maximal function M_S ("strong")."""
    grid = f.grid
    v = np.abs(f.values)
    if scope == 1:
        return GridFunction(grid, grid.axes[0].maximal(v.T).T)
    if scope == 2:
        return GridFunction(grid, grid.axes[1].maximal(v))
    if scope != "strong":
        raise ValueError(f"unknown maximal scope {scope!r}")
    A = block_means(grid, v)
    out = v.copy()
    for k1, row in enumerate(A):
        for k2, a in enumerate(row):
            out = np.maximum(out, spread(grid, a, k1, k2))
    return GridFunction(grid, out)


# ---------------------------------------------------------------------------
# square functions

def square_function(f, scope="biparameter"):
    """S_D (biparameter) or the per-variable S_{D1}, S_{D2} (scope 1 or 2).

    S_{D1} f(x) = (sum_{Q1} |H_{Q1} f(x2)|^2 1_{Q1}(x1)/|Q1|)^{1/2} with
    H_{Q1} f(x2) the slice integral of f against h_{Q1}.
    """
    grid = f.grid
    a1, a2 = grid.axes
    F = f.values
    if scope == "biparameter":
        C = a1.analysis @ F @ a2.analysis.T
        C[0, :] = 0.0
        C[:, 0] = 0.0
        S2 = a1.cube_indicator.T @ C ** 2 @ a2.cube_indicator
    elif scope == 1:
        X = a1.analysis @ F
        X[0] = 0.0
        S2 = a1.cube_indicator.T @ X ** 2
    elif scope == 2:
        X = F @ a2.analysis.T
        X[:, 0] = 0.0
        S2 = X ** 2 @ a2.cube_indicator
    else:
        raise ValueError(f"unknown square function scope {scope!r}")
    return GridFunction(grid, np.sqrt(np.maximum(S2, 0.0)))


def square_function_1d(axis, u):
    """One-parameter dyadic square function along the last axis of u."""
    c = axis.forward(u)
    c[..., 0] = 0.0
    return np.sqrt(c ** 2 @ axis.cube_indicator)


def _shift_tables(axis, i, j):
    """Incidence tables for the roots R of a one-parameter shift.

    Returns (P, Q): P[R, r] = 1 when cube(r) lies in (R)_i (all
    signatures) and Q[R, x] = sum_{Q in (R)_j} 1_Q(x)/|Q|.  Roots run over
    levels l with l + max(i, j) <= K - 1.
    """
    lmax = axis.K - 1 - max(i, j)
    if lmax < 0:
        raise ValueError(f"complexity ({i}, {j}) not admissible at depth {axis.K}")
    nroots = axis.cube_offset(lmax + 1)
    P = np.zeros((nroots, axis.N))
    Q = np.zeros((nroots, axis.N))
    lev, cube = axis.haar_level, axis.haar_cube
    x = np.arange(axis.N)
    for l in range(lmax + 1):
        o = axis.cube_offset(l)
        sel = np.nonzero(lev == l + i)[0]
        P[o + (cube[sel] >> (i * axis.n)), sel] = 1.0
        B = axis.N // axis.cubes_at(l)
        Q[o + x // B, x] = 2.0 ** ((l + j) * axis.n)
    return P, Q


def shifted_square_function(f, c, scope="biparameter"):
    """S^{i,j} f: sum over roots R of (sum_{P in (R)_i} |f^(P)|)^2 spread over (R)_j.

    For scope "biparameter" c is a ShiftComplexity.  The inner sum also
    runs over the signatures of P; the spreading is sum_Q 1_Q/|Q|.
    """
    if scope != "biparameter":
        raise ValueError("use shifted_square_function_1d for one parameter")
    grid = f.grid
    c.check(grid)
    a1, a2 = grid.axes
    P1, Q1 = _shift_tables(a1, *c.parameter(1))
    P2, Q2 = _shift_tables(a2, *c.parameter(2))
    C = np.abs(a1.analysis @ f.values @ a2.analysis.T)
    inner = P1 @ C @ P2.T
    return GridFunction(grid, np.sqrt(Q1.T @ inner ** 2 @ Q2))


def shifted_square_function_1d(axis, u, i, j):
    P, Q = _shift_tables(axis, i, j)
    C = np.abs(axis.forward(u))
    return np.sqrt((C @ P.T) ** 2 @ Q)


def mixed_square_maximal(f, order="SM", shift=None):
    """[SM] f: square sum over Q1 of (M_{D2} H_{Q1} f)^2 1_{Q1}/|Q1|; [MS] symmetric.

    shift = (i, j) gives the shifted variant in the square-function
    parameter: sum over roots R of (sum_{P in (R)_i} M H_P f)^2 spread over (R)_j.
    """
    if order == "MS":
        return mixed_square_maximal(f.transpose(), "SM", shift).transpose()
    if order != "SM":
        raise ValueError(f"unknown order {order!r}")
    grid = f.grid
    a1, a2 = grid.axes
    X = a1.analysis @ f.values
    M = a2.maximal(X)
    M[0] = 0.0
    if shift is None:
        S2 = a1.cube_indicator.T @ M ** 2
    else:
        P, Q = _shift_tables(a1, *shift)
        S2 = Q.T @ (P @ M) ** 2
    return GridFunction(grid, np.sqrt(S2))
